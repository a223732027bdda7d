//! Independent reference computations for tests.
//!
//! Nothing here shares code with `lipcert-core`: each routine is the most
//! direct (and usually slowest) way to get the number.

/// Singular values of a row-major `rows × cols` matrix, descending, by
/// one-sided Jacobi rotations on the columns.
pub fn singular_values(rows: usize, cols: usize, data: &[f64]) -> Vec<f64> {
    assert_eq!(data.len(), rows * cols);
    // Work on the orientation with fewer columns.
    let (m, n, mut a) = if cols <= rows {
        (rows, cols, data.to_vec())
    } else {
        let mut t = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                t[c * rows + r] = data[r * cols + c];
            }
        }
        (cols, rows, t)
    };
    let col = |a: &[f64], j: usize| -> Vec<f64> { (0..m).map(|i| a[i * n + j]).collect() };
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let (cp, cq) = (col(&a, p), col(&a, q));
                let alpha: f64 = cp.iter().map(|x| x * x).sum();
                let beta: f64 = cq.iter().map(|x| x * x).sum();
                let gamma: f64 = cp.iter().zip(&cq).map(|(x, y)| x * y).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (a[i * n + p], a[i * n + q]);
                    a[i * n + p] = c * x - s * y;
                    a[i * n + q] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n).map(|j| col(&a, j).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let up = f(&xp);
            xp[i] = orig - h;
            let down = f(&xp);
            xp[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest observed slope `‖f(a) − f(b)‖ / ‖a − b‖` over the given pairs.
pub fn max_pair_slope(f: impl Fn(&[f64]) -> Vec<f64>, pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    pairs
        .iter()
        .map(|(a, b)| {
            let dx = euclid(a, b);
            if dx == 0.0 {
                return 0.0;
            }
            euclid(&f(a), &f(b)) / dx
        })
        .fold(0.0, f64::max)
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// W1 between two uniform samples of equal size on the line: the mean gap
/// between order statistics.
pub fn w1_sorted_1d(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    let mut a = p.to_vec();
    let mut b = q.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Minimum-cost perfect matching by trying every permutation (N ≤ 8).
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    assert!(n <= 8, "brute force is factorial");
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let c: f64 = p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        best = best.min(c);
    });
    best
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// Distance from `x` to the set of points with label opposite to `label`,
/// halved: the radius certified by the nearest-neighbor rule.
pub fn nearest_neighbor_margin(points: &[[f64; 2]], labels: &[f64], i: usize) -> f64 {
    points
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l != labels[i])
        .map(|(p, _)| euclid(p, &points[i]) / 2.0)
        .fold(f64::INFINITY, f64::min)
}

/// Distance to the unit circle, positive inside.
pub fn unit_circle_sdf(x: [f64; 2]) -> f64 {
    1.0 - (x[0] * x[0] + x[1] * x[1]).sqrt()
}

/// Small deterministic generator (splitmix64) so oracle inputs do not depend
/// on the generator used by the code under test.
#[derive(Debug, Clone)]
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal by Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u = 1.0 - self.uniform();
        let v = self.uniform();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }
}
