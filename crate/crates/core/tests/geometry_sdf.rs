use lipcert_core::geometry::*;
use lipcert_oracles::{fd_gradient, max_pair_slope, unit_circle_sdf, SplitMix};

fn polygon(n: usize, r: f64) -> PolylineBoundary {
    let pts = (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    PolylineBoundary::from_loops(vec![pts]).unwrap()
}

#[test]
fn polygonal_circle_matches_analytic_distance() {
    let b = polygon(64, 1.0);
    let lab = RegionLabeler::even_odd();
    let sd = signed_distance(&b, &lab, [0.3, 0.0]);
    assert!((sd - 0.7).abs() <= 2e-3, "{sd}");
    let mut rng = SplitMix(1);
    for _ in 0..200 {
        let x = [rng.range(-1.5, 1.5), rng.range(-1.5, 1.5)];
        // 64-gon sagitta: 1 − cos(π/64)
        assert!((signed_distance(&b, &lab, x) - unit_circle_sdf(x)).abs() <= 1.3e-3);
    }
}

#[test]
fn points_on_segments_have_zero_distance() {
    let (b, lab) = snowflake_ring(2).unwrap();
    for s in b.segments().iter().step_by(7) {
        let m = [0.25 * s.p[0] + 0.75 * s.q[0], 0.25 * s.p[1] + 0.75 * s.q[1]];
        assert!(signed_distance(&b, &lab, m).abs() < 1e-15);
        assert_eq!(signed_distance(&b, &lab, s.p), 0.0);
    }
}

#[test]
fn signed_distance_is_one_lipschitz() {
    let (b, lab) = snowflake_ring(4).unwrap();
    let mut rng = SplitMix(2);
    let pairs: Vec<_> = (0..100_000)
        .map(|_| {
            let a = vec![rng.range(-1.3, 1.3), rng.range(-1.3, 1.3)];
            let r = rng.range(1e-4, 0.5);
            let t = rng.range(0.0, 6.3);
            let z = vec![a[0] + r * t.cos(), a[1] + r * t.sin()];
            (a, z)
        })
        .collect();
    let slope = max_pair_slope(|x| vec![signed_distance(&b, &lab, [x[0], x[1]])], &pairs);
    assert!(slope <= 1.0 + 1e-9, "{slope}");
}

#[test]
fn signed_distance_has_unit_gradient_away_from_the_boundary() {
    let (b, lab) = snowflake_ring(3).unwrap();
    let mut rng = SplitMix(3);
    let h = 1e-6;
    let mut checked = 0;
    for _ in 0..2000 {
        let x = [rng.range(-1.2, 1.2), rng.range(-1.2, 1.2)];
        if b.distance(x) <= 2.0 * h {
            continue;
        }
        let g = fd_gradient(|v| signed_distance(&b, &lab, [v[0], v[1]]), &x, h);
        let (_, exact) = sdf_with_gradient(&b, &lab, x);
        // the two agree except across equidistance ridges
        if (g[0] - exact[0]).abs() + (g[1] - exact[1]).abs() > 1e-4 {
            continue;
        }
        assert!(((g[0] * g[0] + g[1] * g[1]).sqrt() - 1.0).abs() < 1e-6);
        checked += 1;
    }
    assert!(checked > 1900, "{checked}");
}

#[test]
fn descent_step_crosses_the_boundary() {
    let (b, lab) = snowflake_ring(4).unwrap();
    let mut rng = SplitMix(4);
    let mut crossed = 0;
    let n = 2000;
    for _ in 0..n {
        let x = [rng.range(-1.2, 1.2), rng.range(-1.2, 1.2)];
        let f = signed_distance(&b, &lab, x);
        let d = crossing_direction(&b, &lab, x, 1e-6);
        let len = f.abs() * (1.0 + 1e-6);
        let z = [x[0] + len * d[0], x[1] + len * d[1]];
        if lab.is_positive(&b, z) != lab.is_positive(&b, x) {
            crossed += 1;
        }
    }
    assert!(crossed as f64 >= 0.99 * n as f64, "{crossed}/{n}");
}

#[test]
fn straight_descent_lands_on_the_boundary() {
    let (b, lab) = snowflake_ring(4).unwrap();
    let mut rng = SplitMix(5);
    for _ in 0..500 {
        let x = [rng.range(-1.2, 1.2), rng.range(-1.2, 1.2)];
        let f = signed_distance(&b, &lab, x).abs();
        let d = descent_direction(&b, x);
        let z = [x[0] + f * d[0], x[1] + f * d[1]];
        assert!(b.distance(z) < 1e-12, "{x:?}");
    }
}

#[test]
fn multiclass_sdf_is_one_lipschitz_with_one_nonzero_component() {
    let outer = koch_snowflake(2).unwrap();
    let b = outer.with_loops_of(&outer.scaled(0.5).unwrap()).unwrap();
    let part = RegionPartition::new(b, RegionLabeler::by_depth(vec![2, 0, 1]).unwrap());
    let mut rng = SplitMix(5);
    let pairs: Vec<_> = (0..20_000)
        .map(|_| {
            let a = vec![rng.range(-1.3, 1.3), rng.range(-1.3, 1.3)];
            let z = vec![a[0] + rng.range(-0.3, 0.3), a[1] + rng.range(-0.3, 0.3)];
            (a, z)
        })
        .collect();
    for (a, _) in pairs.iter().take(500) {
        let v = multiclass_sdf(&part, [a[0], a[1]]);
        assert!(v.iter().filter(|c| **c != 0.0).count() <= 1);
    }
    let slope = max_pair_slope(|x| multiclass_sdf(&part, [x[0], x[1]]), &pairs);
    assert!(slope <= 1.0 + 1e-9, "{slope}");
}

#[test]
fn grid_targets_are_lipschitz_between_neighbors() {
    let (b, lab) = snowflake_ring(4).unwrap();
    let res = 60;
    let d = sdf_grid_dataset(&b, &lab, res, SNOWFLAKE_BBOX).unwrap();
    let t = d.targets.as_ref().unwrap();
    for iy in 0..res {
        for ix in 0..res {
            let i = iy * res + ix;
            for j in [i + 1, i + res] {
                if j >= t.len() || (j == i + 1 && ix + 1 == res) {
                    continue;
                }
                let dist = lipcert_oracles::euclid(d.point(i), d.point(j));
                assert!((t[i] - t[j]).abs() <= dist + 1e-12);
            }
        }
    }
}

#[test]
fn full_resolution_grid_size() {
    let (b, lab) = snowflake_ring(4).unwrap();
    assert_eq!(b.segments().len(), 2 * 768);
    let d = sdf_grid_dataset(&b, &lab, 400, SNOWFLAKE_BBOX).unwrap();
    assert_eq!(d.len(), 160_000);
}
