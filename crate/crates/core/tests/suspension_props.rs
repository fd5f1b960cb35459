use centralizer_core::suspension::{base_sup_distance, normalize_counts, weight_sum, BaseAction, SuspensionPoint};
use centralizer_core::Domain;
use proptest::prelude::*;

fn cat_pair() -> BaseAction {
    BaseAction::cat_pair().unwrap()
}

/// `A^n d` reduced to the torus, with the integer matrix power formed exactly.
fn cat_power_distance(d: [f64; 2], n: i64) -> f64 {
    let (a, inv) = ([[2i128, 1], [1, 1]], [[1i128, -1], [-1, 2]]);
    let m = if n >= 0 { a } else { inv };
    let mut p = [[1i128, 0], [0, 1]];
    for _ in 0..n.unsigned_abs() {
        p = [
            [p[0][0] * m[0][0] + p[0][1] * m[1][0], p[0][0] * m[0][1] + p[0][1] * m[1][1]],
            [p[1][0] * m[0][0] + p[1][1] * m[1][0], p[1][0] * m[0][1] + p[1][1] * m[1][1]],
        ];
    }
    let v = [p[0][0] as f64 * d[0] + p[0][1] as f64 * d[1], p[1][0] as f64 * d[0] + p[1][1] as f64 * d[1]];
    Domain::torus(2).distance(&v, &[0.0, 0.0])
}

#[test]
fn hyperbolic_separation_on_a_grid() {
    let base = BaseAction::cat_map().unwrap();
    let delta = 0.05;
    let x = [0.31, 0.47];
    let mut checked = 0;
    for i in 0..200 {
        for j in 0..200 {
            let d = [(i as f64 - 99.5) / 200.0 * delta, (j as f64 - 99.5) / 200.0 * delta];
            let y = [x[0] + d[0], x[1] + d[1]];
            // short horizon: rounding grows like 2.618^n
            let got = base_sup_distance(&base, &x, &y, 8.0, f64::INFINITY);
            let want = (-8..=8).map(|n| cat_power_distance(d, n)).fold(0.0, f64::max);
            assert!((got - want).abs() < 1e-9, "d={d:?}: {got} vs {want}");
            if d != [0.0, 0.0] {
                let far = (-30..=30).map(|n| cat_power_distance(d, n)).fold(0.0, f64::max);
                assert!(far >= delta, "pair at offset {d:?} stays {far}-close");
                assert!(base_sup_distance(&base, &x, &y, 30.0, delta) >= delta);
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 40_000);
}

proptest! {
    #[test]
    fn weights_sum_to_one(t in prop::collection::vec(0.0f64..1.0, 1..=6)) {
        prop_assert!((weight_sum(&t) - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn normalization_is_canonical(x in prop::array::uniform2(0.0f64..1.0), a in prop::array::uniform2(-5.0f64..5.0)) {
        let b = cat_pair();
        let p = b.normalize(&x, &a).unwrap();
        prop_assert!(p.is_canonical());
        let (k, h) = normalize_counts(&a);
        for i in 0..2 {
            prop_assert!((k[i] as f64 + h[i] - a[i]).abs() <= 1e-15 * (1.0 + a[i].abs()));
        }
        prop_assert_eq!(b.normalize(&p.base, &p.heights).unwrap(), p);
    }

    #[test]
    fn group_law(
        x in prop::array::uniform2(0.0f64..1.0),
        a in prop::array::uniform2(0.0f64..1.0),
        u in prop::array::uniform2(-3.0f64..3.0),
        v in prop::array::uniform2(-3.0f64..3.0),
    ) {
        let b = cat_pair();
        let p = SuspensionPoint { base: x.to_vec(), heights: a.to_vec() };
        let lhs = b.act(&u, &b.act(&v, &p).unwrap()).unwrap();
        let rhs = b.act(&[u[0] + v[0], u[1] + v[1]], &p).unwrap();
        let (ka, _) = normalize_counts(&[a[0] + v[0] + u[0], a[1] + v[1] + u[1]]);
        let (k1, h1) = normalize_counts(&[a[0] + v[0], a[1] + v[1]]);
        let (k2, _) = normalize_counts(&[h1[0] + u[0], h1[1] + u[1]]);
        prop_assume!(k1[0] + k2[0] == ka[0] && k1[1] + k2[1] == ka[1]);
        prop_assert!(b.rho(&lhs.base, &rhs.base) < 1e-9);
        let dh = lhs.heights.iter().zip(&rhs.heights).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(dh < 1e-12);
    }

    #[test]
    fn two_link_distance_is_symmetric_and_bounded(
        x in prop::array::uniform2(0.0f64..1.0),
        y in prop::array::uniform2(0.0f64..1.0),
        a in 0.0f64..1.0,
        c in 0.0f64..1.0,
    ) {
        let b = BaseAction::cat_map().unwrap();
        let p = SuspensionPoint { base: x.to_vec(), heights: vec![a] };
        let q = SuspensionPoint { base: y.to_vec(), heights: vec![c] };
        let d = b.two_link_distance(&p, &q);
        prop_assert!((d - b.two_link_distance(&q, &p)).abs() < 1e-15);
        prop_assert!(d <= (a - c).abs() + b.lipschitz_bound() * std::f64::consts::FRAC_1_SQRT_2 + 1e-12);
        prop_assert_eq!(b.two_link_distance(&p, &p), 0.0);
    }
}
