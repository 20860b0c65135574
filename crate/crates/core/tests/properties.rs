use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use carnot::rng::stream_rng;
use carnot::*;

fn groups() -> Vec<StructureConstants> {
    vec![
        heisenberg(),
        gk_member(FamilyIndex::Finite(1)),
        gk_member(FamilyIndex::Finite(7)),
        gk_member(FamilyIndex::Infinite),
        free_step_two(3).unwrap(),
    ]
}

fn group() -> impl Strategy<Value = StructureConstants> {
    (0..groups().len()).prop_map(|i| groups().swap_remove(i))
}

fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n)
}

/// A group together with `count` points of it.
fn with_points(count: usize) -> impl Strategy<Value = (StructureConstants, Vec<GroupPoint>)> {
    group().prop_flat_map(move |sc| {
        let (m, d2) = (sc.m(), sc.d2());
        let pts = prop::collection::vec(coords(m + d2), count)
            .prop_map(move |v| v.iter().map(|c| GroupPoint::from_flat(m, d2, c).unwrap()).collect::<Vec<_>>());
        (Just(sc), pts)
    })
}

fn close(a: &GroupPoint, b: &GroupPoint, tol: f64) -> bool {
    a.max_abs_diff(b) <= tol * (1.0 + a.norm().max(b.norm()))
}

/// `<u, [v, w]>` computed from the raw coefficients.
fn paired_bracket(sc: &StructureConstants, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for l in 0..sc.d2() {
        for i in 0..sc.m() {
            for j in 0..sc.m() {
                acc += u[l] * sc.get(i, j, l) * v[i] * w[j];
            }
        }
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn group_law((sc, p) in with_points(3)) {
        let (a, b, c) = (&p[0], &p[1], &p[2]);
        let e = sc.zero_point();
        let left = sc.mul(&sc.mul(a, b).unwrap(), c).unwrap();
        let right = sc.mul(a, &sc.mul(b, c).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
        prop_assert!(close(&sc.mul(a, &e).unwrap(), a, 0.0));
        prop_assert!(close(&sc.mul(&e, a).unwrap(), a, 0.0));
        prop_assert!(close(&sc.mul(a, &sc.inv(a)).unwrap(), &e, 1e-14));
    }

    #[test]
    fn dilations_are_automorphisms((sc, p) in with_points(2), lambda in 0.1..5.0f64) {
        let d = |x: &GroupPoint| sc.dilation(lambda, x).unwrap();
        let lhs = d(&sc.mul(&p[0], &p[1]).unwrap());
        let rhs = sc.mul(&d(&p[0]), &d(&p[1])).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-12));
        let back = sc.dilation(1.0 / lambda, &lhs).unwrap();
        prop_assert!(close(&back, &sc.mul(&p[0], &p[1]).unwrap(), 1e-12));
    }

    #[test]
    fn bracket_bilinear_antisymmetric((sc, p) in with_points(3), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let (x, y, z) = (&p[0].xi, &p[1].xi, &p[2].xi);
        let lin = sc.bracket_xi(&(x * a + y * b), z);
        let sum = sc.bracket_xi(x, z) * a + sc.bracket_xi(y, z) * b;
        prop_assert!((lin - sum).amax() <= 1e-12 * (1.0 + a.abs() + b.abs()) * 10.0);
        prop_assert_eq!(sc.bracket_xi(x, y), -sc.bracket_xi(y, x));
        prop_assert!(sc.bracket_xi(x, x).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn j_is_linear_and_skew((sc, p) in with_points(2), a in -2.0..2.0f64) {
        let (u, w) = (&p[0].u, &p[1].u);
        let ju = j_operator(&sc, u).unwrap().mat;
        let jw = j_operator(&sc, w).unwrap().mat;
        let jsum = j_operator(&sc, &(u * a + w)).unwrap().mat;
        prop_assert!((&jsum - (&ju * a + &jw)).amax() <= 1e-12 * (1.0 + a.abs()));
        prop_assert_eq!(ju.transpose(), -&ju);
    }

    #[test]
    fn splitting_adds_up((sc, p) in with_points(1), zero_xi in any::<bool>(), zero_u in any::<bool>()) {
        let mut p = p[0].clone();
        if zero_xi { p.xi.fill(0.0); }
        if zero_u { p.u.fill(0.0); }
        let r = w_decomposition(&sc, &p).unwrap();
        prop_assert_eq!(r.dims_w.iter().sum::<usize>() + r.dim_w_inf, sc.d2());
        prop_assert!(r.dims_upper.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn n_of_p_is_dilation_invariant((sc, p) in with_points(1), lambda in 0.2..5.0f64) {
        let a = w_decomposition(&sc, &p[0]).unwrap().n_of_p;
        let b = w_decomposition(&sc, &sc.dilation(lambda, &p[0]).unwrap()).unwrap().n_of_p;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn spec_round_trip(sc in group()) {
        let text = write_spec(&sc);
        let parsed = parse_spec(&text).unwrap();
        let back = StructureConstants::from_dense(parsed.m, parsed.d2, &parsed.dense).unwrap();
        prop_assert_eq!(back, sc);
    }

    #[test]
    fn scaling_the_constants((sc, p) in with_points(1), a in 0.25..4.0f64) {
        // c -> a c with u0 -> u0 / a keeps the horizontal curve and scales z by a
        let cov = Covector::new(p[0].xi.clone() * 0.5, p[0].u.clone() * 0.5);
        let scaled = sc.scaled(a);
        let cov_a = Covector::new(cov.xi0.clone(), &cov.u0 / a);
        let g = exp_map(&sc, &cov, 1.0).unwrap();
        let h = exp_map(&scaled, &cov_a, 1.0).unwrap();
        prop_assert!((&g.xi - &h.xi).amax() <= 1e-6);
        prop_assert!((&g.u * a - &h.u).amax() <= 1e-6);
    }

    #[test]
    fn exp_map_time_rescaling((sc, p) in with_points(1), s in 0.05..1.0f64) {
        let cov = Covector::new(p[0].xi.clone() * 0.5, p[0].u.clone() * 0.5);
        let a = exp_map(&sc, &cov, s).unwrap();
        let b = exp_map(&sc, &cov.time_scaled(s), 1.0).unwrap();
        prop_assert!(close(&a, &b, 1e-9));
    }
}

#[test]
fn j_pairing_identity_on_1e4_triples() {
    let groups = groups();
    let mut worst = 0.0f64;
    for i in 0..10_000u64 {
        let sc = &groups[(i % groups.len() as u64) as usize];
        let mut rng = stream_rng(5, i);
        let mut normal = |n: usize| DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (u, v, w) = (normal(sc.d2()), normal(sc.m()), normal(sc.m()));
        let lhs = paired_bracket(sc, &u, &v, &w);
        let rhs = j_operator(sc, &u).unwrap().apply(&v).dot(&w);
        let direct = u.dot(&sc.bracket_xi(&v, &w));
        worst = worst.max((lhs - rhs).abs()).max((lhs - direct).abs());
    }
    assert!(worst <= 1e-12, "worst deviation {worst:e}");
}

#[test]
fn gk_j_square_has_negative_diagonal() {
    // J_u^2 for finite k, checked entrywise against its structure
    for k in [1u64, 2, 10, 1000] {
        let sc = gk_member(FamilyIndex::Finite(k));
        for i in 0..200u64 {
            let mut rng = stream_rng(8, i);
            let u = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let j = j_operator(&sc, &u).unwrap().mat;
            let sq = &j * &j;
            let r2 = u.norm_squared();
            assert!((sq[(0, 0)] + r2).abs() < 1e-12);
            for d in 1..4 {
                assert!(sq[(d, d)] < 0.0);
            }
            // on the orthogonal complement of e0 the square is -(r2/k^2) I - (1 - 1/k^2) u u^T
            let kk = (k * k) as f64;
            let expected = DMatrix::from_fn(3, 3, |a, b| {
                let id = if a == b { 1.0 } else { 0.0 };
                -(r2 / kk) * id - (1.0 - 1.0 / kk) * u[a] * u[b]
            });
            let block = sq.view((1, 1), (3, 3)).clone_owned();
            assert!((block - expected).amax() < 1e-12, "k = {k}");
        }
    }
}
