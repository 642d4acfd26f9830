//! Randomized invariants of the core crate.

use caloron_core::geometry::{laplacian_apply_scalar, GridSpec, ProductGrid};
use caloron_core::holomap::{eta_from_blip, in_subalgebra, BlipMap, EtaField, ParabolicMode};
use caloron_core::hymflow::{hym_tensor, initial_metric};
use caloron_core::instanton::{approx_connection, charge, curvature_of_pair, energy_on_grid, Frame};
use caloron_core::looporbit::{canonical_diagonal, gauge_by_windings, holonomy, orbit_canonical, LoopAlgebraElement};
use caloron_core::matrixcore::{
    c, dist_d, expm, h_adjoint, herm_exp, hermitian_eigen, sigma, ComplexMatrix, HermitianPD, C64,
};
use caloron_core::quad::QuadSpec;
use caloron_core::rational::{parse_rational, Rational};
use proptest::prelude::*;

fn hermitian(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(-1.5f64..1.5, 2 * n * n).prop_map(move |v| {
        let m = ComplexMatrix::from_fn(n, |i, j| c(v[2 * (i * n + j)], v[2 * (i * n + j) + 1]));
        m.hermitian_part()
    })
}

fn anti_hermitian(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    hermitian(n).prop_map(|h| h.scale(c(0.0, 1.0)))
}

fn positive(n: usize) -> impl Strategy<Value = HermitianPD> {
    hermitian(n).prop_map(|x| herm_exp(&x).unwrap())
}

fn unitary(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    anti_hermitian(n).prop_map(|a| expm(&a))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// `tr(H^{-1} A^* H B)`.
fn h_inner(h: &HermitianPD, a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    (&(&(&h.inverse() * &a.adjoint()) * h.matrix()) * b).trace()
}

fn blip(v1: Rational) -> EtaField {
    let b = BlipMap { v: vec![parse_rational("1").unwrap(), v1], phases: vec![0.0, 0.0], mu: 1.0 };
    eta_from_blip(&b, ParabolicMode::Permissive).unwrap()
}

/// Complex literal `(re +- |im| i)` in the rational-function grammar.
fn lit(re: f64, im: f64) -> String {
    let sign = |x: f64| if x < 0.0 { '-' } else { '+' };
    format!("(0 {} {} {} {}i)", sign(re), re.abs(), sign(im), im.abs())
}

fn affine_blip(a: (f64, f64), b: (f64, f64)) -> Rational {
    parse_rational(&format!("{} W + {}", lit(a.0, a.1), lit(b.0, b.1))).unwrap()
}

/// Upper-triangular `eta` at `z = 0` for phases `(a, -a)`, entries decaying like `|w|^-2`.
fn graded(cf: &[f64], a: f64) -> EtaField {
    let r = |t: String| parse_rational(&t).unwrap();
    let c0 = vec![r("0".into()), r(format!("{} / (1 + w W)^2", lit(cf[0], cf[1]))), r("0".into()), r("0".into())];
    let c1 = vec![r("0".into()), r("0".into()), r(format!("{} w / (1 + w W)^2", lit(cf[2], cf[3]))), r("0".into())];
    EtaField::new(2, vec![a, -a], 1.0, vec![c0, c1], ParabolicMode::Permissive).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn herm_exp_exponentiates_eigenvalues(x in (2usize..5).prop_flat_map(hermitian)) {
        let expected = sorted(hermitian_eigen(&x).values.iter().map(|l| l.exp()).collect());
        let found = sorted(hermitian_eigen(herm_exp(&x).unwrap().matrix()).values);
        for (e, f) in expected.iter().zip(&found) {
            prop_assert!((e - f).abs() <= 1e-10 * e.max(1.0));
        }
    }

    #[test]
    fn distance_satisfies_triangle_inequality(
        (a, b, cc) in (2usize..4).prop_flat_map(|n| (positive(n), positive(n), positive(n)))
    ) {
        let (ab, bc, ac) = (dist_d(&a, &b).unwrap(), dist_d(&b, &cc).unwrap(), dist_d(&a, &cc).unwrap());
        prop_assert!(ac <= ab + bc + 1e-10);
        prop_assert!(dist_d(&a, &a).unwrap() <= 1e-10);
    }

    #[test]
    fn sigma_is_symmetric_and_nonnegative((a, b) in (2usize..4).prop_flat_map(|n| (positive(n), positive(n)))) {
        let (s1, s2) = (sigma(&a, &b).unwrap(), sigma(&b, &a).unwrap());
        prop_assert!(s1 >= 0.0);
        prop_assert!((s1 - s2).abs() <= 1e-10 * s1.max(1.0));
        prop_assert!(sigma(&a, &a).unwrap() <= 1e-12);
    }

    #[test]
    fn h_adjoint_is_adjoint_for_h_inner_product(
        (h, m, a, b) in (2usize..4).prop_flat_map(|n| (positive(n), hermitian(n), anti_hermitian(n), hermitian(n)))
    ) {
        let m = &m + &a.scale_re(0.7);
        let lhs = h_inner(&h, &(&m * &a), &b);
        let rhs = h_inner(&h, &a, &(&h_adjoint(&h, &m).unwrap() * &b));
        prop_assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm().max(1.0));
    }

    #[test]
    fn unitary_gauge_of_approximate_connection(cf in prop::collection::vec(-1.0f64..1.0, 4), a in 0.05f64..0.45) {
        // G = H_xi^{1/2} takes the holomorphic frame to a unitary one, where A_w = -(A_wbar)^*
        let e = graded(&cf, a);
        let g = ProductGrid::new(GridSpec { nx: 5, ny: 5, nu: 5, nphi: 4, ..GridSpec::default() }).unwrap();
        let conn = approx_connection(&e, &g).unwrap();
        let Frame::Holomorphic(h) = conn.frame() else { panic!("holomorphic frame expected") };
        for (v, hk) in conn.values().iter().zip(h) {
            let gk = hermitian_eigen(hk).map(|l| c(l.sqrt(), 0.0));
            let gi = gk.inverse().unwrap();
            let aw = &(&gk * &v.a_w) * &gi;
            let awb = &(&gk * &v.a_wbar) * &gi;
            prop_assert!((&aw + &awb.adjoint()).max_abs() <= 1e-12 * awb.max_abs().max(1.0));
        }
    }

    #[test]
    fn parabolic_check_matches_construction(entries in prop::collection::vec(prop::bool::ANY, 4), a in -0.45f64..0.45) {
        let phases = vec![a, 0.0];
        let mut m = ComplexMatrix::zeros(2);
        let row: Vec<Rational> = entries
            .iter()
            .enumerate()
            .map(|(k, &on)| {
                if on {
                    m[(k / 2, k % 2)] = c(1.0, 0.0);
                    parse_rational("1 / (1 + w W)^2").unwrap()
                } else {
                    Rational::zero()
                }
            })
            .collect();
        let built = EtaField::new(2, phases.clone(), 1.0, vec![row], ParabolicMode::Permissive);
        prop_assert_eq!(built.is_ok(), in_subalgebra(&m, &phases, ParabolicMode::Permissive, 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(16) })]

    #[test]
    fn holonomy_is_unitary(x0 in anti_hermitian(2), x1 in hermitian(2), mu in 0.5f64..2.0) {
        let x1 = x1.scale(c(0.3, 0.2));
        let xi = LoopAlgebraElement::new(2, mu, [(0, x0), (1, x1.clone()), (-1, x1.adjoint().scale_re(-1.0))]).unwrap();
        prop_assert!(holonomy(&xi).unwrap().unitarity_defect() <= 1e-10);
    }

    #[test]
    fn canonical_form_is_idempotent(x0 in anti_hermitian(3), mu in 0.5f64..2.0) {
        let xi = LoopAlgebraElement::constant(x0, mu).unwrap();
        let once = orbit_canonical(&xi).unwrap();
        let twice = orbit_canonical(&once).unwrap();
        prop_assert!(once.max_mode_difference(&twice) <= 1e-9);
    }

    #[test]
    fn canonical_form_is_gauge_invariant(
        a in prop::collection::vec(-0.4f64..0.4, 2),
        v in unitary(2),
        k in prop::collection::vec(-2i32..=2, 2),
    ) {
        let xi = LoopAlgebraElement::from_phases(&a, 1.0).unwrap();
        let moved = gauge_by_windings(&xi, &v, &k).unwrap();
        let (p, q) = (canonical_diagonal(&xi).unwrap(), canonical_diagonal(&moved).unwrap());
        for (x, y) in p.iter().zip(&q) {
            prop_assert!((x - y).abs() <= 1e-8, "{p:?} vs {q:?}");
        }
    }

    #[test]
    fn density_top_term_is_unitary_gauge_invariant(node in 0usize..1000, u in unitary(2)) {
        let e = blip(parse_rational("W").unwrap());
        let g = ProductGrid::new(GridSpec { nx: 5, ny: 5, nu: 7, nphi: 4, ..GridSpec::default() }).unwrap();
        let h = initial_metric(&LoopAlgebraElement::from_phases(&[0.0, 0.0], 1.0).unwrap(), &g).unwrap();
        let f = curvature_of_pair(&h, &e).unwrap();
        let interior: Vec<usize> = (0..g.len()).filter(|&k| f.samples()[k].is_some()).collect();
        let k = interior[node % interior.len()];
        let (ix, iy, iu, ip) = g.unindex(k);
        let (w, z) = (g.w(ix, iy), g.z(iu, ip));
        let s = f.samples()[k].as_ref().unwrap();
        let d1 = s.densities(w, z, None);
        let d2 = s.conjugate(&u, &u.adjoint()).densities(w, z, None);
        prop_assert!((d1.top - d2.top).abs() <= 1e-10 * d1.top.abs().max(1.0));
        prop_assert!((d1.full - d2.full).abs() <= 1e-10 * d1.full.abs().max(1.0));
    }

    #[test]
    fn laplacian_is_positive_semidefinite(seed in prop::collection::vec(-1.0f64..1.0, 2 * 5 * 5 * 5 * 4)) {
        let g = ProductGrid::new(GridSpec { nx: 5, ny: 5, nu: 5, nphi: 4, ..GridSpec::default() }).unwrap();
        let f: Vec<C64> = (0..g.len())
            .map(|i| {
                let (a, b, cc, _) = g.unindex(i);
                if g.is_boundary(a, b, cc) { c(0.0, 0.0) } else { c(seed[2 * i], seed[2 * i + 1]) }
            })
            .collect();
        let lf = laplacian_apply_scalar(&f, &g).unwrap();
        let q: f64 = (0..g.len())
            .map(|i| {
                let (a, b, cc, _) = g.unindex(i);
                (f[i].conj() * lf[i]).re * g.volume(a, b, cc)
            })
            .sum();
        prop_assert!(q >= -1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(6) })]

    #[test]
    fn degree_is_rotation_invariant(a in (0.5f64..1.5, -0.5f64..0.5), b in (-0.8f64..0.8, -0.8f64..0.8), alpha in 0.0f64..core::f64::consts::TAU) {
        let v = affine_blip(a, b);
        let quad = QuadSpec { n_polar: 64, n_azimuth: 48, tol: 1e-3 };
        let d0 = blip(v.clone()).degree(quad).unwrap().value;
        let d1 = blip(v.rotate(alpha)).degree(quad).unwrap().value;
        prop_assert!((d0 - d1).abs() <= 1e-3, "{d0} vs {d1}");
    }

    #[test]
    fn charge_matches_degree(a in (0.5f64..1.5, -0.5f64..0.5), b in (-0.8f64..0.8, -0.8f64..0.8)) {
        let e = blip(affine_blip(a, b));
        let quad = QuadSpec { n_polar: 64, n_azimuth: 48, tol: 1e-3 };
        let (q, d) = (charge(&e, quad).unwrap(), e.degree(quad).unwrap());
        prop_assert!((q.value - d.value).abs() <= 1e-8 + q.error + d.error, "{q:?} vs {d:?}");
        prop_assert!((q.value - 1.0).abs() <= 1e-2);
    }
}

#[test]
fn grid_energy_identity_improves_under_refinement() {
    // at phases 0 the discrete identity is exact, so use distinct phases
    let e = graded(&[1.0, 0.0, 0.5, 0.5], 0.25);
    let gap = |spec: GridSpec| {
        let g = ProductGrid::new(spec).unwrap();
        let h = initial_metric(&LoopAlgebraElement::from_phases(e.phases(), 1.0).unwrap(), &g).unwrap();
        let f = curvature_of_pair(&h, &e).unwrap();
        let (b, _) = hym_tensor(&h, &e).unwrap();
        energy_on_grid(&f, &b).unwrap().relative_gap()
    };
    let coarse = GridSpec { nx: 7, ny: 7, nu: 9, nphi: 4, ..GridSpec::default() };
    let (g0, g1) = (gap(coarse), gap(coarse.refined()));
    assert!(libm::log2(g0 / g1) >= 1.5, "{g0} -> {g1}");
}
