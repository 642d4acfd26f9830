use super::charge::approx_curvature;
use super::*;
use crate::geometry::GridSpec;
use crate::holomap::{eta_from_blip, BlipMap, ParabolicMode};
use crate::hymflow::{hym_tensor, initial_metric, FlowConfig};
use crate::looporbit::LoopAlgebraElement;
use crate::matrixcore::{c, h_norm_sqr, ComplexMatrix};
use crate::quad::QuadSpec;
use crate::rational::parse_rational;
use alloc::vec;
use alloc::vec::Vec;

fn small_spec() -> GridSpec {
    GridSpec { nx: 7, ny: 7, nu: 9, nphi: 4, ..GridSpec::default() }
}

fn blip(v1: &str, phases: [f64; 2]) -> EtaField {
    let b = BlipMap {
        v: vec![parse_rational("1").unwrap(), parse_rational(v1).unwrap()],
        phases: phases.to_vec(),
        mu: 1.0,
    };
    eta_from_blip(&b, ParabolicMode::Permissive).unwrap()
}

/// `eta` with distinct phases `(1/4, -1/4)`, upper-triangular at `z = 0`; entries
/// are `d/dW` of functions smooth on the sphere.
fn graded() -> EtaField {
    let r = |t: &str| parse_rational(t).unwrap();
    let c0 = vec![r("0"), r("1 / (1 + w W)^2"), r("0"), r("0")];
    let c1 = vec![r("0.5 w / (1 + w W)^2"), r("0"), r("1 / (1 + w W)^2"), r("-0.5 w / (1 + w W)^2")];
    EtaField::new(2, vec![0.25, -0.25], 1.0, vec![c0, c1], ParabolicMode::Permissive).unwrap()
}

fn h_xi(e: &EtaField, g: &ProductGrid) -> HermitianMetricField {
    let xi = LoopAlgebraElement::from_phases(e.phases(), e.mu()).unwrap();
    initial_metric(&xi, g).unwrap()
}

fn coarse_quad() -> QuadSpec {
    QuadSpec { n_polar: 48, n_azimuth: 32, tol: 1e-4 }
}

/// `sup |F1 - F2|_H / sup |F2|_H` over shared nodes, with `H` from `f2`.
fn curvature_gap(f1: &CurvatureField, f2: &CurvatureField) -> f64 {
    let g = f2.grid();
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for k in 0..g.len() {
        let (Some(a), Some(b)) = (&f1.samples()[k], &f2.samples()[k]) else { continue };
        let (ix, iy, iu, ip) = g.unindex(k);
        let (w, z) = (g.w(ix, iy), g.z(iu, ip));
        let d = CurvatureSample {
            f_wbar_zbar: &a.f_wbar_zbar - &b.f_wbar_zbar,
            f_wz: &a.f_wz - &b.f_wz,
            f_wbar_w: &a.f_wbar_w - &b.f_wbar_w,
            f_zbar_z: &a.f_zbar_z - &b.f_zbar_z,
            f_w_zbar: &a.f_w_zbar - &b.f_w_zbar,
            f_wbar_z: &a.f_wbar_z - &b.f_wbar_z,
        };
        diff = diff.max(d.densities(w, z, f2.metric_at(k)).full);
        scale = scale.max(b.densities(w, z, f2.metric_at(k)).full);
    }
    libm::sqrt(diff / scale)
}

/// Analytic curvature of the approximate connection at every interior node.
fn analytic_field(e: &EtaField, g: &ProductGrid) -> CurvatureField {
    let mut samples = vec![None; g.len()];
    for (k, slot) in samples.iter_mut().enumerate() {
        let (ix, iy, iu, ip) = g.unindex(k);
        if !g.is_boundary(ix, iy, iu) {
            let smp = e.sample(g.w(ix, iy)).unwrap();
            *slot = Some(approx_curvature(e.phases(), &smp, g.z(iu, ip)));
        }
    }
    CurvatureField::from_parts(g.clone(), Some(h_xi(e, g).values().to_vec()), samples)
}

#[test]
fn zero_eta_gives_diagonal_connection() {
    let g = ProductGrid::new(small_spec()).unwrap();
    let a = [0.3, -0.3];
    let e = EtaField::zero(2, a.to_vec(), 1.0).unwrap();
    let conn = approx_connection(&e, &g).unwrap();
    for (k, v) in conn.values().iter().enumerate() {
        let (_, _, iu, ip) = g.unindex(k);
        let z = g.z(iu, ip);
        assert_eq!(v.a_w.max_abs(), 0.0);
        assert_eq!(v.a_wbar.max_abs(), 0.0);
        assert_eq!(v.a_zbar.max_abs(), 0.0);
        assert!((v.a_z[(0, 0)] - c(0.3, 0.0) / z).norm() < 1e-15 / z.norm());
    }
    let smp = e.sample(c(0.4, -0.2)).unwrap();
    assert_eq!(approx_curvature(&a, &smp, c(0.1, 0.2)).max_abs(), 0.0);
}

#[test]
fn pair_connection_matches_approximate_one_on_h_xi() {
    // phases 0: H_xi = I, so difference quotients are exact
    let g = ProductGrid::new(small_spec()).unwrap();
    let e = blip("W", [0.0, 0.0]);
    let h = h_xi(&e, &g);
    let p = connection_from_pair(&h, &e).unwrap();
    let q = approx_connection(&e, &g).unwrap();
    for (x, y) in p.values().iter().zip(q.values()) {
        for (m1, m2) in [(&x.a_w, &y.a_w), (&x.a_wbar, &y.a_wbar), (&x.a_z, &y.a_z), (&x.a_zbar, &y.a_zbar)] {
            assert!((m1 - m2).max_abs() <= 1e-12);
        }
    }
}

#[test]
fn pair_connection_converges_to_approximate_one() {
    let e = graded();
    let gap = |spec: GridSpec| {
        let g = ProductGrid::new(spec).unwrap();
        let p = connection_from_pair(&h_xi(&e, &g), &e).unwrap();
        let q = approx_connection(&e, &g).unwrap();
        p.values()
            .iter()
            .zip(q.values())
            .map(|(x, y)| (&x.a_z - &y.a_z).max_abs() + (&x.a_w - &y.a_w).max_abs())
            .fold(0.0, f64::max)
    };
    let coarse = gap(small_spec());
    let fine = gap(small_spec().refined());
    let order = libm::log2(coarse / fine);
    assert!(order > 1.8, "order {order}");
}

#[test]
fn discrete_curvature_converges_to_analytic() {
    let e = graded();
    let gaps: Vec<f64> = [small_spec(), small_spec().refined()]
        .iter()
        .map(|&spec| {
            let g = ProductGrid::new(spec).unwrap();
            let oracle = analytic_field(&e, &g);
            let direct = curvature(&approx_connection(&e, &g).unwrap()).unwrap();
            let pair = curvature_of_pair(&h_xi(&e, &g), &e).unwrap();
            curvature_gap(&direct, &oracle).max(curvature_gap(&pair, &oracle))
        })
        .collect();
    let order = libm::log2(gaps[0] / gaps[1]);
    assert!(order > 1.8, "gaps {gaps:?}");
}

#[test]
fn densities_are_gauge_invariant() {
    let e = graded();
    let (w, z) = (c(0.3, -0.7), c(0.2, 0.35));
    let smp = e.sample(w).unwrap();
    let f = approx_curvature(e.phases(), &smp, z);
    let h = ComplexMatrix::from_real_diag(&[libm::pow(z.norm(), 0.5), libm::pow(z.norm(), -0.5)]);
    let gm = ComplexMatrix::from_fn(2, |i, j| if i == j { c(1.5, 0.2 * i as f64) } else { c(0.3, -0.4 + j as f64) });
    let g_inv = gm.inverse().unwrap();
    // H' = g^{-*} H g^{-1} keeps |.|_H invariant under F -> g F g^{-1}
    let h2 = &(&g_inv.adjoint() * &h) * &g_inv;
    let d1 = f.densities(w, z, Some(&h));
    let d2 = f.conjugate(&gm, &g_inv).densities(w, z, Some(&h2));
    for (x, y) in [(d1.full, d2.full), (d1.plus, d2.plus), (d1.top, d2.top)] {
        assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{x} vs {y}");
    }
    assert!(d1.full >= d1.plus && d1.full > 0.0);
    // |F|^2 = 2|F+|^2 + top pointwise
    assert!((d1.full - 2.0 * d1.plus - d1.top).abs() <= 1e-10 * d1.full);
}

#[test]
fn self_dual_part_matches_tensor() {
    // |F+| = |B| / (2 sqrt 2) wherever F_wz = F_wbar_zbar = 0; the gap is discretization
    let e = graded();
    let gap = |spec: GridSpec| {
        let g = ProductGrid::new(spec).unwrap();
        let h = h_xi(&e, &g);
        let f = curvature_of_pair(&h, &e).unwrap();
        let (b, _) = hym_tensor(&h, &e).unwrap();
        let energy = energy_on_grid(&f, &b).unwrap();
        assert!(energy.plus_tensor > 0.0);
        let (mut worst, mut sup) = (0.0f64, 0.0f64);
        for (k, bk) in b.iter().enumerate() {
            if let Some(d) = f.densities(k) {
                let hk = f.metric_at(k).unwrap();
                let nb = libm::sqrt(h_norm_sqr(&hk.inverse().unwrap(), hk, bk).max(0.0) / 8.0);
                worst = worst.max((libm::sqrt(d.plus) - nb).abs());
                sup = sup.max(nb);
            }
        }
        (worst / sup, (energy.plus_curvature - energy.plus_tensor).abs() / energy.plus_tensor)
    };
    let (p0, i0) = gap(small_spec());
    let (p1, i1) = gap(small_spec().refined());
    assert!(libm::log2(p0 / p1) > 1.5, "pointwise {p0} -> {p1}");
    assert!(i1 < i0 && i1 < 0.05, "integrated {i0} -> {i1}");
}

#[test]
fn charge_equals_degree_for_blips() {
    for (v, k) in [("W", 1.0), ("W^2", 2.0)] {
        let e = blip(v, [0.0, 0.0]);
        let q = charge(&e, QuadSpec::default()).unwrap().value;
        let d = e.degree(QuadSpec::default()).unwrap().value;
        assert!((q - k).abs() < 1e-2, "charge {q}");
        assert!((q - d).abs() < 2e-2, "charge {q} degree {d}");
    }
    let zero = EtaField::zero(2, vec![0.25, -0.25], 1.0).unwrap();
    assert_eq!(charge(&zero, coarse_quad()).unwrap().value, 0.0);
}

#[test]
fn approximate_connection_satisfies_energy_identity() {
    let e = graded();
    let id = initial_energy_identity(&e, QuadSpec { n_polar: 16, n_azimuth: 16, tol: 1e-6 }).unwrap();
    assert!(id.full.value > 0.0);
    assert!(id.relative_gap() < 1e-8, "{id:?}");
    // int tr(F ^ F) = 8 pi^2 k with k from the boundary contour
    let top_charge = id.top.value / (8.0 * core::f64::consts::PI * core::f64::consts::PI);
    assert!((top_charge - id.charge.value).abs() < 1e-8, "top {top_charge} charge {}", id.charge.value);
}

#[test]
fn radial_gauge_reproduces_metric() {
    let spec = small_spec();
    let g = ProductGrid::new(spec).unwrap();
    let e = graded();
    let conn = approx_connection(&e, &g).unwrap();
    let gauge = radial_transport(&conn).unwrap();
    let Frame::Holomorphic(h) = conn.frame() else { unreachable!() };
    for (gk, hk) in gauge.iter().zip(h) {
        assert!((&(&gk.adjoint() * gk) - hk).max_abs() <= 1e-12 * hk.max_abs());
    }
}

#[test]
fn radial_gauge_converges_on_a_perturbed_metric() {
    let e = EtaField::zero(2, vec![0.0, 0.0], 1.0).unwrap();
    let gap = |spec: GridSpec| {
        let g = ProductGrid::new(spec).unwrap();
        let mut h = h_xi(&e, &g);
        for k in 0..g.len() {
            let (_, _, iu, ip) = g.unindex(k);
            let t = 0.3 * libm::sin(g.u(iu)) * (1.0 + 0.5 * libm::cos(g.phi(ip)));
            h.values_mut()[k] = ComplexMatrix::from_fn(2, |i, j| match (i, j) {
                (0, 0) => c(1.0 + t * t, 0.0),
                (1, 1) => c(1.0, 0.0),
                (0, 1) => c(0.0, t),
                _ => c(0.0, -t),
            });
        }
        let conn = connection_from_pair(&h, &e).unwrap();
        let gauge = radial_transport(&conn).unwrap();
        gauge.iter().zip(h.values()).map(|(gk, hk)| (&(&gk.adjoint() * gk) - hk).max_abs()).fold(0.0, f64::max)
    };
    let coarse = gap(small_spec());
    let fine = gap(small_spec().refined());
    assert!(fine < coarse && libm::log2(coarse / fine) > 1.5, "{coarse} {fine}");
}

#[test]
fn zero_eta_caloron_has_constant_higgs_field() {
    let g = ProductGrid::new(small_spec()).unwrap();
    let a = [0.3, -0.3];
    let e = EtaField::zero(2, a.to_vec(), 1.0).unwrap();
    let xi0 = ComplexMatrix::from_diag(&[c(0.0, -0.3), c(0.0, 0.3)]);
    let cal = caloron_fields(&approx_connection(&e, &g).unwrap(), &xi0, 1.0, None).unwrap();
    assert!(!cal.phi.is_empty());
    for (phi, a) in cal.phi.iter().zip(&cal.a) {
        assert!((phi - &xi0).max_abs() <= 1e-12);
        assert!(a.iter().all(|m| m.max_abs() <= 1e-12));
    }
    assert!(cal.phi_anti_hermitian_defect() <= 1e-12);
    let rep = decay_report(&cal).unwrap();
    assert!(rep.higgs_deviation.max_value <= 1e-12 && rep.connection.max_value <= 1e-12);
}

#[test]
fn caloron_rejects_boundary_nodes_and_narrow_ranges() {
    let g = ProductGrid::new(small_spec()).unwrap();
    let e = EtaField::zero(2, vec![0.0, 0.0], 1.0).unwrap();
    let conn = approx_connection(&e, &g).unwrap();
    let xi0 = ComplexMatrix::zeros(2);
    assert!(caloron_fields(&conn, &xi0, 1.0, Some(&[g.index(0, 3, 3, 0)])).is_err());
    assert!(caloron_fields(&conn, &xi0, 0.0, None).is_err());
    let one_row = caloron_fields(&conn, &xi0, 1.0, Some(&[g.index(3, 3, 4, 0), g.index(3, 3, 4, 1)])).unwrap();
    assert!(matches!(decay_report(&one_row), Err(crate::Error::InvalidInput(_))));
}

#[test]
fn zero_shift_probe_agrees_exactly() {
    let g = ProductGrid::new(small_spec()).unwrap();
    let e = blip("W", [0.0, 0.0]);
    let cfg = FlowConfig { t_max: 0.5, ..FlowConfig::default() };
    let p = shift_equivalence_probe(&e, &[0, 0], &g, cfg).unwrap();
    assert_eq!(p.top_discrepancy, 0.0);
    assert_eq!(p.energy_discrepancy, 0.0);
}

#[test]
fn connection_field_validates_sizes() {
    let g = ProductGrid::new(small_spec()).unwrap();
    let vals = vec![ConnectionSample::zero(2); g.len() - 1];
    assert!(ConnectionField::new(g.clone(), Frame::Unitary, vals).is_err());
    let e = blip("W", [0.0, 0.0]);
    let h1 = initial_metric(&LoopAlgebraElement::zero(3, 1.0).unwrap(), &g).unwrap();
    assert!(matches!(connection_from_pair(&h1, &e), Err(crate::Error::DimensionMismatch { .. })));
}

#[test]
fn inequivalent_blips_have_distinct_densities() {
    let g = ProductGrid::new(small_spec()).unwrap();
    let (e1, e2) = (blip("W", [0.0, 0.0]), blip("2 W", [0.0, 0.0]));
    let f1 = curvature_of_pair(&h_xi(&e1, &g), &e1).unwrap();
    let f2 = curvature_of_pair(&h_xi(&e2, &g), &e2).unwrap();
    let (top, full) = density_discrepancy(&f1, &f2);
    assert!(top > 0.1 && full > 0.1, "{top} {full}");
    assert_eq!(density_discrepancy(&f1, &f1), (0.0, 0.0));
}
