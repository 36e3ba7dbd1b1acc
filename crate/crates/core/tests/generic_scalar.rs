//! Smoke test of the f32 instantiation: every kernel is generic over the
//! scalar, and single precision must reproduce the geometry and the
//! energies at correspondingly loose tolerances. All documented accuracy
//! targets assume f64.

use std::sync::Arc;

use sll_core::energy::{grad_norm, grad_psi, phi, psi, Configuration};
use sll_core::geometry::{Resolution, SurfaceModel};
use sll_core::problem::{CurvatureField, ProblemData, SingularData};

fn sphere32() -> Arc<SurfaceModel<f32>> {
    Arc::new(SurfaceModel::unit_sphere(Resolution {
        n_u: 24,
        n_v: 48,
        degree: 23,
    }))
}

#[test]
fn f32_geometry_and_green() {
    let s = sphere32();
    let n = s.point_from_chart(0.0f32, 0.0);
    let sp = s.point_from_chart(0.0f32, std::f32::consts::PI);
    assert!((s.distance(&n, &sp) - std::f32::consts::PI).abs() < 1e-6);
    let g = s.green(&n, &sp).unwrap();
    assert!((g + 0.079_577_47).abs() < 1e-5);
    let total: f32 = s.quadrature().weights.iter().sum();
    assert!((total - 4.0 * std::f32::consts::PI).abs() < 1e-3);
}

#[test]
fn f32_energy_identities() {
    let s = sphere32();
    let p1 = s.point_from_chart(0.5f32, 0.5);
    let sing = SingularData::new(&s, vec![p1], vec![0.7f32]).unwrap();
    let data = ProblemData::new(s.clone(), CurvatureField::CosPolar, sing, 2).unwrap();
    let cfg = Configuration::assess(
        &data,
        vec![s.point_from_chart(1.2f32, 0.8), s.point_from_chart(2.8f32, 1.1)],
    );
    assert!(cfg.in_m_plus);
    let psi_v = psi(&data, &cfg).unwrap();
    let phi_v = phi(&data, &cfg).unwrap();
    let mut inter = 0.0f32;
    for j in 0..2 {
        for k in 0..2 {
            if j != k {
                inter += data
                    .surface()
                    .green(&cfg.points[j], &cfg.points[k])
                    .unwrap();
            }
        }
    }
    assert!((psi_v - phi_v - 2.0 * inter).abs() < 1e-4);
    let grad = grad_psi(&data, &cfg).unwrap();
    assert!(grad_norm(&grad).is_finite());
}
