//! The reduced point-configuration energies and the sign functional:
//!
//!   Ψ(ξ) = Σ_j h(ξ_j,ξ_j) + (1/4π) Σ_j log K̃(ξ_j) + Σ_{j≠k} G(ξ_j,ξ_k)
//!   Φ(ξ) = same smooth part with the interaction sum flipped in sign
//!   D_s(ξ) = Σ_j h(ξ_j,ξ_j) + (1/4π) Σ_j f_g(ξ_j) - Σ_i s_i Σ_j G(ξ_j,p_i)
//!            + Σ_{j≠k} G(ξ_j,ξ_k)
//!   𝒜(ξ) = 4π Σ_j K̃(ξ_j) e^{8π h(ξ_j,ξ_j) + 8π Σ_{k≠j} G(ξ_j,ξ_k)}
//!            [Δ_g log K(ξ_j) + (8πN - 4πχ(Σ,α))/|Σ|]
//!
//! log K̃ is expanded as log K + f_g - 4π Σ_i α_i G(·,p_i), so Ψ carries
//! the singular sources explicitly. First derivatives are assembled from
//! the analytic gradients of K, G and f_g; the Hessian is a central
//! difference of the analytic gradient in parallel-transported frames.

use serde::Serialize;

use crate::error::EnergyError;
use crate::geometry::{SurfacePoint, TangentVec};
use crate::linalg::SmallMatrix;
use crate::problem::ProblemData;
use crate::scalar::{r64, Real};

/// Distance guard for the open-domain conditions: configurations closer
/// than this to a source or a collision are treated as boundary.
const DOMAIN_GUARD: f64 = 1e-12;

/// An N-tuple of points with its domain flags.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "R: Serialize"))]
pub struct Configuration<R> {
    pub points: Vec<SurfacePoint<R>>,
    /// All points in Σ⁺ \ {p_1..p_ℓ} and pairwise distinct.
    pub in_m_plus: bool,
    /// All points in Σ \ {p_1..p_m} and pairwise distinct.
    pub in_m: bool,
    pub min_pair_dist: R,
    pub min_source_dist: R,
}

impl<R: Real> Configuration<R> {
    /// Assess the domain flags of an N-tuple for the given problem.
    pub fn assess(data: &ProblemData<R>, points: Vec<SurfacePoint<R>>) -> Self {
        let model = data.surface();
        let guard = r64::<R>(DOMAIN_GUARD);
        let mut min_pair = R::infinity();
        for j in 0..points.len() {
            for k in (j + 1)..points.len() {
                min_pair = min_pair.min(model.distance(&points[j], &points[k]));
            }
        }
        let mut min_source = R::infinity();
        let mut min_source_plus = R::infinity();
        for (i, p) in data.singular().points().iter().enumerate() {
            for x in &points {
                let d = model.distance(x, p);
                min_source = min_source.min(d);
                if i < data.ell() {
                    min_source_plus = min_source_plus.min(d);
                }
            }
        }
        let all_positive = points
            .iter()
            .all(|x| data.curvature().value(model, x) > R::zero());
        let distinct = min_pair > guard;
        let in_m = distinct && min_source > guard;
        let in_m_plus = all_positive && distinct && min_source_plus > guard;
        Configuration {
            points,
            in_m_plus,
            in_m,
            min_pair_dist: min_pair,
            min_source_dist: min_source,
        }
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }
}

/// Everything the energy evaluation produces for one configuration.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "R: Serialize"))]
pub struct EnergyReport<R> {
    pub psi: R,
    pub phi: R,
    pub a_value: R,
    pub grad: Vec<TangentVec<R>>,
    pub grad_norm: R,
    pub hessian_spectrum: Vec<R>,
}

/// Shared term sums: Ψ and Φ differ only in the sign of `interaction`.
struct Terms<R> {
    h_diag: R,
    log_k: R,
    f_g: R,
    source: R,
    interaction: R,
}

fn terms<R: Real>(data: &ProblemData<R>, cfg: &Configuration<R>) -> Result<Terms<R>, EnergyError> {
    require_m_plus(cfg)?;
    let model = data.surface();
    let mut h_diag = R::zero();
    let mut log_k = R::zero();
    let mut f_g = R::zero();
    for x in &cfg.points {
        h_diag += model.green_regular(x, x);
        log_k += data.curvature().value(model, x).ln();
        f_g += data.f_g_at(x);
    }
    let quarter = R::four_pi().recip();
    let mut source = R::zero();
    for (p, &alpha) in data.singular().points().iter().zip(data.singular().orders()) {
        for x in &cfg.points {
            let g = model.green(x, p).map_err(|e| EnergyError::OutOfDomain {
                reason: format!("configuration touches a singular source: {e}"),
            })?;
            source += alpha * g;
        }
    }
    let interaction = pair_interaction(data, cfg)?;
    Ok(Terms {
        h_diag,
        log_k: log_k * quarter,
        f_g: f_g * quarter,
        source,
        interaction,
    })
}

/// Σ_{j≠k} G(ξ_j, ξ_k) (each unordered pair twice).
pub fn pair_interaction<R: Real>(
    data: &ProblemData<R>,
    cfg: &Configuration<R>,
) -> Result<R, EnergyError> {
    let model = data.surface();
    let mut acc = R::zero();
    for j in 0..cfg.points.len() {
        for k in (j + 1)..cfg.points.len() {
            let g = model
                .green(&cfg.points[j], &cfg.points[k])
                .map_err(|e| EnergyError::OutOfDomain {
                    reason: format!("colliding pair ({j}, {k}): {e}"),
                })?;
            acc += g + g;
        }
    }
    Ok(acc)
}

fn require_m_plus<R: Real>(cfg: &Configuration<R>) -> Result<(), EnergyError> {
    if cfg.in_m_plus {
        Ok(())
    } else {
        Err(EnergyError::OutOfDomain {
            reason: format!(
                "configuration not in the admissible set (min pair distance {:e}, min source distance {:e})",
                cfg.min_pair_dist.to_f64().unwrap_or(f64::NAN),
                cfg.min_source_dist.to_f64().unwrap_or(f64::NAN)
            ),
        })
    }
}

fn require_m<R: Real>(cfg: &Configuration<R>) -> Result<(), EnergyError> {
    if cfg.in_m {
        Ok(())
    } else {
        Err(EnergyError::OutOfDomain {
            reason: format!(
                "configuration not in the punctured product (min pair distance {:e}, min source distance {:e})",
                cfg.min_pair_dist.to_f64().unwrap_or(f64::NAN),
                cfg.min_source_dist.to_f64().unwrap_or(f64::NAN)
            ),
        })
    }
}

/// The reduced energy Ψ.
pub fn psi<R: Real>(data: &ProblemData<R>, cfg: &Configuration<R>) -> Result<R, EnergyError> {
    let t = terms(data, cfg)?;
    Ok(t.h_diag + t.log_k + t.f_g - t.source + t.interaction)
}

/// The barrier functional Φ (interaction sum flipped).
pub fn phi<R: Real>(data: &ProblemData<R>, cfg: &Configuration<R>) -> Result<R, EnergyError> {
    let t = terms(data, cfg)?;
    Ok(t.h_diag + t.log_k + t.f_g - t.source - t.interaction)
}

/// D_s with one weight per singular source; the box constraint is the
/// caller's (α_*, α^*) if supplied.
pub fn d_s<R: Real>(
    data: &ProblemData<R>,
    cfg: &Configuration<R>,
    weights: &[R],
    s_box: Option<(R, R)>,
) -> Result<R, EnergyError> {
    require_m(cfg)?;
    assert_eq!(
        weights.len(),
        data.singular().len(),
        "one weight per singular source"
    );
    if let Some((lo, hi)) = s_box {
        for (i, &s) in weights.iter().enumerate() {
            if s < lo || s > hi {
                return Err(EnergyError::SOutOfBox {
                    index: i,
                    value: s.to_f64().unwrap_or(f64::NAN),
                    lo: lo.to_f64().unwrap_or(f64::NAN),
                    hi: hi.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    let model = data.surface();
    let mut acc = R::zero();
    for x in &cfg.points {
        acc += model.green_regular(x, x);
        acc += data.f_g_at(x) / R::four_pi();
    }
    for (i, p) in data.singular().points().iter().enumerate() {
        let mut g_sum = R::zero();
        for x in &cfg.points {
            g_sum += model.green(x, p).map_err(|e| EnergyError::OutOfDomain {
                reason: format!("configuration touches source {i}: {e}"),
            })?;
        }
        acc -= weights[i] * g_sum;
    }
    acc += pair_interaction(data, cfg)?;
    Ok(acc)
}

/// The sign functional 𝒜.
pub fn a_fun<R: Real>(data: &ProblemData<R>, cfg: &Configuration<R>) -> Result<R, EnergyError> {
    require_m_plus(cfg)?;
    let model = data.surface();
    let eight_pi = r64::<R>(2.0) * R::four_pi();
    let drift = (eight_pi * r64::<R>(data.n_points() as f64) - data.rho_geo()) / model.area();
    let mut acc = R::zero();
    for (j, x) in cfg.points.iter().enumerate() {
        let k_tilde = data.k_tilde(x).map_err(|e| EnergyError::OutOfDomain {
            reason: e.to_string(),
        })?;
        let mut g_sum = R::zero();
        for (k, y) in cfg.points.iter().enumerate() {
            if k != j {
                g_sum += model.green(x, y).map_err(|e| EnergyError::OutOfDomain {
                    reason: format!("colliding pair ({j}, {k}): {e}"),
                })?;
            }
        }
        let weight = (eight_pi * model.green_regular(x, x) + eight_pi * g_sum).exp();
        let bracket = data.curvature().log_laplacian(model, x) + drift;
        acc += k_tilde * weight * bracket;
    }
    Ok(R::four_pi() * acc)
}

/// Riemannian gradient of Ψ, one tangent vector per configuration point.
///
/// The diagonal regular part h(ξ,ξ) is constant on both built-in surfaces
/// and contributes nothing.
pub fn grad_psi<R: Real>(
    data: &ProblemData<R>,
    cfg: &Configuration<R>,
) -> Result<Vec<TangentVec<R>>, EnergyError> {
    require_m_plus(cfg)?;
    let model = data.surface();
    let quarter = R::four_pi().recip();
    let mut out = Vec::with_capacity(cfg.points.len());
    for (j, x) in cfg.points.iter().enumerate() {
        let jet = data.curvature().jet(model, x);
        let mut g = jet.gradient.scale(quarter / jet.value);
        if !data.f_g().max_abs().is_zero() {
            g = g.add(&data.f_g().gradient_at(model, x).scale(quarter));
        }
        for (p, &alpha) in data
            .singular()
            .points()
            .iter()
            .zip(data.singular().orders())
        {
            let gg = model.grad_green(x, p).map_err(|e| EnergyError::OutOfDomain {
                reason: format!("configuration touches a singular source: {e}"),
            })?;
            g = g.add(&gg.scale(-alpha));
        }
        for (k, y) in cfg.points.iter().enumerate() {
            if k != j {
                let gg = model.grad_green(x, y).map_err(|e| EnergyError::OutOfDomain {
                    reason: format!("colliding pair ({j}, {k}): {e}"),
                })?;
                g = g.add(&gg.scale(r64(2.0)));
            }
        }
        out.push(g);
    }
    Ok(out)
}

pub fn grad_norm<R: Real>(grad: &[TangentVec<R>]) -> R {
    grad.iter().map(|g| g.dot(g)).sum::<R>().sqrt()
}

/// Hessian of Ψ in the orthonormal frames at each point: analytic first
/// derivatives, central finite differences (step 1e-5) of the gradient,
/// with the perturbed-point gradient parallel-transported back to the
/// base point before projecting on the frame.
pub fn hessian_psi<R: Real>(
    data: &ProblemData<R>,
    cfg: &Configuration<R>,
) -> Result<SmallMatrix<R>, EnergyError> {
    let frames: Vec<[TangentVec<R>; 2]> = cfg
        .points
        .iter()
        .map(|x| data.surface().frame(x))
        .collect();
    hessian_psi_in_frames(data, cfg, &frames)
}

/// Hessian in caller-provided frames (spectrum must be frame-invariant).
pub fn hessian_psi_in_frames<R: Real>(
    data: &ProblemData<R>,
    cfg: &Configuration<R>,
    frames: &[[TangentVec<R>; 2]],
) -> Result<SmallMatrix<R>, EnergyError> {
    require_m_plus(cfg)?;
    let model = data.surface();
    let n = cfg.points.len();
    let step = r64::<R>(1e-5);
    let mut h = SmallMatrix::zeros(2 * n);
    for j in 0..n {
        for a in 0..2 {
            let dir = &frames[j][a];
            let mut grads = [Vec::new(), Vec::new()];
            for (side, sign) in [(0usize, R::one()), (1usize, -R::one())] {
                let moved = model
                    .exp_map(&cfg.points[j], &dir.scale(sign * step))
                    .expect("hessian step is far below the injectivity radius");
                let mut pts = cfg.points.clone();
                pts[j] = moved;
                let pcfg = Configuration::assess(data, pts);
                let mut grad = grad_psi(data, &pcfg)?;
                // Transport the j-th component back to the base point.
                grad[j] = model.parallel_transport(&moved, &cfg.points[j], &grad[j]);
                grads[side] = grad;
            }
            for k in 0..n {
                for b in 0..2 {
                    let gplus = grads[0][k].dot(&frames[k][b]);
                    let gminus = grads[1][k].dot(&frames[k][b]);
                    h.set(2 * k + b, 2 * j + a, (gplus - gminus) / (step + step));
                }
            }
        }
    }
    Ok(h.symmetrized())
}

/// Full evaluation bundle.
pub fn energy_report<R: Real>(
    data: &ProblemData<R>,
    cfg: &Configuration<R>,
) -> Result<EnergyReport<R>, EnergyError> {
    let grad = grad_psi(data, cfg)?;
    let spectrum = crate::linalg::symmetric_eigenvalues(&hessian_psi(data, cfg)?);
    Ok(EnergyReport {
        psi: psi(data, cfg)?,
        phi: phi(data, cfg)?,
        a_value: a_fun(data, cfg)?,
        grad_norm: grad_norm(&grad),
        grad,
        hessian_spectrum: spectrum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Resolution, SurfaceModel};
    use crate::problem::{CurvatureField, SingularData};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn sphere() -> Arc<SurfaceModel<f64>> {
        Arc::new(SurfaceModel::unit_sphere(Resolution {
            n_u: 48,
            n_v: 96,
            degree: 47,
        }))
    }

    fn random_sphere_point(rng: &mut ChaCha8Rng, s: &SurfaceModel<f64>) -> SurfacePoint<f64> {
        let lon = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
        let z: f64 = rng.gen_range(-1.0..1.0);
        s.point_from_chart(lon, z.acos())
    }

    /// Rejection-sample a well-separated admissible configuration.
    fn sample_config(
        data: &ProblemData<f64>,
        rng: &mut ChaCha8Rng,
        n: usize,
        sep: f64,
    ) -> Configuration<f64> {
        loop {
            let pts: Vec<_> = (0..n).map(|_| random_sphere_point(rng, data.surface())).collect();
            let cfg = Configuration::assess(data, pts);
            if cfg.in_m_plus && cfg.min_pair_dist > sep && cfg.min_source_dist > sep {
                return cfg;
            }
        }
    }

    fn cos_data(n: usize) -> ProblemData<f64> {
        let s = sphere();
        let p1 = s.point_from_chart(0.5, 0.5);
        let p2 = s.point_from_chart(2.2, 2.7);
        let sing = SingularData::new(&s, vec![p1, p2], vec![0.7, -0.4]).unwrap();
        ProblemData::new(s, CurvatureField::CosPolar, sing, n).unwrap()
    }

    #[test]
    fn constant_k_psi_value() {
        // m=0, N=1, K ≡ e: Ψ = c₀ + 1/4π everywhere.
        let s = sphere();
        let data = ProblemData::new(
            s,
            CurvatureField::Constant(std::f64::consts::E),
            SingularData::empty(),
            1,
        )
        .unwrap();
        let expect = crate::green::sphere_c0::<f64>() + 1.0 / (4.0 * std::f64::consts::PI);
        for (lon, colat) in [(0.3, 0.9), (2.0, 2.0), (5.5, 1.3)] {
            let cfg = Configuration::assess(&data, vec![data.surface().point_from_chart(lon, colat)]);
            assert!((psi(&data, &cfg).unwrap() - expect).abs() < 1e-14);
            // N=1: Φ = Ψ.
            assert_eq!(psi(&data, &cfg).unwrap(), phi(&data, &cfg).unwrap());
        }
    }

    #[test]
    fn permutation_invariance() {
        let data = cos_data(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = sample_config(&data, &mut rng, 3, 0.05);
        let v = psi(&data, &cfg).unwrap();
        let mut pts = cfg.points.clone();
        pts.swap(0, 2);
        pts.swap(1, 2);
        let permuted = Configuration::assess(&data, pts);
        assert!((psi(&data, &permuted).unwrap() - v).abs() < 1e-13);
    }

    #[test]
    fn psi_minus_phi_equals_twice_interaction() {
        let data = cos_data(3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let cfg = sample_config(&data, &mut rng, 3, 0.02);
            // Independent interaction sum straight from the Green function.
            let mut inter = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    if j != k {
                        inter += data
                            .surface()
                            .green(&cfg.points[j], &cfg.points[k])
                            .unwrap();
                    }
                }
            }
            let lhs = psi(&data, &cfg).unwrap() - phi(&data, &cfg).unwrap();
            let scale = lhs.abs().max(1.0);
            assert!((lhs - 2.0 * inter).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn psi_equals_d_alpha_plus_log_term() {
        let data = cos_data(2);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let cfg = sample_config(&data, &mut rng, 2, 0.02);
            let alpha = data.singular().orders().to_vec();
            let d = d_s(&data, &cfg, &alpha, None).unwrap();
            let logk: f64 = cfg
                .points
                .iter()
                .map(|x| data.curvature().value(data.surface(), x).ln())
                .sum::<f64>()
                / (4.0 * std::f64::consts::PI);
            let p = psi(&data, &cfg).unwrap();
            assert!((p - d - logk).abs() < 1e-12 * p.abs().max(1.0));
        }
    }

    #[test]
    fn d_s_affine_monotone_in_weights() {
        let data = cos_data(2);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cfg = sample_config(&data, &mut rng, 2, 0.05);
        // Coefficient of s_i is -Σ_j G(ξ_j, p_i): check affinity exactly.
        let base = d_s(&data, &cfg, &[0.0, 0.0], None).unwrap();
        let d10 = d_s(&data, &cfg, &[1.0, 0.0], None).unwrap();
        let d01 = d_s(&data, &cfg, &[0.0, 1.0], None).unwrap();
        let d11 = d_s(&data, &cfg, &[1.0, 1.0], None).unwrap();
        assert!((d11 - (d10 + d01 - base)).abs() < 1e-12);
        let mut g_sum = 0.0;
        for x in &cfg.points {
            g_sum += data
                .surface()
                .green(x, &data.singular().points()[0])
                .unwrap();
        }
        assert!(((d10 - base) + g_sum).abs() < 1e-13);
        // Box enforcement.
        assert!(matches!(
            d_s(&data, &cfg, &[3.0, 0.0], Some((-1.0, 2.0))),
            Err(EnergyError::SOutOfBox { index: 0, .. })
        ));
    }

    #[test]
    fn m_zero_d_s_weightless() {
        let s = sphere();
        let data = ProblemData::new(
            s,
            CurvatureField::Constant(1.0),
            SingularData::empty(),
            2,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let cfg = sample_config(&data, &mut rng, 2, 0.1);
        let v = d_s(&data, &cfg, &[], None).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn out_of_domain_rejected() {
        let data = cos_data(2);
        // A point in the negative region.
        let bad = Configuration::assess(
            &data,
            vec![
                data.surface().point_from_chart(0.1, 2.8),
                data.surface().point_from_chart(0.4, 0.4),
            ],
        );
        assert!(!bad.in_m_plus);
        assert!(matches!(
            psi(&data, &bad),
            Err(EnergyError::OutOfDomain { .. })
        ));
        // But D_s is fine on ℳ.
        assert!(bad.in_m);
        assert!(d_s(&data, &bad, &[0.1, 0.2], None).is_ok());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = cos_data(2);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = 1e-5;
        for _ in 0..10 {
            let cfg = sample_config(&data, &mut rng, 2, 0.08);
            let grad = grad_psi(&data, &cfg).unwrap();
            for j in 0..2 {
                for e in data.surface().frame(&cfg.points[j]) {
                    let mut plus = cfg.points.clone();
                    plus[j] = data
                        .surface()
                        .exp_map(&cfg.points[j], &e.scale(h))
                        .unwrap();
                    let mut minus = cfg.points.clone();
                    minus[j] = data
                        .surface()
                        .exp_map(&cfg.points[j], &e.scale(-h))
                        .unwrap();
                    let fp = psi(&data, &Configuration::assess(&data, plus)).unwrap();
                    let fm = psi(&data, &Configuration::assess(&data, minus)).unwrap();
                    let fd = (fp - fm) / (2.0 * h);
                    let an = grad[j].dot(&e);
                    assert!(
                        (an - fd).abs() < 1e-6 * (1.0 + fd.abs()),
                        "fd {fd} vs analytic {an}"
                    );
                }
            }
        }
    }

    #[test]
    fn constant_k_single_point_gradient_vanishes() {
        let s = sphere();
        let data = ProblemData::new(
            s,
            CurvatureField::Constant(2.0),
            SingularData::empty(),
            1,
        )
        .unwrap();
        let cfg = Configuration::assess(&data, vec![data.surface().point_from_chart(1.0, 1.3)]);
        let g = grad_psi(&data, &cfg).unwrap();
        assert!(grad_norm(&g) < 1e-14, "Ψ is constant so ∇Ψ ≡ 0");
    }

    #[test]
    fn gradient_equivariant_under_data_isometry() {
        // Axial K and axial sources: rotation about the z-axis fixes the
        // data, so the gradient norm is invariant along the orbit.
        let s = sphere();
        let north = s.point_from_chart(0.0, 0.0);
        let sing = SingularData::new(&s, vec![north], vec![0.8]).unwrap();
        let data = ProblemData::new(s, CurvatureField::CosPolar, sing, 2).unwrap();
        let mk = |rot: f64| {
            Configuration::assess(
                &data,
                vec![
                    data.surface().point_from_chart(0.4 + rot, 0.9),
                    data.surface().point_from_chart(2.0 + rot, 1.2),
                ],
            )
        };
        let g0 = grad_norm(&grad_psi(&data, &mk(0.0)).unwrap());
        let g1 = grad_norm(&grad_psi(&data, &mk(1.234)).unwrap());
        assert!((g0 - g1).abs() < 1e-10);
    }

    #[test]
    fn hessian_spectrum_frame_invariant() {
        let data = cos_data(2);
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let cfg = sample_config(&data, &mut rng, 2, 0.1);
        let s1 = crate::linalg::symmetric_eigenvalues(&hessian_psi(&data, &cfg).unwrap());
        // Random rotation of each frame.
        let frames: Vec<[TangentVec<f64>; 2]> = cfg
            .points
            .iter()
            .map(|x| {
                let [e1, e2] = data.surface().frame(x);
                let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                [
                    e1.scale(t.cos()).add(&e2.scale(t.sin())),
                    e1.scale(-t.sin()).add(&e2.scale(t.cos())),
                ]
            })
            .collect();
        let s2 = crate::linalg::symmetric_eigenvalues(
            &hessian_psi_in_frames(&data, &cfg, &frames).unwrap(),
        );
        for (a, b) in s1.iter().zip(&s2) {
            assert!((a - b).abs() < 1e-8, "spectrum moved: {a} vs {b}");
        }
    }

    #[test]
    fn a_fun_negative_under_concavity_regime() {
        // Remark-style certificate: sup Δ log K ≤ -β and χ(Σ,α) > 2N - β|Σ|/4π
        // force 𝒜 < 0 on all of ℳ⁺.
        let s = sphere();
        // K = cos φ: β = 2. N = 1, Σα = -ε/4π keeps χ(Σ,α) close to 2 > 2N - 2β.
        let p = s.point_from_chart(1.0, 2.9);
        let sing = SingularData::new(&s, vec![p], vec![-0.01]).unwrap();
        let data = ProblemData::new(s, CurvatureField::CosPolar, sing, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let cfg = sample_config(&data, &mut rng, 1, 1e-3);
            let a = a_fun(&data, &cfg).unwrap();
            assert!(a < 0.0, "sign certificate violated: {a}");
        }
    }

    #[test]
    fn a_fun_positive_when_brackets_positive() {
        // Convex wells: Δ log K ≥ 4A/w² e^{-d²/w²}-ish > 0 near centers and
        // the drift term positive when ρ_geo < 8πN.
        let s = sphere();
        let c1 = s.point_from_chart(0.3, 1.0);
        let k = CurvatureField::LogBumps {
            base: 1.0,
            bumps: vec![crate::problem::LogBump {
                center: c1,
                amplitude: -0.8,
                width: 0.9,
            }],
        };
        let p = s.point_from_chart(2.0, 2.5);
        let sing = SingularData::new(&s, vec![p], vec![-0.05]).unwrap();
        let data = ProblemData::new(s, k, sing, 1).unwrap();
        // Near the well centre the bracket is positive; a_fun of the
        // single-point configuration there is positive.
        let cfg = Configuration::assess(
            &data,
            vec![data.surface().point_from_chart(0.3, 1.05)],
        );
        let drift = (8.0 * std::f64::consts::PI - data.rho_geo()) / data.surface().area();
        let ll = data
            .curvature()
            .log_laplacian(data.surface(), &cfg.points[0]);
        assert!(ll + drift > 0.0, "fixture must have a positive bracket");
        assert!(a_fun(&data, &cfg).unwrap() > 0.0);
    }

    #[test]
    fn collapse_drives_phi_down_unboundedly() {
        // Φ along d(ξ₁,ξ₂) = 10^{-t} decreases with slope -(1/π) ln 10.
        let data = cos_data(2);
        let s = data.surface();
        let base = s.point_from_chart(1.2, 0.8);
        let [e1, _] = s.frame(&base);
        let mut ts = Vec::new();
        let mut phis = Vec::new();
        for t in [2.0, 3.0, 4.0] {
            let d = 10f64.powf(-t);
            let other = s.exp_map(&base, &e1.scale(d)).unwrap();
            let cfg = Configuration::assess(&data, vec![base, other]);
            ts.push(t);
            phis.push(phi(&data, &cfg).unwrap());
        }
        let slope = crate::linalg::fit_slope(&ts, &phis);
        let expect = -std::f64::consts::LN_10 / std::f64::consts::PI;
        assert!(
            (slope - expect).abs() < 0.02 * expect.abs(),
            "slope {slope} vs {expect}"
        );
    }
}
