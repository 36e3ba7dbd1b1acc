//! Class-membership certificates for curvatures with sufficiently convex
//! minima (𝒦⁺) or sufficiently concave maxima (𝒦⁻) at a base
//! configuration ξ̄.
//!
//! Configuration space carries the ℓ∞ product metric
//! d(ξ, η) = max_j d_g(ξ_j, η_j), so balls are products of geodesic disks
//! and the boundary sphere is the union of the "one coordinate pinned at
//! radius r" faces. D_s is affine in the weight vector s, hence its
//! extrema over the box [α_*, α^*]^m sit at box vertices; the disk/face
//! extrema are located by sampling plus projected-gradient polish.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{d_s, Configuration};
use crate::error::EnergyError;
use crate::geometry::{SurfacePoint, TangentVec};
use crate::problem::ProblemData;
use crate::scalar::{r64, rus, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ClassSign {
    Plus,
    Minus,
}

/// Inputs of the certificate check.
#[derive(Clone, Debug)]
pub struct ClassSpec<R> {
    /// ξ̄: the N-point base configuration.
    pub base: Vec<SurfacePoint<R>>,
    /// Ball radius r; the certificate needs B_2r(ξ̄) ⊂ ℳ.
    pub radius: R,
    pub alpha_lo: R,
    pub alpha_hi: R,
    pub sign: ClassSign,
    /// Multistart count for the D_s extrema (32 by default).
    pub multistarts: usize,
    pub seed: u64,
}

/// Certificate outcome with the raw margins.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "R: Serialize"))]
pub struct ClassCertificate<R> {
    pub sign: ClassSign,
    pub pass: bool,
    /// Some margin sits below the resolution threshold 1e-4.
    pub inconclusive: bool,
    /// inf K over the per-point disks of radius r (positivity condition).
    pub min_k_on_balls: R,
    /// M^±: max of D_s over the box vertices and ball/sphere per sign.
    pub big_m: R,
    /// m^±: min of D_s over the box vertices and sphere/ball per sign.
    pub small_m: R,
    /// Gap inequality margin: RHS - LHS of the log-K comparison.
    pub gap_margin: R,
    /// Laplacian bound margin: distance of Δ_g log K from ±1/|Σ|.
    pub laplacian_margin: R,
    pub details: Vec<String>,
}

const MARGIN_RESOLUTION: f64 = 1e-4;
const DISK_RADIAL_SAMPLES: usize = 20;
const DISK_ANGULAR_SAMPLES: usize = 40;
const POLISH_ITERS: usize = 120;

/// Check the ball condition B_2r(ξ̄) ⊂ ℳ in the ℓ∞ product metric: every
/// point at least 2r from every source and base points 4r apart.
fn check_ball_in_domain<R: Real>(
    data: &ProblemData<R>,
    base: &[SurfacePoint<R>],
    radius: R,
) -> Result<(), EnergyError> {
    let model = data.surface();
    let two_r = radius + radius;
    for (j, x) in base.iter().enumerate() {
        for p in data.singular().points() {
            let d = model.distance(x, p);
            if d <= two_r {
                return Err(EnergyError::BallNotInDomain {
                    needed: two_r.to_f64().unwrap_or(f64::NAN),
                    reason: format!(
                        "base point {j} lies {:.3e} from a singular source",
                        d.to_f64().unwrap_or(f64::NAN)
                    ),
                });
            }
        }
        for (k, y) in base.iter().enumerate().skip(j + 1) {
            let d = model.distance(x, y);
            if d <= two_r + two_r {
                return Err(EnergyError::BallNotInDomain {
                    needed: (two_r + two_r).to_f64().unwrap_or(f64::NAN),
                    reason: format!(
                        "base points {j} and {k} lie {:.3e} apart",
                        d.to_f64().unwrap_or(f64::NAN)
                    ),
                });
            }
        }
        if two_r >= model.injectivity_radius() {
            return Err(EnergyError::BallNotInDomain {
                needed: two_r.to_f64().unwrap_or(f64::NAN),
                reason: "2r exceeds the injectivity radius".into(),
            });
        }
    }
    Ok(())
}

/// Deterministic polar samples of the closed geodesic disk B_ρ(center),
/// including the centre.
fn disk_samples<R: Real>(
    data: &ProblemData<R>,
    center: &SurfacePoint<R>,
    rho: R,
) -> Vec<SurfacePoint<R>> {
    let model = data.surface();
    let [e1, e2] = model.frame(center);
    let mut out = vec![*center];
    for ir in 1..=DISK_RADIAL_SAMPLES {
        let r = rho * rus::<R>(ir) / rus::<R>(DISK_RADIAL_SAMPLES);
        for ia in 0..DISK_ANGULAR_SAMPLES {
            let th = R::two_pi() * rus::<R>(ia) / rus::<R>(DISK_ANGULAR_SAMPLES);
            let dir = e1.scale(th.cos()).add(&e2.scale(th.sin()));
            out.push(
                model
                    .exp_map(center, &dir.scale(r))
                    .expect("disk radius below injectivity"),
            );
        }
    }
    out
}

/// Circle of radius ρ around a centre.
fn circle_samples<R: Real>(
    data: &ProblemData<R>,
    center: &SurfacePoint<R>,
    rho: R,
    count: usize,
) -> Vec<SurfacePoint<R>> {
    let model = data.surface();
    let [e1, e2] = model.frame(center);
    (0..count)
        .map(|ia| {
            let th = R::two_pi() * rus::<R>(ia) / rus::<R>(count);
            let dir = e1.scale(th.cos()).add(&e2.scale(th.sin()));
            model
                .exp_map(center, &dir.scale(rho))
                .expect("circle radius below injectivity")
        })
        .collect()
}

/// ∇ D_s per configuration point (h-diagonal constant, f_g gradient kept).
fn grad_d_s<R: Real>(
    data: &ProblemData<R>,
    cfg: &Configuration<R>,
    weights: &[R],
) -> Result<Vec<TangentVec<R>>, EnergyError> {
    let model = data.surface();
    let mut out = Vec::with_capacity(cfg.points.len());
    for (j, x) in cfg.points.iter().enumerate() {
        let mut g = TangentVec::zero_like(x);
        if !data.f_g().max_abs().is_zero() {
            g = g.add(&data.f_g().gradient_at(model, x).scale(R::four_pi().recip()));
        }
        for (p, &s) in data.singular().points().iter().zip(weights) {
            let gg = model.grad_green(x, p).map_err(|e| EnergyError::OutOfDomain {
                reason: e.to_string(),
            })?;
            g = g.add(&gg.scale(-s));
        }
        for (k, y) in cfg.points.iter().enumerate() {
            if k != j {
                let gg = model.grad_green(x, y).map_err(|e| EnergyError::OutOfDomain {
                    reason: format!("pair ({j}, {k}): {e}"),
                })?;
                g = g.add(&gg.scale(r64(2.0)));
            }
        }
        out.push(g);
    }
    Ok(out)
}

/// Ball constraint: each point stays in the closed disk of radius `rho`
/// around its base point; `pinned` keeps one coordinate on the circle.
fn project_to_ball<R: Real>(
    data: &ProblemData<R>,
    base: &[SurfacePoint<R>],
    points: &mut [SurfacePoint<R>],
    rho: R,
    pinned: Option<usize>,
) {
    let model = data.surface();
    for (j, x) in points.iter_mut().enumerate() {
        let d = model.distance(&base[j], x);
        let target = if pinned == Some(j) {
            Some(rho)
        } else if d > rho {
            Some(rho)
        } else {
            None
        };
        if let Some(t) = target {
            if d < r64(1e-14) {
                // Degenerate: nudge along the first frame leg.
                let [e1, _] = model.frame(&base[j]);
                *x = model.exp_map(&base[j], &e1.scale(t)).expect("inside injectivity");
            } else {
                let log = model.log_map(&base[j], x).expect("inside injectivity");
                *x = model
                    .exp_map(&base[j], &log.scale(t / d))
                    .expect("inside injectivity");
            }
        }
    }
}

/// Maximise (sign=+1) or minimise (sign=-1) D_s over the product of closed
/// disks of radius `rho`, optionally with one coordinate pinned on the
/// circle, from one random start. Returns the best value reached.
#[allow(clippy::too_many_arguments)]
fn polish_extremum<R: Real>(
    data: &ProblemData<R>,
    base: &[SurfacePoint<R>],
    weights: &[R],
    rho: R,
    pinned: Option<usize>,
    direction: R,
    rng: &mut ChaCha8Rng,
) -> Option<R> {
    let model = data.surface();
    // Random start in the ball (or on the circle for the pinned leg).
    let mut pts: Vec<SurfacePoint<R>> = base
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let [e1, e2] = model.frame(c);
            let th = r64::<R>(rng.gen_range(0.0..std::f64::consts::TAU));
            let rad = if pinned == Some(j) {
                rho
            } else {
                rho * r64::<R>(rng.gen_range(0.0f64..1.0)).sqrt()
            };
            let dir = e1.scale(th.cos()).add(&e2.scale(th.sin()));
            model.exp_map(c, &dir.scale(rad)).expect("inside injectivity")
        })
        .collect();
    let mut step = rho * r64(0.2);
    let mut best: Option<R> = None;
    for _ in 0..POLISH_ITERS {
        let cfg = Configuration::assess(data, pts.clone());
        let value = match d_s(data, &cfg, weights, None) {
            Ok(v) => v,
            Err(_) => return best,
        };
        if best.map_or(true, |b| direction * (value - b) > R::zero()) {
            best = Some(value);
        }
        let grad = match grad_d_s(data, &cfg, weights) {
            Ok(g) => g,
            Err(_) => return best,
        };
        let gn = crate::energy::grad_norm(&grad);
        if gn < r64(1e-12) {
            break;
        }
        let mut trial: Vec<SurfacePoint<R>> = pts
            .iter()
            .zip(&grad)
            .map(|(x, g)| {
                let v = g.scale(direction * step / gn.max(R::one()));
                model.exp_map(x, &v).unwrap_or(*x)
            })
            .collect();
        project_to_ball(data, base, &mut trial, rho, pinned);
        let tcfg = Configuration::assess(data, trial.clone());
        match d_s(data, &tcfg, weights, None) {
            Ok(tv) if direction * (tv - best.unwrap()) > R::zero() => {
                pts = trial;
                step = (step * r64(1.3)).min(rho * r64(0.5));
            }
            _ => {
                step *= r64(0.5);
                if step < rho * r64(1e-6) {
                    break;
                }
            }
        }
    }
    best
}

/// Extremum of D_s over the ball (pinned: sphere faces) for one weight
/// vertex: deterministic face/disk samples plus multistart polish.
#[allow(clippy::too_many_arguments)]
fn d_s_extremum<R: Real>(
    data: &ProblemData<R>,
    base: &[SurfacePoint<R>],
    weights: &[R],
    rho: R,
    boundary: bool,
    direction: R, // +1 max, -1 min
    multistarts: usize,
    seed: u64,
) -> R {
    let n = base.len();
    let pinned_options: Vec<Option<usize>> = if boundary {
        (0..n).map(Some).collect()
    } else {
        vec![None]
    };
    let work: Vec<(Option<usize>, u64)> = pinned_options
        .iter()
        .flat_map(|&p| (0..multistarts as u64).map(move |s| (p, s)))
        .collect();
    let results: Vec<Option<R>> = work
        .par_iter()
        .map(|&(pinned, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed ^ (s.wrapping_mul(0x9e37_79b9_7f4a_7c15))
                    ^ (pinned.map_or(0, |p| p as u64 + 1) << 32),
            );
            polish_extremum(data, base, weights, rho, pinned, direction, &mut rng)
        })
        .collect();
    let mut best = R::neg_infinity() * direction; // -inf for max, +inf for min
    for v in results.into_iter().flatten() {
        if direction * (v - best) > R::zero() {
            best = v;
        }
    }
    // Deterministic boundary/interior grid as a safety net.
    let grid_candidates = extremum_grid_candidates(data, base, rho, boundary);
    for pts in grid_candidates {
        let cfg = Configuration::assess(data, pts);
        if let Ok(v) = d_s(data, &cfg, weights, None) {
            if direction * (v - best) > R::zero() {
                best = v;
            }
        }
    }
    best
}

/// Coarse deterministic candidates: per-point circle/disk samples with the
/// other points at their base positions.
fn extremum_grid_candidates<R: Real>(
    data: &ProblemData<R>,
    base: &[SurfacePoint<R>],
    rho: R,
    boundary: bool,
) -> Vec<Vec<SurfacePoint<R>>> {
    let mut out = Vec::new();
    for j in 0..base.len() {
        let samples = if boundary {
            circle_samples(data, &base[j], rho, 64)
        } else {
            disk_samples(data, &base[j], rho)
        };
        for s in samples {
            let mut pts = base.to_vec();
            pts[j] = s;
            out.push(pts);
        }
    }
    if !boundary {
        out.push(base.to_vec());
    }
    out
}

/// All 2^m vertices of the weight box.
fn box_vertices<R: Real>(m: usize, lo: R, hi: R) -> Vec<Vec<R>> {
    assert!(m <= 20, "weight-box enumeration capped at 20 sources");
    (0u32..(1 << m))
        .map(|mask| {
            (0..m)
                .map(|i| if mask & (1 << i) != 0 { hi } else { lo })
                .collect()
        })
        .collect()
}

/// Run the §5 certificate.
pub fn class_membership<R: Real>(
    data: &ProblemData<R>,
    spec: &ClassSpec<R>,
) -> Result<ClassCertificate<R>, EnergyError> {
    assert_eq!(spec.base.len(), data.n_points(), "base must have N points");
    assert!(spec.alpha_lo <= spec.alpha_hi);
    check_ball_in_domain(data, &spec.base, spec.radius)?;
    let model = data.surface();
    let r = spec.radius;
    let half = r * r64(0.5);
    let mut details = Vec::new();

    // (5.4): positivity of K on the per-point disks of radius r.
    let mut min_k = R::infinity();
    for c in &spec.base {
        for x in disk_samples(data, c, r) {
            min_k = min_k.min(data.curvature().value(model, &x));
        }
    }

    // Per-point log K extrema (the configuration sums are separable).
    let n = spec.base.len();
    let mut max_log_half = vec![R::neg_infinity(); n];
    let mut min_log_half = vec![R::infinity(); n];
    let mut max_log_full = vec![R::neg_infinity(); n];
    let mut min_log_full = vec![R::infinity(); n];
    let mut max_log_circle = vec![R::neg_infinity(); n];
    let mut min_log_circle = vec![R::infinity(); n];
    for (j, c) in spec.base.iter().enumerate() {
        for x in disk_samples(data, c, half) {
            let v = data.curvature().value(model, &x);
            if v > R::zero() {
                max_log_half[j] = max_log_half[j].max(v.ln());
                min_log_half[j] = min_log_half[j].min(v.ln());
            }
        }
        for x in disk_samples(data, c, r) {
            let v = data.curvature().value(model, &x);
            if v > R::zero() {
                max_log_full[j] = max_log_full[j].max(v.ln());
                min_log_full[j] = min_log_full[j].min(v.ln());
            }
        }
        for x in circle_samples(data, c, r, 256) {
            let v = data.curvature().value(model, &x);
            if v > R::zero() {
                max_log_circle[j] = max_log_circle[j].max(v.ln());
                min_log_circle[j] = min_log_circle[j].min(v.ln());
            }
        }
    }
    let quarter = R::four_pi().recip();

    // D_s extrema over the weight-box vertices.
    let vertices = box_vertices(data.singular().len(), spec.alpha_lo, spec.alpha_hi);
    let mut big_m = R::neg_infinity();
    let mut small_m = R::infinity();
    for w in &vertices {
        match spec.sign {
            ClassSign::Plus => {
                // M⁺: max over the closed ball of radius r/2;
                // m⁺: min over the boundary sphere of radius r.
                big_m = big_m.max(d_s_extremum(
                    data,
                    &spec.base,
                    w,
                    half,
                    false,
                    R::one(),
                    spec.multistarts,
                    spec.seed,
                ));
                small_m = small_m.min(d_s_extremum(
                    data,
                    &spec.base,
                    w,
                    r,
                    true,
                    -R::one(),
                    spec.multistarts,
                    spec.seed.wrapping_add(1),
                ));
            }
            ClassSign::Minus => {
                // M⁻: max over the boundary sphere; m⁻: min over the
                // closed ball of radius r/2.
                big_m = big_m.max(d_s_extremum(
                    data,
                    &spec.base,
                    w,
                    r,
                    true,
                    R::one(),
                    spec.multistarts,
                    spec.seed,
                ));
                small_m = small_m.min(d_s_extremum(
                    data,
                    &spec.base,
                    w,
                    half,
                    false,
                    -R::one(),
                    spec.multistarts,
                    spec.seed.wrapping_add(1),
                ));
            }
        }
    }

    // Gap inequality (log-K side + D_s side).
    let (log_lhs, log_rhs) = match spec.sign {
        ClassSign::Plus => {
            // max over B̄_{r/2} Σ log K < min over ∂B_r Σ log K + m⁺ - M⁺.
            let lhs = quarter * max_log_half.iter().copied().sum::<R>();
            let mut rhs_min = R::infinity();
            for j_star in 0..n {
                let mut acc = min_log_circle[j_star];
                for (k, &v) in min_log_full.iter().enumerate() {
                    if k != j_star {
                        acc += v;
                    }
                }
                rhs_min = rhs_min.min(acc);
            }
            (lhs, quarter * rhs_min)
        }
        ClassSign::Minus => {
            // max over ∂B_r Σ log K < min over B̄_{r/2} Σ log K + m⁻ - M⁻.
            let mut lhs_max = R::neg_infinity();
            for j_star in 0..n {
                let mut acc = max_log_circle[j_star];
                for (k, &v) in max_log_full.iter().enumerate() {
                    if k != j_star {
                        acc += v;
                    }
                }
                lhs_max = lhs_max.max(acc);
            }
            (quarter * lhs_max, quarter * min_log_half.iter().copied().sum::<R>())
        }
    };
    let gap_margin = log_rhs + (small_m - big_m) - log_lhs;

    // Laplacian bound over the per-point disks of radius r.
    let inv_area = model.area().recip();
    let mut inf_ll = R::infinity();
    let mut sup_ll = R::neg_infinity();
    for c in &spec.base {
        for x in disk_samples(data, c, r) {
            let ll = data.curvature().log_laplacian(model, &x);
            inf_ll = inf_ll.min(ll);
            sup_ll = sup_ll.max(ll);
        }
    }
    let laplacian_margin = match spec.sign {
        ClassSign::Plus => inf_ll - inv_area,
        ClassSign::Minus => -inv_area - sup_ll,
    };

    details.push(format!(
        "D_s extrema: M = {:.6e}, m = {:.6e} over {} box vertices",
        big_m.to_f64().unwrap_or(f64::NAN),
        small_m.to_f64().unwrap_or(f64::NAN),
        vertices.len()
    ));
    details.push(format!(
        "log-K comparison: lhs {:.6e}, rhs {:.6e}, D-gap {:.6e}",
        log_lhs.to_f64().unwrap_or(f64::NAN),
        log_rhs.to_f64().unwrap_or(f64::NAN),
        (small_m - big_m).to_f64().unwrap_or(f64::NAN)
    ));
    details.push(format!(
        "Δ log K over the disks: inf {:.6e}, sup {:.6e}, bound 1/|Σ| = {:.6e}",
        inf_ll.to_f64().unwrap_or(f64::NAN),
        sup_ll.to_f64().unwrap_or(f64::NAN),
        inv_area.to_f64().unwrap_or(f64::NAN)
    ));

    let margin_floor = r64::<R>(MARGIN_RESOLUTION);
    let positivity = min_k > R::zero();
    let pass = positivity && gap_margin > R::zero() && laplacian_margin >= R::zero();
    let inconclusive =
        gap_margin.abs() < margin_floor || laplacian_margin.abs() < margin_floor;
    Ok(ClassCertificate {
        sign: spec.sign,
        pass,
        inconclusive,
        min_k_on_balls: min_k,
        big_m,
        small_m,
        gap_margin,
        laplacian_margin,
        details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Resolution, SurfaceModel};
    use crate::problem::{CurvatureField, LogBump, SingularData};
    use std::sync::Arc;

    fn sphere() -> Arc<SurfaceModel<f64>> {
        Arc::new(SurfaceModel::unit_sphere(Resolution {
            n_u: 48,
            n_v: 96,
            degree: 47,
        }))
    }

    /// Wells (amp < 0) or peaks (amp > 0) of log K at the base points.
    /// The width must exceed the certificate radius so the Laplacian keeps
    /// one sign across the whole ball, and the depth must beat the D_s
    /// spread across the weight box.
    fn well_data(n: usize, amp: f64, width: f64) -> (ProblemData<f64>, Vec<SurfacePoint<f64>>) {
        let s = sphere();
        let centers = vec![
            s.point_from_chart(0.8, 1.1),
            s.point_from_chart(3.9, 1.9),
        ];
        let base: Vec<_> = centers.iter().take(n).cloned().collect();
        let bumps = base
            .iter()
            .map(|c| LogBump {
                center: *c,
                amplitude: amp,
                width,
            })
            .collect();
        let k = CurvatureField::LogBumps { base: 1.0, bumps };
        // The source sits on the circle where G(·, base) ≈ 0, which keeps
        // the weight-box spread of D_s small.
        let p = s.point_from_chart(0.8, 2.4034);
        let sing = SingularData::new(&s, vec![p], vec![0.5]).unwrap();
        let data = ProblemData::new(s, k, sing, n).unwrap();
        (data, base)
    }

    #[test]
    fn convex_well_passes_k_plus() {
        let (data, base) = well_data(1, -10.0, 0.36);
        let spec = ClassSpec {
            base,
            radius: 0.3,
            alpha_lo: -0.5,
            alpha_hi: 2.0,
            sign: ClassSign::Plus,
            multistarts: 8,
            seed: 42,
        };
        let cert = class_membership(&data, &spec).unwrap();
        assert!(cert.pass, "certificate failed: {:#?}", cert);
        assert!(cert.gap_margin > 1e-4);
        assert!(cert.laplacian_margin > 0.0);
        assert!(cert.min_k_on_balls > 0.0);
    }

    #[test]
    fn constant_k_fails_gap() {
        // With K ≡ 1 the log terms cancel and the gap inequality reduces
        // to m⁺ - M⁺ > 0, which fails generically (the D_s extremum over
        // the larger set dominates).
        let s = sphere();
        let p = s.point_from_chart(0.8, 2.4034);
        let sing = SingularData::new(&s, vec![p], vec![0.5]).unwrap();
        let data = ProblemData::new(s.clone(), CurvatureField::Constant(1.0), sing, 1).unwrap();
        let base = vec![s.point_from_chart(0.8, 1.1)];
        let spec = ClassSpec {
            base,
            radius: 0.3,
            alpha_lo: -0.5,
            alpha_hi: 2.0,
            sign: ClassSign::Plus,
            multistarts: 8,
            seed: 42,
        };
        let cert = class_membership(&data, &spec).unwrap();
        assert!(!cert.pass, "constant K must fail: {:#?}", cert);
        assert!(cert.gap_margin < 0.0);
    }

    #[test]
    fn concave_peaks_pass_k_minus() {
        // Two-point certificate: the unpinned coordinate of a boundary
        // face can sit at the peak, so the peaks must be deep.
        let (data, base) = well_data(2, 40.0, 0.36);
        let spec = ClassSpec {
            base,
            radius: 0.3,
            alpha_lo: -0.5,
            alpha_hi: 4.0,
            sign: ClassSign::Minus,
            multistarts: 8,
            seed: 7,
        };
        let cert = class_membership(&data, &spec).unwrap();
        assert!(cert.pass, "certificate failed: {:#?}", cert);
        assert!(cert.laplacian_margin > 0.0, "Δ log K ≤ -1/|Σ| near peaks");
    }

    #[test]
    fn ball_domain_violation_detected() {
        let (data, base) = well_data(1, -2.5, 0.25);
        let spec = ClassSpec {
            base,
            radius: 1.0, // 2r reaches the singular source
            alpha_lo: 0.0,
            alpha_hi: 1.0,
            sign: ClassSign::Plus,
            multistarts: 4,
            seed: 1,
        };
        assert!(matches!(
            class_membership(&data, &spec),
            Err(EnergyError::BallNotInDomain { .. })
        ));
    }
}
