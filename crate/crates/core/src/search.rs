//! Critical-point search for the reduced energy: seeded multistart,
//! monotone ascent/descent with domain barriers, Newton–Levenberg polish
//! on the gradient system, permutation-aware deduplication and spectral
//! classification with the stability rules for extrema and nondegenerate
//! points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{
    a_fun, grad_norm, grad_psi, hessian_psi, phi, psi, Configuration,
};
use crate::error::SearchError;
use crate::geometry::{SurfaceKind, SurfacePoint};
use crate::linalg::{solve_linear, symmetric_eigenvalues, SmallMatrix};
use crate::problem::ProblemData;
use crate::scalar::{r64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SearchMode {
    Min,
    Max,
    Any,
}

/// Knobs for the search and the min-max scheme.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "R: Serialize"))]
pub struct SearchConfig<R> {
    pub multistarts: usize,
    /// Stationarity threshold on |∇Ψ|.
    pub grad_tol: R,
    /// Degeneracy threshold on Hessian eigenvalues.
    pub hess_tol: R,
    pub max_iters: usize,
    pub seed: u64,
    /// Barrier parameter M: the search stays inside {Φ > -M}.
    pub barrier_m: R,
    /// Discretisation of each min-max curve.
    pub curve_samples: usize,
    /// Configurations closer than this (permutation-aware) are duplicates.
    pub dedup_dist: R,
    /// Initial line-search step.
    pub initial_step: R,
}

impl<R: Real> Default for SearchConfig<R> {
    fn default() -> Self {
        SearchConfig {
            multistarts: 64,
            grad_tol: r64(1e-9),
            hess_tol: r64(1e-7),
            max_iters: 300,
            seed: 0,
            barrier_m: r64(50.0),
            curve_samples: 512,
            dedup_dist: r64(1e-6),
            initial_step: r64(0.1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Classification {
    Minimum,
    Maximum,
    Saddle { index: usize },
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ASign {
    Positive,
    Negative,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "R: Serialize"))]
pub struct CriticalPointReport<R> {
    pub config: Configuration<R>,
    pub value: R,
    pub grad_norm: R,
    pub hessian_spectrum: Vec<R>,
    pub classification: Classification,
    pub stable: bool,
    pub stability_reason: String,
    pub a_value: R,
    pub a_sign: ASign,
}

/// Uniform random point on the surface.
pub fn random_point<R: Real>(
    kind: &SurfaceKind<R>,
    model: &crate::geometry::SurfaceModel<R>,
    rng: &mut ChaCha8Rng,
) -> SurfacePoint<R> {
    match kind {
        SurfaceKind::UnitSphere => {
            let z = r64::<R>(rng.gen_range(-1.0..1.0f64));
            let lon = r64::<R>(rng.gen_range(0.0..std::f64::consts::TAU));
            model.point_from_chart(lon, z.min(R::one()).max(-R::one()).acos())
        }
        SurfaceKind::FlatTorus { a, b } => {
            let x = *a * r64::<R>(rng.gen_range(0.0..1.0f64));
            let y = *b * r64::<R>(rng.gen_range(0.0..1.0f64));
            model.point_from_chart(x, y)
        }
    }
}

/// Rejection-sample a configuration in ℳ⁺ ∩ {Φ > -M}. `None` after the
/// try budget runs out.
pub fn sample_admissible<R: Real>(
    data: &ProblemData<R>,
    barrier_m: R,
    rng: &mut ChaCha8Rng,
    tries: usize,
) -> Option<Configuration<R>> {
    let model = data.surface();
    let kind = model.kind();
    for _ in 0..tries {
        let pts: Vec<SurfacePoint<R>> = (0..data.n_points())
            .map(|_| random_point(&kind, model, rng))
            .collect();
        let cfg = Configuration::assess(data, pts);
        if !cfg.in_m_plus {
            continue;
        }
        if let Ok(p) = phi(data, &cfg) {
            if p > -barrier_m {
                return Some(cfg);
            }
        }
    }
    None
}

/// Inside the barrier set 𝒟 = {ξ ∈ ℳ⁺ : Φ(ξ) > -M}?
fn in_barrier<R: Real>(data: &ProblemData<R>, cfg: &Configuration<R>, barrier_m: R) -> bool {
    cfg.in_m_plus && matches!(phi(data, cfg), Ok(p) if p > -barrier_m)
}

/// One seeded local search; returns a stationary configuration when the
/// gradient drops below tolerance.
fn local_search<R: Real>(
    data: &ProblemData<R>,
    cfg: &SearchConfig<R>,
    mode: SearchMode,
    start: Configuration<R>,
) -> Option<Configuration<R>> {
    let model = data.surface();
    let mut current = start;
    let mut value = psi(data, &current).ok()?;
    let mut step = cfg.initial_step;
    let ascent_sign = match mode {
        SearchMode::Max => R::one(),
        SearchMode::Min => -R::one(),
        SearchMode::Any => R::zero(),
    };

    // Phase 1 (min/max only): monotone line search along ±∇Ψ.
    if mode != SearchMode::Any {
        for _ in 0..cfg.max_iters {
            let grad = grad_psi(data, &current).ok()?;
            let gn = grad_norm(&grad);
            if gn < r64(1e-6) {
                break;
            }
            let max_step = model.injectivity_radius() * r64(0.3);
            let len = step.min(max_step);
            let mut accepted = false;
            let mut trial_len = len;
            for _ in 0..30 {
                let pts: Vec<SurfacePoint<R>> = current
                    .points
                    .iter()
                    .zip(&grad)
                    .map(|(x, g)| {
                        let v = g.scale(ascent_sign * trial_len / gn);
                        model.exp_map(x, &v).unwrap_or(*x)
                    })
                    .collect();
                let trial = Configuration::assess(data, pts);
                if in_barrier(data, &trial, cfg.barrier_m) {
                    if let Ok(tv) = psi(data, &trial) {
                        if ascent_sign * (tv - value) > R::zero() {
                            current = trial;
                            value = tv;
                            step = (trial_len * r64(1.5)).min(max_step);
                            accepted = true;
                            break;
                        }
                    }
                }
                trial_len *= r64(0.4);
            }
            if !accepted {
                break;
            }
        }
    }

    // Phase 2: Newton–Levenberg on ∇Ψ = 0 with the domain barrier.
    let n = current.n();
    let mut lambda = r64::<R>(1e-4);
    for _ in 0..cfg.max_iters {
        let grad = grad_psi(data, &current).ok()?;
        let gn = grad_norm(&grad);
        if gn < cfg.grad_tol {
            return Some(current);
        }
        let frames: Vec<_> = current.points.iter().map(|x| model.frame(x)).collect();
        let hess = hessian_psi(data, &current).ok()?;
        let mut improved = false;
        for _ in 0..24 {
            let mut damped = SmallMatrix::zeros(2 * n);
            for i in 0..2 * n {
                for j in 0..2 * n {
                    let v = hess.get(i, j);
                    damped.set(i, j, if i == j { v + lambda * v.abs().max(R::one()) } else { v });
                }
            }
            let mut rhs = vec![R::zero(); 2 * n];
            for (j, g) in grad.iter().enumerate() {
                rhs[2 * j] = -g.dot(&frames[j][0]);
                rhs[2 * j + 1] = -g.dot(&frames[j][1]);
            }
            let Some(delta) = solve_linear(&damped, &rhs) else {
                lambda *= r64(10.0);
                continue;
            };
            let step_norm = delta.iter().map(|d| *d * *d).sum::<R>().sqrt();
            let cap = model.injectivity_radius() * r64(0.3);
            let scale = if step_norm > cap { cap / step_norm } else { R::one() };
            let pts: Vec<SurfacePoint<R>> = current
                .points
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    let v = frames[j][0]
                        .scale(delta[2 * j] * scale)
                        .add(&frames[j][1].scale(delta[2 * j + 1] * scale));
                    model.exp_map(x, &v).unwrap_or(*x)
                })
                .collect();
            let trial = Configuration::assess(data, pts);
            if in_barrier(data, &trial, cfg.barrier_m) {
                if let Ok(tg) = grad_psi(data, &trial) {
                    if grad_norm(&tg) < gn {
                        current = trial;
                        lambda = (lambda * r64(0.25)).max(r64(1e-14));
                        improved = true;
                        break;
                    }
                }
            }
            lambda *= r64(10.0);
            if lambda > r64(1e12) {
                return None;
            }
        }
        if !improved {
            return None;
        }
    }
    let grad = grad_psi(data, &current).ok()?;
    (grad_norm(&grad) < cfg.grad_tol).then_some(current)
}

/// Permutation-aware distance between two configurations (exact over all
/// permutations; N stays small).
pub fn config_distance<R: Real>(
    data: &ProblemData<R>,
    a: &[SurfacePoint<R>],
    b: &[SurfacePoint<R>],
) -> R {
    let model = data.surface();
    let n = a.len();
    assert_eq!(n, b.len());
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = R::infinity();
    loop {
        let mut worst = R::zero();
        for (j, &k) in perm.iter().enumerate() {
            worst = worst.max(model.distance(&a[j], &b[k]));
        }
        best = best.min(worst);
        // Next permutation in lexicographic order.
        let mut i = n.wrapping_sub(2);
        while i != usize::MAX && perm[i] >= perm[i + 1] {
            i = i.wrapping_sub(1);
        }
        if i == usize::MAX {
            break;
        }
        let mut j = n - 1;
        while perm[j] <= perm[i] {
            j -= 1;
        }
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
    best
}

/// Canonical point order so duplicate reports print identically.
fn canonical_order<R: Real>(data: &ProblemData<R>, pts: &mut [SurfacePoint<R>]) {
    let model = data.surface();
    pts.sort_by(|x, y| {
        let (ux, vx) = model.chart_of_point(x);
        let (uy, vy) = model.chart_of_point(y);
        (vx, ux)
            .partial_cmp(&(vy, uy))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

/// Spectral classification and the stability verdict of Definition-style
/// rules: definite extrema are stable, nondegenerate saddles are stable,
/// near-zero eigenvalues leave the verdict undetermined.
pub fn classify<R: Real>(
    data: &ProblemData<R>,
    config: &Configuration<R>,
    cfg: &SearchConfig<R>,
) -> Result<CriticalPointReport<R>, SearchError> {
    let grad = grad_psi(data, config).map_err(|e| SearchError::SetupInfeasible {
        reason: e.to_string(),
    })?;
    let gn = grad_norm(&grad);
    if gn >= cfg.grad_tol {
        return Err(SearchError::NotCritical {
            grad_norm: gn.to_f64().unwrap_or(f64::NAN),
            tol: cfg.grad_tol.to_f64().unwrap_or(f64::NAN),
        });
    }
    let spectrum = symmetric_eigenvalues(&hessian_psi(data, config).map_err(|e| {
        SearchError::SetupInfeasible {
            reason: e.to_string(),
        }
    })?);
    let tau = cfg.hess_tol;
    let negatives = spectrum.iter().filter(|&&l| l < -tau).count();
    let positives = spectrum.iter().filter(|&&l| l > tau).count();
    let zeros = spectrum.len() - negatives - positives;
    let (classification, stable, reason) = if zeros > 0 {
        (
            Classification::Degenerate,
            false,
            format!(
                "{zeros} eigenvalue(s) within {:.1e} of zero: stability undetermined by the implemented criteria",
                tau.to_f64().unwrap_or(f64::NAN)
            ),
        )
    } else if negatives == spectrum.len() {
        (
            Classification::Maximum,
            true,
            "definite local maximum".into(),
        )
    } else if positives == spectrum.len() {
        (
            Classification::Minimum,
            true,
            "definite local minimum".into(),
        )
    } else {
        (
            Classification::Saddle { index: negatives },
            true,
            "nondegenerate critical point".into(),
        )
    };
    let value = psi(data, config).map_err(|e| SearchError::SetupInfeasible {
        reason: e.to_string(),
    })?;
    let a_value = a_fun(data, config).map_err(|e| SearchError::SetupInfeasible {
        reason: e.to_string(),
    })?;
    let a_sign = if a_value > r64(1e-10) {
        ASign::Positive
    } else if a_value < r64(-1e-10) {
        ASign::Negative
    } else {
        ASign::Inconclusive
    };
    Ok(CriticalPointReport {
        config: config.clone(),
        value,
        grad_norm: gn,
        hessian_spectrum: spectrum,
        classification,
        stable,
        stability_reason: reason,
        a_value,
        a_sign,
    })
}

/// Multistart search for critical points of Ψ.
///
/// `mode`: Min/Max run monotone descent/ascent before polishing, Any
/// polishes the gradient system from every start. The returned list is
/// deduplicated up to permutations; an empty list is a valid "none found"
/// outcome.
pub fn find_critical_points<R: Real>(
    data: &ProblemData<R>,
    cfg: &SearchConfig<R>,
    mode: SearchMode,
    extra_starts: &[Configuration<R>],
) -> Result<Vec<CriticalPointReport<R>>, SearchError> {
    assert!(
        data.k_samples().iter().any(|&v| v > R::zero()),
        "Σ⁺ must have positive sampled area"
    );
    let mut starts: Vec<Configuration<R>> = extra_starts.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut failed_samples = 0usize;
    while starts.len() < cfg.multistarts + extra_starts.len() {
        match sample_admissible(data, cfg.barrier_m, &mut rng, 200) {
            Some(c) => starts.push(c),
            None => {
                failed_samples += 1;
                if failed_samples > 4 {
                    break;
                }
            }
        }
    }
    if starts.is_empty() {
        return Err(SearchError::DomainEscape {
            mode: match mode {
                SearchMode::Min => "min",
                SearchMode::Max => "max",
                SearchMode::Any => "any",
            },
        });
    }
    let found: Vec<Configuration<R>> = starts
        .par_iter()
        .filter_map(|s| local_search(data, cfg, mode, s.clone()))
        .collect();
    // Deduplicate (permutation-aware), keeping the smallest gradient norm.
    let mut unique: Vec<Configuration<R>> = Vec::new();
    for mut c in found {
        canonical_order(data, &mut c.points);
        let c = Configuration::assess(data, c.points);
        let dup = unique
            .iter()
            .position(|u| config_distance(data, &u.points, &c.points) < cfg.dedup_dist);
        match dup {
            None => unique.push(c),
            Some(i) => {
                let gn_new = grad_psi(data, &c).map(|g| grad_norm(&g)).unwrap_or(R::infinity());
                let gn_old = grad_psi(data, &unique[i])
                    .map(|g| grad_norm(&g))
                    .unwrap_or(R::infinity());
                if gn_new < gn_old {
                    unique[i] = c;
                }
            }
        }
    }
    let mut reports: Vec<CriticalPointReport<R>> = unique
        .iter()
        .filter_map(|c| classify(data, c, cfg).ok())
        .collect();
    // Mode filter: min/max searches report extrema of the requested kind
    // first but keep whatever the polish converged to.
    reports.sort_by(|a, b| {
        a.value
            .partial_cmp(&b.value)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if mode == SearchMode::Max {
        reports.reverse();
    }
    Ok(reports)
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

    /// K with one well of log K + 4π h(ξ,ξ) ≡ const: the unique critical
    /// point of Ψ for N = 1, m = 0 is the extremum of log K.
    #[test]
    fn single_point_max_found_against_grid_oracle() {
        let s = sphere();
        let center = s.point_from_chart(1.3, 1.0);
        let k = CurvatureField::LogBumps {
            base: 1.0,
            bumps: vec![LogBump {
                center,
                amplitude: 1.0,
                width: 0.8,
            }],
        };
        let data = ProblemData::new(s.clone(), k, SingularData::empty(), 1).unwrap();
        let cfg = SearchConfig {
            multistarts: 16,
            seed: 3,
            ..SearchConfig::default()
        };
        let reports = find_critical_points(&data, &cfg, SearchMode::Max, &[]).unwrap();
        assert!(!reports.is_empty());
        let top = &reports[0];
        // Dense-grid oracle: Ψ(ξ) = c₀ + (1/4π) log K(ξ) is maximal at the
        // bump centre; the grid maximum must agree with the found point.
        let mut best = (f64::NEG_INFINITY, None);
        for node in &s.quadrature().nodes {
            let cfg1 = Configuration::assess(&data, vec![*node]);
            if let Ok(v) = psi(&data, &cfg1) {
                if v > best.0 {
                    best = (v, Some(*node));
                }
            }
        }
        let grid_pt = best.1.unwrap();
        let d_oracle = s.distance(&top.config.points[0], &grid_pt);
        let spacing = s.quadrature().max_spacing;
        assert!(
            d_oracle < 2.0 * spacing,
            "search {:.4} away from grid argmax",
            d_oracle
        );
        assert!(s.distance(&top.config.points[0], &center) < 1e-6);
        assert!(top.grad_norm < 1e-9);
        assert_eq!(top.classification, Classification::Maximum);
        assert!(top.stable);
    }

    #[test]
    fn two_component_max_one_point_per_cap() {
        // K = z² - 1/4: Σ⁺ is two polar caps; Ψ with N = 2 has a local max
        // with one point per cap (at the poles by symmetry).
        let s = sphere();
        let k = CurvatureField::Sum(vec![
            CurvatureField::Product(vec![CurvatureField::CosPolar, CurvatureField::CosPolar]),
            CurvatureField::Constant(-0.25),
        ]);
        let data = ProblemData::new(s.clone(), k, SingularData::empty(), 2).unwrap();
        let cfg = SearchConfig {
            multistarts: 24,
            seed: 11,
            ..SearchConfig::default()
        };
        let reports = find_critical_points(&data, &cfg, SearchMode::Max, &[]).unwrap();
        assert!(!reports.is_empty());
        let top = &reports[0];
        assert!(top.grad_norm < 1e-8);
        assert_eq!(top.classification, Classification::Maximum);
        assert!(top.stable);
        assert!(top.hessian_spectrum.iter().all(|&l| l < -1e-6));
        // One point per cap: z-coordinates of opposite signs, near ±1.
        let mut zs: Vec<f64> = top
            .config
            .points
            .iter()
            .map(|p| match p {
                SurfacePoint::Sphere(v) => v.0[2],
                _ => unreachable!(),
            })
            .collect();
        zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(zs[0] < -0.99 && zs[1] > 0.99, "points at the poles: {zs:?}");
    }

    #[test]
    fn permutation_duplicates_collapse() {
        let s = sphere();
        let k = CurvatureField::Sum(vec![
            CurvatureField::Product(vec![CurvatureField::CosPolar, CurvatureField::CosPolar]),
            CurvatureField::Constant(-0.25),
        ]);
        let data = ProblemData::new(s.clone(), k, SingularData::empty(), 2).unwrap();
        let cfg = SearchConfig {
            multistarts: 0,
            seed: 0,
            ..SearchConfig::default()
        };
        // Two starts that are permutations of each other.
        let north = s.point_from_chart(0.2, 0.3);
        let south = s.point_from_chart(1.0, 2.9);
        let starts = vec![
            Configuration::assess(&data, vec![north, south]),
            Configuration::assess(&data, vec![south, north]),
        ];
        let reports = find_critical_points(&data, &cfg, SearchMode::Max, &starts).unwrap();
        assert_eq!(reports.len(), 1, "permuted starts must dedup");
    }

    #[test]
    fn classify_rejects_noncritical() {
        let s = sphere();
        let data = ProblemData::new(s.clone(), CurvatureField::CosPolar, SingularData::empty(), 1)
            .unwrap();
        let cfg = SearchConfig::default();
        let off = Configuration::assess(&data, vec![s.point_from_chart(0.3, 0.7)]);
        assert!(matches!(
            classify(&data, &off, &cfg),
            Err(SearchError::NotCritical { .. })
        ));
    }

    #[test]
    fn newton_polish_is_idempotent_at_solution() {
        // Re-running the search from a converged point changes the value
        // by less than 1e-10.
        let s = sphere();
        let center = s.point_from_chart(4.0, 1.9);
        let k = CurvatureField::LogBumps {
            base: 1.0,
            bumps: vec![LogBump {
                center,
                amplitude: 0.7,
                width: 0.5,
            }],
        };
        let data = ProblemData::new(s, k, SingularData::empty(), 1).unwrap();
        let cfg = SearchConfig {
            multistarts: 8,
            seed: 5,
            ..SearchConfig::default()
        };
        let reports = find_critical_points(&data, &cfg, SearchMode::Max, &[]).unwrap();
        let top = &reports[0];
        let again = local_search(&data, &cfg, SearchMode::Any, top.config.clone()).unwrap();
        let v1 = psi(&data, &top.config).unwrap();
        let v2 = psi(&data, &again).unwrap();
        assert!((v1 - v2).abs() < 1e-10);
    }

    #[test]
    fn config_distance_is_permutation_invariant() {
        let s = sphere();
        let data = ProblemData::new(
            s.clone(),
            CurvatureField::Constant(1.0),
            SingularData::empty(),
            3,
        )
        .unwrap();
        let a = vec![
            s.point_from_chart(0.1, 0.5),
            s.point_from_chart(1.0, 1.0),
            s.point_from_chart(2.0, 2.0),
        ];
        let mut b = a.clone();
        b.rotate_left(1);
        assert!(config_distance(&data, &a, &b) < 1e-14);
    }
}
