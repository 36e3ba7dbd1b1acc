//! Configuration schema and its translation into problem data.
//!
//! Chart coordinates in configs: the sphere uses (longitude, colatitude)
//! in radians; the torus uses fundamental-domain coordinates (x, y).
//! Unknown keys are errors unless `--lenient` downgrades them to warnings.

use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use sll_core::energy::Configuration;
use sll_core::geometry::{Resolution, SurfaceKind, SurfaceModel, SurfacePoint};
use sll_core::problem::{CurvatureField, LogBump, ProblemData, SingularData};
use sll_core::search::{SearchConfig, SearchMode};
use sll_core::spectral::GridField;

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub surface: SurfaceSection,
    pub curvature: CurvatureSection,
    #[serde(default)]
    pub singularities: Vec<SingularitySection>,
    pub n_points: usize,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minmax: Option<MinMaxSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<ClassesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSection {
    Sphere {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<ResolutionSection>,
    },
    Torus {
        periods: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<ResolutionSection>,
    },
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ResolutionSection {
    pub n_u: usize,
    pub n_v: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurvatureSection {
    Constant {
        value: f64,
    },
    CosPolar,
    RadialGaussian {
        terms: Vec<RadialTermSection>,
    },
    LogBumps {
        base: f64,
        bumps: Vec<LogBumpSection>,
    },
    Product {
        factors: Vec<CurvatureSection>,
    },
    Sum {
        terms: Vec<CurvatureSection>,
    },
    /// Expression over chart coordinates `u`, `v`, sampled on the grid and
    /// differentiated spectrally (must be band-limited at the configured
    /// degree).
    Expression {
        expression: String,
    },
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RadialTermSection {
    pub center: [f64; 2],
    pub coefficient: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LogBumpSection {
    pub center: [f64; 2],
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SingularitySection {
    pub position: [f64; 2],
    pub alpha: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    pub multistarts: usize,
    pub grad_tol: f64,
    pub hess_tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub barrier_m: f64,
    pub curve_samples: usize,
    pub dedup_dist: f64,
    pub initial_step: f64,
    pub mode: String,
}

impl Default for SearchSection {
    fn default() -> Self {
        let d = SearchConfig::<f64>::default();
        SearchSection {
            multistarts: d.multistarts,
            grad_tol: d.grad_tol,
            hess_tol: d.hess_tol,
            max_iters: d.max_iters,
            seed: d.seed,
            barrier_m: d.barrier_m,
            curve_samples: d.curve_samples,
            dedup_dist: d.dedup_dist,
            initial_step: d.initial_step,
            mode: "max".into(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MinMaxSection {
    /// "ray_genus0" | "torus_curve" | "contractible_circles".
    pub case: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_delta_sweep")]
    pub delta_sweep: Vec<f64>,
    #[serde(default = "default_ball_radius")]
    pub ball_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Bubble centres; when absent the best stable critical point from the
    /// search stage is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<[f64; 2]>>,
}

fn default_delta_sweep() -> Vec<f64> {
    vec![0.05, 0.02, 0.01]
}

fn default_ball_radius() -> f64 {
    0.3
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            delta_sweep: default_delta_sweep(),
            ball_radius: default_ball_radius(),
            rho: None,
            centers: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClassesSection {
    pub base: Vec<[f64; 2]>,
    pub radius: f64,
    pub alpha_star: f64,
    pub alpha_sup: f64,
    /// "plus" | "minus".
    pub sign: String,
    #[serde(default = "default_class_multistarts")]
    pub multistarts: usize,
}

fn default_class_multistarts() -> usize {
    32
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

/// Parse the configuration document. In strict mode unknown keys are
/// errors; with `lenient` they are reported as warnings and dropped.
pub fn parse_config(text: &str, lenient: bool) -> Result<(RunConfig, Vec<String>)> {
    let mut warnings = Vec::new();
    let config: RunConfig = if lenient {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_ignored::deserialize(de, |path| {
            warnings.push(format!("ignoring unknown config key `{path}`"));
        })
        .map_err(|e| anyhow!("config parse error: {e}"))?
    } else {
        serde_json::from_str(text).map_err(|e| anyhow!("config parse error: {e}"))?
    };
    validate(&config)?;
    Ok((config, warnings))
}

fn validate(config: &RunConfig) -> Result<()> {
    if config.n_points == 0 {
        bail!("semantic error: n_points must be at least 1");
    }
    for (i, s) in config.singularities.iter().enumerate() {
        if s.alpha <= -1.0 {
            bail!(
                "semantic error: singularities[{i}].alpha = {} violates alpha > -1",
                s.alpha
            );
        }
        if s.alpha == 0.0 {
            bail!("semantic error: singularities[{i}].alpha = 0 carries no singular part");
        }
    }
    for (i, a) in config.singularities.iter().enumerate() {
        for (j, b) in config.singularities.iter().enumerate().skip(i + 1) {
            if a.position == b.position {
                bail!("semantic error: singular points {i} and {j} coincide");
            }
        }
    }
    match config.search.mode.as_str() {
        "min" | "max" | "any" => {}
        other => bail!("semantic error: search.mode must be min|max|any, got `{other}`"),
    }
    if let Some(mm) = &config.minmax {
        match mm.case.as_str() {
            "ray_genus0" | "torus_curve" | "contractible_circles" => {}
            other => bail!("semantic error: minmax.case `{other}` is not a known construction"),
        }
    }
    if let Some(cl) = &config.classes {
        if cl.alpha_star > cl.alpha_sup {
            bail!("semantic error: classes.alpha_star exceeds classes.alpha_sup");
        }
        match cl.sign.as_str() {
            "plus" | "minus" => {}
            other => bail!("semantic error: classes.sign must be plus|minus, got `{other}`"),
        }
    }
    Ok(())
}

/// Build the surface model from the config.
pub fn build_surface(config: &RunConfig) -> Result<Arc<SurfaceModel<f64>>> {
    let model = match &config.surface {
        SurfaceSection::Sphere { resolution } => {
            let res = resolution
                .as_ref()
                .map(|r| Resolution {
                    n_u: r.n_u,
                    n_v: r.n_v,
                    degree: r.degree.unwrap_or_else(|| (r.n_u - 1).min(r.n_v / 2 - 1)),
                })
                .unwrap_or_else(Resolution::sphere_default);
            SurfaceModel::unit_sphere(res)
        }
        SurfaceSection::Torus {
            periods,
            resolution,
        } => {
            if periods[0] <= 0.0 || periods[1] <= 0.0 {
                bail!("semantic error: torus periods must be positive");
            }
            let res = resolution
                .as_ref()
                .map(|r| Resolution {
                    n_u: r.n_u,
                    n_v: r.n_v,
                    degree: r.degree.unwrap_or_else(|| (r.n_u / 2 - 1).min(r.n_v / 2 - 1)),
                })
                .unwrap_or_else(Resolution::torus_default);
            SurfaceModel::flat_torus(periods[0], periods[1], res)
        }
    };
    Ok(Arc::new(model))
}

fn build_curvature(
    section: &CurvatureSection,
    model: &Arc<SurfaceModel<f64>>,
) -> Result<CurvatureField<f64>> {
    Ok(match section {
        CurvatureSection::Constant { value } => CurvatureField::Constant(*value),
        CurvatureSection::CosPolar => CurvatureField::CosPolar,
        CurvatureSection::RadialGaussian { terms } => CurvatureField::RadialGaussian {
            terms: terms
                .iter()
                .map(|t| (model.point_from_chart(t.center[0], t.center[1]), t.coefficient))
                .collect(),
        },
        CurvatureSection::LogBumps { base, bumps } => {
            if *base <= 0.0 {
                bail!("semantic error: log_bumps.base must be positive");
            }
            CurvatureField::LogBumps {
                base: *base,
                bumps: bumps
                    .iter()
                    .map(|b| LogBump {
                        center: model.point_from_chart(b.center[0], b.center[1]),
                        amplitude: b.amplitude,
                        width: b.width,
                    })
                    .collect(),
            }
        }
        CurvatureSection::Product { factors } => CurvatureField::Product(
            factors
                .iter()
                .map(|f| build_curvature(f, model))
                .collect::<Result<_>>()?,
        ),
        CurvatureSection::Sum { terms } => CurvatureField::Sum(
            terms
                .iter()
                .map(|f| build_curvature(f, model))
                .collect::<Result<_>>()?,
        ),
        CurvatureSection::Expression { expression } => {
            let expr: meval::Expr = expression
                .parse()
                .map_err(|e| anyhow!("semantic error: bad curvature expression: {e}"))?;
            let func = expr
                .bind2("u", "v")
                .map_err(|e| anyhow!("semantic error: expression must use only u, v: {e}"))?;
            let samples: Vec<f64> = model
                .quadrature()
                .nodes
                .iter()
                .map(|p| {
                    let (u, v) = model.chart_of_point(p);
                    func(u, v)
                })
                .collect();
            if samples.iter().any(|s| !s.is_finite()) {
                bail!("semantic error: curvature expression is not finite on the grid");
            }
            CurvatureField::Grid(Arc::new(GridField::from_samples(model, samples)))
        }
    })
}

/// Build the full problem instance.
pub fn build_problem(config: &RunConfig) -> Result<ProblemData<f64>> {
    let model = build_surface(config)?;
    let curvature = build_curvature(&config.curvature, &model)?;
    let points: Vec<SurfacePoint<f64>> = config
        .singularities
        .iter()
        .map(|s| model.point_from_chart(s.position[0], s.position[1]))
        .collect();
    let orders: Vec<f64> = config.singularities.iter().map(|s| s.alpha).collect();
    let singular = SingularData::new(&model, points, orders)
        .map_err(|e| anyhow!("semantic error: {e}"))?;
    ProblemData::new(model, curvature, singular, config.n_points)
        .map_err(|e| anyhow!("semantic error: {e}"))
}

/// The search knobs with CLI overrides applied.
pub fn build_search_config(
    config: &RunConfig,
    seed_override: Option<u64>,
    tol_override: Option<f64>,
) -> SearchConfig<f64> {
    let s = &config.search;
    SearchConfig {
        multistarts: s.multistarts,
        grad_tol: tol_override.unwrap_or(s.grad_tol),
        hess_tol: s.hess_tol,
        max_iters: s.max_iters,
        seed: seed_override.unwrap_or(s.seed),
        barrier_m: s.barrier_m,
        curve_samples: s.curve_samples,
        dedup_dist: s.dedup_dist,
        initial_step: s.initial_step,
    }
}

pub fn search_mode(config: &RunConfig) -> SearchMode {
    match config.search.mode.as_str() {
        "min" => SearchMode::Min,
        "any" => SearchMode::Any,
        _ => SearchMode::Max,
    }
}

/// Configuration of N points from chart coordinates.
pub fn config_points(
    data: &ProblemData<f64>,
    coords: &[[f64; 2]],
) -> Result<Configuration<f64>> {
    let pts: Vec<SurfacePoint<f64>> = coords
        .iter()
        .map(|c| data.surface().point_from_chart(c[0], c[1]))
        .collect();
    if pts.len() != data.n_points() {
        bail!(
            "semantic error: expected {} points, got {}",
            data.n_points(),
            pts.len()
        );
    }
    Ok(Configuration::assess(data, pts))
}

/// Surface kind label for reports.
pub fn surface_label(model: &SurfaceModel<f64>) -> String {
    match model.kind() {
        SurfaceKind::UnitSphere => "unit_sphere".into(),
        SurfaceKind::FlatTorus { a, b } => format!("flat_torus({a}, {b})"),
    }
}

pub fn read_config_file(path: &std::path::Path, lenient: bool) -> Result<(RunConfig, Vec<String>, String)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let (config, warnings) = parse_config(&text, lenient)?;
    Ok((config, warnings, text))
}
