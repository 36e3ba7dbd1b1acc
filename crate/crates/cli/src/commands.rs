//! The six pipelines behind the subcommands.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Result};

use sll_core::classes::{class_membership, ClassSign, ClassSpec};
use sll_core::energy::{a_fun, phi, psi, Configuration};
use sll_core::hypotheses::hypotheses;
use sll_core::minmax::{approx_minmax, build_retraction, RetractionCase};
use sll_core::problem::ProblemData;
use sll_core::search::{find_critical_points, SearchConfig};
use sll_core::verify::{assemble_bubble, concentration_measure, gauss_bonnet_check, pde_residual};

use crate::config::{
    build_problem, build_search_config, config_points, search_mode, surface_label, RunConfig,
};
use crate::report::{
    config_hash, fmt17, write_csv, write_report, ProblemSummary, RunReport, SurfaceSummary,
    VerifyReport, VerifyRow,
};

pub struct CommandContext<'a> {
    pub config: &'a RunConfig,
    pub config_text: &'a str,
    pub out_dir: &'a Path,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub no_timings: bool,
    pub warnings: Vec<String>,
}

#[derive(PartialEq, Eq)]
pub enum Outcome {
    Done,
    NoResult,
}

struct Stage {
    timings: BTreeMap<String, f64>,
    current: Option<(String, Instant)>,
}

impl Stage {
    fn new() -> Self {
        Stage {
            timings: BTreeMap::new(),
            current: None,
        }
    }

    fn begin(&mut self, name: &str) {
        self.end();
        self.current = Some((name.to_string(), Instant::now()));
    }

    fn end(&mut self) {
        if let Some((name, start)) = self.current.take() {
            self.timings
                .insert(name, start.elapsed().as_secs_f64() * 1e3);
        }
    }

    fn into_map(mut self) -> BTreeMap<String, f64> {
        self.end();
        self.timings
    }
}

fn base_report(
    command: &str,
    ctx: &CommandContext<'_>,
    data: &ProblemData<f64>,
    cfg: &SearchConfig<f64>,
) -> RunReport {
    let model = data.surface();
    let rho_geo = data.rho_geo();
    let cap = rho_geo.abs() + 8.0 * std::f64::consts::PI + 1.0;
    RunReport {
        command: command.into(),
        config_hash: config_hash(ctx.config_text),
        seed: cfg.seed,
        config: ctx.config.clone(),
        surface: SurfaceSummary {
            kind: surface_label(model),
            area: model.area(),
            euler_characteristic: model.euler_characteristic(),
            grid: (model.resolution().n_u, model.resolution().n_v),
            spectral_degree: model.resolution().degree,
        },
        problem: ProblemSummary {
            n_points: data.n_points(),
            singular_count: data.singular().len(),
            ell: data.ell(),
            chi_alpha: data.chi_alpha(),
            rho_geo,
            epsilon: 8.0 * std::f64::consts::PI * data.n_points() as f64 - rho_geo,
            rho_geo_in_gamma: data.gamma_contains(rho_geo, 1e-9),
            gamma_levels: data.gamma_set(cap),
        },
        warnings: if ctx.warnings.is_empty() {
            None
        } else {
            Some(ctx.warnings.clone())
        },
        hypotheses: None,
        critical_points: None,
        minmax: None,
        verify: None,
        class_certificate: None,
        timings_ms: None,
    }
}

fn finish(
    report: &mut RunReport,
    stage: Stage,
    ctx: &CommandContext<'_>,
) -> Result<()> {
    if !ctx.no_timings {
        report.timings_ms = Some(stage.into_map());
    }
    let path = write_report(ctx.out_dir, report)?;
    eprintln!("report written to {}", path.display());
    Ok(())
}

pub fn analyze(ctx: &CommandContext<'_>) -> Result<Outcome> {
    let mut stage = Stage::new();
    stage.begin("build_problem");
    let data = build_problem(ctx.config)?;
    let cfg = build_search_config(ctx.config, ctx.seed, ctx.tol);
    stage.begin("hypotheses");
    let rep = hypotheses(&data).map_err(|e| anyhow!(e))?;
    stage.begin("report");
    let mut report = base_report("analyze", ctx, &data, &cfg);
    report.hypotheses = Some(rep);
    finish(&mut report, stage, ctx)?;
    Ok(Outcome::Done)
}

pub fn landscape(ctx: &CommandContext<'_>) -> Result<Outcome> {
    let mut stage = Stage::new();
    stage.begin("build_problem");
    let data = build_problem(ctx.config)?;
    if data.n_points() != 1 {
        bail!("semantic error: the landscape export scans single-point configurations; set n_points = 1");
    }
    let cfg = build_search_config(ctx.config, ctx.seed, ctx.tol);
    stage.begin("landscape");
    let model = data.surface();
    let mut rows = Vec::with_capacity(model.quadrature().len());
    for node in &model.quadrature().nodes {
        let (u, v) = model.chart_of_point(node);
        let c = Configuration::assess(&data, vec![*node]);
        let (p, f, a) = if c.in_m_plus {
            (
                psi(&data, &c).unwrap_or(f64::NAN),
                phi(&data, &c).unwrap_or(f64::NAN),
                a_fun(&data, &c).unwrap_or(f64::NAN),
            )
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        };
        rows.push(format!(
            "{},{},{},{},{}",
            fmt17(u),
            fmt17(v),
            fmt17(p),
            fmt17(f),
            fmt17(a)
        ));
    }
    let path = write_csv(ctx.out_dir, "landscape.csv", "u,v,psi,phi,a_fun", &rows)?;
    eprintln!("landscape written to {}", path.display());
    stage.begin("report");
    let mut report = base_report("landscape", ctx, &data, &cfg);
    finish(&mut report, stage, ctx)?;
    Ok(Outcome::Done)
}

pub fn search(ctx: &CommandContext<'_>) -> Result<Outcome> {
    let mut stage = Stage::new();
    stage.begin("build_problem");
    let data = build_problem(ctx.config)?;
    let cfg = build_search_config(ctx.config, ctx.seed, ctx.tol);
    stage.begin("search");
    let reports = find_critical_points(&data, &cfg, search_mode(ctx.config), &[])
        .map_err(|e| anyhow!(e))?;
    stage.begin("report");
    let mut rows = Vec::new();
    for (i, rep) in reports.iter().enumerate() {
        for (j, p) in rep.config.points.iter().enumerate() {
            let (u, v) = data.surface().chart_of_point(p);
            rows.push(format!(
                "{i},{j},{},{},{},{},{},{},{:?},{},{},{:?}",
                fmt17(u),
                fmt17(v),
                fmt17(rep.value),
                fmt17(rep.grad_norm),
                fmt17(rep.hessian_spectrum[0]),
                fmt17(*rep.hessian_spectrum.last().unwrap()),
                rep.classification,
                rep.stable,
                fmt17(rep.a_value),
                rep.a_sign
            ));
        }
    }
    let path = write_csv(
        ctx.out_dir,
        "critical_points.csv",
        "index,point,u,v,psi,grad_norm,min_eig,max_eig,classification,stable,a_value,a_sign",
        &rows,
    )?;
    eprintln!("critical points written to {}", path.display());
    let empty = reports.is_empty();
    let mut report = base_report("search", ctx, &data, &cfg);
    report.critical_points = Some(reports);
    finish(&mut report, stage, ctx)?;
    Ok(if empty { Outcome::NoResult } else { Outcome::Done })
}

fn retraction_case(name: &str) -> RetractionCase {
    match name {
        "ray_genus0" => RetractionCase::RayGenus0,
        "torus_curve" => RetractionCase::TorusCurve,
        _ => RetractionCase::ContractibleCircles,
    }
}

pub fn minmax(ctx: &CommandContext<'_>) -> Result<Outcome> {
    let mut stage = Stage::new();
    stage.begin("build_problem");
    let data = build_problem(ctx.config)?;
    let section = ctx
        .config
        .minmax
        .as_ref()
        .ok_or_else(|| anyhow!("semantic error: the minmax command needs a `minmax` section"))?;
    let mut cfg = build_search_config(ctx.config, ctx.seed, ctx.tol);
    if let Some(m) = section.barrier_m {
        cfg.barrier_m = m;
    }
    if let Some(cs) = section.curve_samples {
        cfg.curve_samples = cs;
    }
    if let Some(sweeps) = section.sweeps {
        cfg.max_iters = sweeps;
    }
    stage.begin("retraction");
    let setup = build_retraction(&data, retraction_case(&section.case), &cfg)
        .map_err(|e| anyhow!(e))?;
    stage.begin("deformation");
    let outcome = approx_minmax(&data, &setup, &cfg).map_err(|e| anyhow!(e))?;
    stage.begin("report");
    let mut report = base_report("minmax", ctx, &data, &cfg);
    report.minmax = Some(outcome);
    finish(&mut report, stage, ctx)?;
    Ok(Outcome::Done)
}

pub fn verify(ctx: &CommandContext<'_>) -> Result<Outcome> {
    let mut stage = Stage::new();
    stage.begin("build_problem");
    let data = build_problem(ctx.config)?;
    let cfg = build_search_config(ctx.config, ctx.seed, ctx.tol);
    let section = ctx.config.verify.clone().unwrap_or_default();
    // Centres: explicit, or the best stable critical point.
    stage.begin("centers");
    let (centers, found_reports) = match &section.centers {
        Some(coords) => (config_points(&data, coords)?, None),
        None => {
            let reports = find_critical_points(&data, &cfg, search_mode(ctx.config), &[])
                .map_err(|e| anyhow!(e))?;
            let best = reports
                .iter()
                .position(|r| r.stable)
                .or(if reports.is_empty() { None } else { Some(0) });
            match best {
                None => {
                    let mut report = base_report("verify", ctx, &data, &cfg);
                    report.critical_points = Some(reports);
                    finish(&mut report, stage, ctx)?;
                    return Ok(Outcome::NoResult);
                }
                Some(i) => (reports[i].config.clone(), Some(reports)),
            }
        }
    };
    if !centers.in_m_plus {
        bail!("semantic error: verification centres are outside the admissible set");
    }
    let rho = section
        .rho
        .unwrap_or(8.0 * std::f64::consts::PI * data.n_points() as f64);
    stage.begin("sweep");
    let mut sweep = Vec::new();
    for &delta in &section.delta_sweep {
        let scales = vec![delta; centers.points.len()];
        let ansatz = assemble_bubble(&data, &centers, &scales).map_err(|e| anyhow!(e))?;
        let (masses, total) =
            concentration_measure(&data, &ansatz, rho, section.ball_radius)
                .map_err(|e| anyhow!(e))?;
        let residual = pde_residual(&data, &ansatz, rho).map_err(|e| anyhow!(e))?;
        let gap = gauss_bonnet_check(&data, &ansatz).map_err(|e| anyhow!(e))?;
        sweep.push(VerifyRow {
            delta,
            masses,
            total_mass: total,
            l2_residual: residual.l2_residual,
            dual_residual: residual.dual_residual,
            analytic_l2_residual: residual.analytic_l2_residual,
            j_rho: residual.j_rho,
            gauss_bonnet_gap: gap,
        });
    }
    stage.begin("report");
    let centers_chart: Vec<[f64; 2]> = centers
        .points
        .iter()
        .map(|p| {
            let (u, v) = data.surface().chart_of_point(p);
            [u, v]
        })
        .collect();
    let mut report = base_report("verify", ctx, &data, &cfg);
    report.critical_points = found_reports;
    report.verify = Some(VerifyReport {
        rho,
        ball_radius: section.ball_radius,
        centers: centers_chart,
        sweep,
    });
    finish(&mut report, stage, ctx)?;
    Ok(Outcome::Done)
}

pub fn classes(ctx: &CommandContext<'_>) -> Result<Outcome> {
    let mut stage = Stage::new();
    stage.begin("build_problem");
    let data = build_problem(ctx.config)?;
    let cfg = build_search_config(ctx.config, ctx.seed, ctx.tol);
    let section = ctx
        .config
        .classes
        .as_ref()
        .ok_or_else(|| anyhow!("semantic error: the classes command needs a `classes` section"))?;
    let base = config_points(&data, &section.base)?;
    let spec = ClassSpec {
        base: base.points,
        radius: section.radius,
        alpha_lo: section.alpha_star,
        alpha_hi: section.alpha_sup,
        sign: if section.sign == "minus" {
            ClassSign::Minus
        } else {
            ClassSign::Plus
        },
        multistarts: section.multistarts,
        seed: cfg.seed,
    };
    stage.begin("certificate");
    let cert = class_membership(&data, &spec).map_err(|e| anyhow!(e))?;
    let inconclusive = cert.inconclusive;
    stage.begin("report");
    let mut report = base_report("classes", ctx, &data, &cfg);
    report.class_certificate = Some(cert);
    finish(&mut report, stage, ctx)?;
    Ok(if inconclusive {
        Outcome::NoResult
    } else {
        Outcome::Done
    })
}
