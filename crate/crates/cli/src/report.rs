//! Run reports and file output. Reports are deterministic for a fixed
//! config and seed once timings are excluded; files are written through a
//! temp-and-rename so readers never observe partial output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use sll_core::classes::ClassCertificate;
use sll_core::hypotheses::HypothesisReport;
use sll_core::minmax::MinMaxOutcome;
use sll_core::search::CriticalPointReport;

use crate::config::RunConfig;

#[derive(Serialize)]
pub struct SurfaceSummary {
    pub kind: String,
    pub area: f64,
    pub euler_characteristic: i64,
    pub grid: (usize, usize),
    pub spectral_degree: usize,
}

#[derive(Serialize)]
pub struct ProblemSummary {
    pub n_points: usize,
    pub singular_count: usize,
    pub ell: usize,
    pub chi_alpha: f64,
    pub rho_geo: f64,
    /// ε = 8πN - ρ_geo.
    pub epsilon: f64,
    pub rho_geo_in_gamma: bool,
    /// Quantized blow-up levels up to ρ_geo + 8π.
    pub gamma_levels: Vec<f64>,
}

#[derive(Serialize)]
pub struct VerifyRow {
    pub delta: f64,
    pub masses: Vec<f64>,
    pub total_mass: f64,
    pub l2_residual: f64,
    pub dual_residual: f64,
    pub analytic_l2_residual: f64,
    pub j_rho: f64,
    pub gauss_bonnet_gap: f64,
}

#[derive(Serialize)]
pub struct VerifyReport {
    pub rho: f64,
    pub ball_radius: f64,
    pub centers: Vec<[f64; 2]>,
    pub sweep: Vec<VerifyRow>,
}

#[derive(Serialize)]
pub struct RunReport {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    pub surface: SurfaceSummary,
    pub problem: ProblemSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warnings: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<HypothesisReport<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_points: Option<Vec<CriticalPointReport<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minmax: Option<MinMaxOutcome<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_certificate: Option<ClassCertificate<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

pub fn config_hash(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write bytes atomically: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("cannot create {}", parent.display()))?;
        }
    }
    let tmp: PathBuf = path.with_extension(format!("tmp-{}", std::process::id()));
    std::fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("cannot move temp file into {}", path.display()))?;
    Ok(())
}

pub fn write_report(dir: &Path, report: &RunReport) -> Result<PathBuf> {
    let path = dir.join("report.json");
    let mut body = serde_json::to_string_pretty(report)?;
    body.push('\n');
    write_atomic(&path, body.as_bytes())?;
    Ok(path)
}

/// Print an IEEE double with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut body = String::with_capacity(rows.len() * 64 + header.len() + 1);
    body.push_str(header);
    body.push('\n');
    for row in rows {
        body.push_str(row);
        body.push('\n');
    }
    write_atomic(&path, body.as_bytes())?;
    Ok(path)
}
