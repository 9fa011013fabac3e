//! Run configuration: command-line flags, optionally layered over a JSON
//! config file, resolved against the loaded measure.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use rbmo_core::geometry::{default_beta, AnchorPolicy, FamilyParams};
use rbmo_core::measures::AtomicMeasure;
use rbmo_core::operators::{TruncationGrid, DEFAULT_CANCELLATION_CAP};
use rbmo_core::t1::CancellationPolicy;

use crate::error::CliError;
use crate::spec::{parse_cube_spec, parse_function_spec, parse_measure_spec};

/// Every tunable. Unset flags fall back to the config file, then to defaults.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Flags {
    /// JSON file with any of these settings (kebab-case keys).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// lebesgue:N[:m], cantor:depth[:ratio], or a measure JSON path.
    #[arg(long)]
    pub measure: Option<String>,
    /// Smallest cube side of the family ladder.
    #[arg(long)]
    pub ladder_base: Option<f64>,
    #[arg(long)]
    pub levels: Option<usize>,
    /// Anchor every k-th atom.
    #[arg(long)]
    pub anchor_stride: Option<usize>,
    #[arg(long, value_enum)]
    pub anchor_policy: Option<PolicyArg>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// cauchy1d, riesz, signed-power, unsigned-power, zero.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Coordinate projected by the riesz kernel.
    #[arg(long)]
    pub component: Option<usize>,
    /// Explicit truncation parameters (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Number of geometric truncation parameters when --eps is absent.
    #[arg(long)]
    pub eps_count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Inner cube, `c1,c2,...@side`.
    #[arg(long)]
    pub q: Option<String>,
    /// Outer cube, `c1,c2,...@side`.
    #[arg(long)]
    pub r: Option<String>,
    /// const:v, indicator-left-half, first-coordinate, log-distance-to-center,
    /// random-signs:seed, phi:atom.
    #[arg(long)]
    pub function: Option<String>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Atom indices used as base points.
    #[arg(long, value_delimiter = ',')]
    pub base_points: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// Random sign patterns in the function basket.
    #[arg(long)]
    pub random: Option<usize>,
    /// Sampled pairs and triples for kernel checks.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub cancellation_cap: Option<f64>,
    #[arg(long, value_enum)]
    pub cancellation_policy: Option<CancellationArg>,
    /// Eligibility threshold on K(2Q); defaults to the fitted threshold.
    #[arg(long)]
    pub k_min: Option<f64>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for CSV plot tables.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
    /// gen-measure: where to write the measure JSON.
    #[arg(long)]
    pub measure_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    Atoms,
    AtomsAndMidpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CancellationArg {
    Warn,
    Refuse,
}

macro_rules! layer {
    ($top:expr, $base:expr, $($field:ident),*) => {
        Flags { config: $top.config, $($field: $top.$field.or($base.$field)),* }
    };
}

impl Flags {
    /// Flags over the config file named by `--config`, if any.
    pub fn with_config_file(self) -> Result<Flags, CliError> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let file = read_config(&path)?;
        Ok(layer!(
            self, file, measure, ladder_base, levels, anchor_stride, anchor_policy, alpha, beta, kernel, component,
            eps, eps_count, seed, q, r, function, rho, base_points, radii, random, samples, cancellation_cap,
            cancellation_policy, k_min, out, csv_dir, measure_out
        ))
    }
}

pub fn parse_config_str(text: &str) -> Result<Flags, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
}

fn read_config(path: &Path) -> Result<Flags, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Fully resolved settings, embedded in every report.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    pub measure: String,
    pub ladder_base: f64,
    pub levels: usize,
    pub anchor_stride: usize,
    pub anchor_policy: AnchorPolicy,
    pub alpha: f64,
    pub beta: f64,
    pub kernel: String,
    pub component: usize,
    pub eps: Vec<f64>,
    pub seed: u64,
    pub q: Option<String>,
    pub r: Option<String>,
    pub function: String,
    pub rho: f64,
    pub base_points: Vec<usize>,
    pub radii: Vec<f64>,
    pub random: usize,
    pub samples: usize,
    pub cancellation_cap: f64,
    pub cancellation_policy: CancellationPolicy,
    pub k_min: Option<f64>,
}

/// The measure source named by the flags, before the rest is resolved.
pub fn measure_of(flags: &Flags) -> Result<AtomicMeasure, CliError> {
    let spec = flags.measure.as_deref().ok_or_else(|| CliError::Validation("--measure is required".into()))?;
    parse_measure_spec(spec)?.load()
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Validation(format!("{name} must be positive and finite, got {v}")))
    }
}

fn at_most(name: &str, v: usize, cap: usize) -> Result<usize, CliError> {
    if v > cap {
        return Err(CliError::Validation(format!("{name} = {v} exceeds {cap}")));
    }
    Ok(v)
}

impl RunConfig {
    pub fn resolve(flags: &Flags, mu: &AtomicMeasure) -> Result<Self, CliError> {
        let n = mu.growth_dim();
        let levels = flags.levels.unwrap_or(6);
        if levels == 0 || levels > 60 {
            return Err(CliError::Validation("levels must be in 1..=60".into()));
        }
        let diameter = mu.diameter().max(1e-12);
        let ladder_base = positive(
            "ladder-base",
            flags.ladder_base.unwrap_or(2.0 * diameter / 2f64.powi(levels as i32 - 1)),
        )?;
        let anchor_stride = flags.anchor_stride.unwrap_or(mu.len().div_ceil(16).max(1));
        if anchor_stride == 0 {
            return Err(CliError::Validation("anchor-stride must be at least 1".into()));
        }
        let alpha = flags.alpha.unwrap_or(10.0);
        let beta = flags.beta.unwrap_or_else(|| default_beta(alpha, n));
        if !(alpha > 1.0 && alpha.is_finite() && beta.is_finite() && beta > alpha.powf(n)) {
            return Err(CliError::Validation(format!(
                "need alpha > 1 and beta > alpha^n (alpha = {alpha}, beta = {beta}, n = {n})"
            )));
        }
        let eps = match &flags.eps {
            Some(e) => TruncationGrid::new(mu, e.clone())?.epsilons,
            None => TruncationGrid::geometric(mu, at_most("eps-count", flags.eps_count.unwrap_or(4), 1000)?)?.epsilons,
        };
        for spec in [&flags.q, &flags.r].into_iter().flatten() {
            let cube = parse_cube_spec(spec)?;
            if cube.dim() != mu.ambient_dim() {
                return Err(CliError::Validation(format!("cube '{spec}' has the wrong dimension")));
            }
        }
        let function = flags.function.clone().unwrap_or_else(|| "indicator-left-half".into());
        parse_function_spec(&function)?;
        let rho = flags.rho.unwrap_or(2.0);
        if !(rho > 1.0 && rho.is_finite()) {
            return Err(CliError::Validation(format!("rho must exceed 1, got {rho}")));
        }
        let base_points = match &flags.base_points {
            Some(b) => b.clone(),
            None => {
                let step = mu.len().div_ceil(4).max(1);
                (0..mu.len()).step_by(step).collect()
            }
        };
        if let Some(bad) = base_points.iter().find(|&&b| b >= mu.len()) {
            return Err(CliError::Validation(format!("base point {bad} is not an atom index")));
        }
        let radii = match &flags.radii {
            Some(r) => r.clone(),
            None => (1..=6).map(|k| diameter * 2f64.powi(-k)).collect(),
        };
        for &r in &radii {
            positive("radius", r)?;
        }
        let cancellation_cap = positive("cancellation-cap", flags.cancellation_cap.unwrap_or(DEFAULT_CANCELLATION_CAP))?;
        if let Some(k) = flags.k_min {
            if !k.is_finite() {
                return Err(CliError::Validation("k-min must be finite".into()));
            }
        }
        Ok(RunConfig {
            measure: flags.measure.clone().unwrap_or_default(),
            ladder_base,
            levels,
            anchor_stride,
            anchor_policy: match flags.anchor_policy {
                Some(PolicyArg::AtomsAndMidpoints) => AnchorPolicy::AtomsAndMidpoints,
                _ => AnchorPolicy::Atoms,
            },
            alpha,
            beta,
            kernel: flags.kernel.clone().unwrap_or_else(|| "cauchy1d".into()),
            component: flags.component.unwrap_or(0),
            eps,
            seed: flags.seed.unwrap_or(0),
            q: flags.q.clone(),
            r: flags.r.clone(),
            function,
            rho,
            base_points,
            radii,
            random: at_most("random", flags.random.unwrap_or(4), 10_000)?,
            samples: at_most("samples", flags.samples.unwrap_or(10_000), 10_000_000)?,
            cancellation_cap,
            cancellation_policy: match flags.cancellation_policy {
                Some(CancellationArg::Refuse) => CancellationPolicy::Refuse,
                _ => CancellationPolicy::Warn,
            },
            k_min: flags.k_min,
        })
    }

    pub fn family_params(&self) -> FamilyParams {
        FamilyParams::new(self.ladder_base, self.levels).stride(self.anchor_stride).policy(self.anchor_policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rbmo_core::measures::gen_lebesgue_grid;

    #[test]
    fn defaults_resolve_on_a_grid() {
        let mu = gen_lebesgue_grid(&[(0.0, 1.0)], 64).unwrap();
        let c = RunConfig::resolve(&Flags::default(), &mu).unwrap();
        assert_eq!(c.beta, 20.0);
        assert_eq!(c.anchor_stride, 4);
        assert_eq!(c.base_points, vec![0, 16, 32, 48]);
        assert_eq!(c.eps.len(), 4);
        assert!(c.ladder_base * 2f64.powi(c.levels as i32 - 1) >= 2.0 * mu.diameter());
    }

    #[test]
    fn rejects_out_of_range_settings() {
        let mu = gen_lebesgue_grid(&[(0.0, 1.0)], 64).unwrap();
        for text in [
            r#"{"beta": 10.0}"#,
            r#"{"eps-count": 100000}"#,
            r#"{"base-points": [64]}"#,
            r#"{"rho": 1.0}"#,
            r#"{"q": "0.5,0.5@0.1"}"#,
            r#"{"function": "phi"}"#,
            r#"{"ladder-base": -1.0}"#,
        ] {
            let flags = parse_config_str(text).unwrap();
            assert!(RunConfig::resolve(&flags, &mu).is_err(), "{text}");
        }
        assert!(parse_config_str(r#"{"config": "x.json"}"#).is_err());
    }
}
