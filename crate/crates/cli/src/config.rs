//! Experiment configuration: a flat JSON object, validated and completed
//! with per-experiment defaults before anything runs.

use std::fmt;
use std::path::Path;

use bqstab::kernels::{FamilyName, KernelConfig};
use bqstab::measures::{MeasureConfig, MeasureKind};
use bqstab::{Kernel, Measure};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[serde(rename = "fig2_optimal_2d")]
    #[value(name = "fig2_optimal_2d")]
    Fig2Optimal2d,
    Fig3RandomPositivity,
    Fig4Runge,
    Fig5MaternRandom,
    Sec45Singularity,
    Custom,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig2Optimal2d => "fig2_optimal_2d",
            ExperimentKind::Fig3RandomPositivity => "fig3_random_positivity",
            ExperimentKind::Fig4Runge => "fig4_runge",
            ExperimentKind::Fig5MaternRandom => "fig5_matern_random",
            ExperimentKind::Sec45Singularity => "sec45_singularity",
            ExperimentKind::Custom => "custom",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How `custom` runs pick their points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignSource {
    Random,
    Equispaced,
}

/// Every field is optional in the file; [`ExperimentConfig::resolve`] fills
/// in the defaults of the chosen experiment so the manifest records exactly
/// what ran.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    /// Explicit list of sizes; overrides `n_min`, `n_max` and `stride`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_min: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    /// Monte Carlo repetitions per size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    /// Length-scale sweep for the Runge experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengthscales: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
    /// Fill-distance grid nodes per axis in d >= 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<usize>,
    /// Probe trials for the singularity experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSource>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("cannot parse config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.experiment.ok_or_else(|| CliError::Config("no experiment named".into()))
    }

    /// Fills the defaults of the named experiment and validates the result.
    ///
    /// `full` switches the positivity sweep to stride 1.
    pub fn resolve(&self, full: bool) -> Result<ExperimentConfig> {
        let kind = self.kind()?;
        let mut c = self.clone();
        c.seed.get_or_insert(0);
        match kind {
            ExperimentKind::Fig2Optimal2d => {
                c.kernel.get_or_insert_with(|| gaussian(1.0, 2));
                c.measure.get_or_insert_with(|| std_gaussian(2));
                c.n_values.get_or_insert_with(|| vec![6, 11, 16, 20]);
                c.restarts.get_or_insert(20);
                c.jitter.get_or_insert(bqstab::bq::OPTIMIZATION_JITTER);
            }
            ExperimentKind::Fig3RandomPositivity => {
                c.kernel.get_or_insert_with(|| gaussian(1.5, 4));
                c.measure.get_or_insert_with(|| std_gaussian(4));
                if c.n_values.is_none() {
                    c.n_min.get_or_insert(2);
                    c.n_max.get_or_insert(1000);
                    if full {
                        c.stride = Some(1);
                    }
                    c.stride.get_or_insert(10);
                }
                c.runs.get_or_insert(50);
            }
            ExperimentKind::Fig4Runge => {
                c.measure.get_or_insert_with(unit_interval);
                c.lengthscales.get_or_insert_with(|| vec![0.2, 0.4, 0.8]);
                if c.n_values.is_none() {
                    c.n_min.get_or_insert(2);
                    c.n_max.get_or_insert(40);
                    c.stride.get_or_insert(1);
                }
            }
            ExperimentKind::Fig5MaternRandom => {
                c.kernel.get_or_insert(KernelConfig {
                    family: FamilyName::Matern,
                    lengthscale: Some(0.5),
                    smoothness: Some(1.5),
                    hardy_r: None,
                    dim: 1,
                });
                c.measure.get_or_insert_with(unit_interval);
                if c.n_values.is_none() {
                    c.n_min.get_or_insert(2);
                    c.n_max.get_or_insert(200);
                    c.stride.get_or_insert(1);
                }
                c.runs.get_or_insert(100);
            }
            ExperimentKind::Sec45Singularity => {
                c.trials.get_or_insert(100);
            }
            ExperimentKind::Custom => {
                if c.kernel.is_none() || c.measure.is_none() {
                    return Err(CliError::Config("custom runs need both a kernel and a measure".into()));
                }
                if c.n_values.is_none() {
                    c.n_min.get_or_insert(2);
                    c.n_max.get_or_insert(20);
                    c.stride.get_or_insert(1);
                }
                c.runs.get_or_insert(1);
                c.design.get_or_insert(DesignSource::Random);
                c.jitter.get_or_insert(0.0);
            }
        }
        if c.grid_resolution.is_none() && c.measure.as_ref().is_some_and(|m| m.dim >= 2) {
            c.grid_resolution = Some(101);
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        let bad = |m: String| Err(CliError::Config(m));
        let kernel = match &self.kernel {
            Some(k) => Some(Kernel::<f64>::from_config(k).map_err(|e| CliError::Config(format!("kernel: {e}")))?),
            None => None,
        };
        let measure = match &self.measure {
            Some(m) => Some(Measure::<f64>::from_config(m).map_err(|e| CliError::Config(format!("measure: {e}")))?),
            None => None,
        };
        if let (Some(k), Some(m)) = (&kernel, &measure) {
            if k.dim() != m.dim() {
                return bad(format!("kernel dimension {} differs from measure dimension {}", k.dim(), m.dim()));
            }
        }
        let sizes = self.sizes();
        if sizes.is_empty() && kind != ExperimentKind::Sec45Singularity {
            return bad("no sizes to run".into());
        }
        if sizes.contains(&0) {
            return bad("sizes must be positive".into());
        }
        if self.stride == Some(0) {
            return bad("stride must be positive".into());
        }
        if let (Some(a), Some(b)) = (self.n_min, self.n_max) {
            if a > b {
                return bad(format!("n_min {a} exceeds n_max {b}"));
            }
        }
        if self.runs == Some(0) || self.trials == Some(0) || self.restarts == Some(0) {
            return bad("runs, trials and restarts must be positive".into());
        }
        if self.jitter.is_some_and(|j| !(j >= 0.0 && j.is_finite())) {
            return bad("jitter must be a finite non-negative number".into());
        }
        if self.grid_resolution.is_some_and(|g| g < 2) {
            return bad("grid_resolution must be at least 2".into());
        }
        if let Some(ls) = &self.lengthscales {
            if ls.is_empty() || ls.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
                return bad("lengthscales must be a non-empty list of positive numbers".into());
            }
        }
        match kind {
            ExperimentKind::Fig2Optimal2d if kernel.as_ref().is_some_and(|k| !k.is_differentiable()) => {
                bad("design optimisation needs a differentiable kernel".into())
            }
            ExperimentKind::Fig4Runge if !matches!(measure, Some(Measure::UniformBox(_))) || self.dim() != 1 => {
                bad("the Runge sweep runs on a one-dimensional uniform measure".into())
            }
            ExperimentKind::Fig5MaternRandom if self.dim() != 1 => {
                bad("the random-design stability sweep is one-dimensional".into())
            }
            ExperimentKind::Custom if self.design == Some(DesignSource::Equispaced) && self.dim() != 1 => {
                bad("equispaced designs are one-dimensional".into())
            }
            _ => Ok(()),
        }
    }

    fn dim(&self) -> usize {
        self.measure.as_ref().map_or(1, |m| m.dim)
    }

    /// The list of sizes this configuration sweeps, in increasing order.
    pub fn sizes(&self) -> Vec<usize> {
        if let Some(v) = &self.n_values {
            let mut v = v.clone();
            v.sort_unstable();
            v.dedup();
            return v;
        }
        match (self.n_min, self.n_max) {
            (Some(a), Some(b)) if a <= b => (a..=b).step_by(self.stride.unwrap_or(1).max(1)).collect(),
            _ => Vec::new(),
        }
    }
}

fn gaussian(l: f64, dim: usize) -> KernelConfig {
    KernelConfig { family: FamilyName::Gaussian, lengthscale: Some(l), smoothness: None, hardy_r: None, dim }
}

fn std_gaussian(dim: usize) -> MeasureConfig {
    MeasureConfig { kind: MeasureKind::StdGaussian, dim, lower: Vec::new(), upper: Vec::new() }
}

fn unit_interval() -> MeasureConfig {
    MeasureConfig { kind: MeasureKind::UniformBox, dim: 1, lower: vec![0.0], upper: vec![1.0] }
}
