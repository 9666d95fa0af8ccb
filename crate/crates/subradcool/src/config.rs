//! JSON run configuration. Frequencies and rates are in units of the
//! single-atom linewidth γ₀, lengths in units of the transition wavelength
//! λ₀.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use subradcool_core::green::{Polarization, Vec3};
use subradcool_core::lindblad::Truncation;
use subradcool_core::numerics::C64;
use subradcool_core::scenarios::{ArraySpec, Geometry, Pipeline, TrapProfile};
use subradcool_core::spin::Convention;

use crate::RunError;

const Z: Vec3 = [0.0, 0.0, 1.0];

fn default_axis() -> Vec3 {
    Z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub array: ArrayConfig,
    pub drive: DriveConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub convention: ConventionConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// Collective spectrum of the array at the configured detuning.
    Spectrum,
    /// Effective-model steady state over a list of mean trap frequencies.
    CoolEffective {
        #[serde(default)]
        nu_bar_values: Option<Vec<f64>>,
    },
    /// Full-model steady state and cooling curve over the same grid.
    CoolFull {
        #[serde(default)]
        nu_bar_values: Option<Vec<f64>>,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// Two-atom map over gradient `delta_nu` and drive strength.
    RegimeMap {
        delta_nu: Vec<f64>,
        omega: Vec<f64>,
        #[serde(default)]
        pipeline: PipelineConfig,
    },
    /// Critical cooling rates from a drive-strength scan.
    CriticalRate,
    /// Target emitter at the center of a ring; `delta_ts` defaults to the
    /// dark detuning.
    RingTarget {
        #[serde(default)]
        delta_ts: Option<f64>,
    },
    /// Cools `resonant` while the remaining atoms are shifted by
    /// `block_detuning`.
    Sequential {
        resonant: Vec<usize>,
        block_detuning: f64,
        #[serde(default)]
        pipeline: PipelineConfig,
    },
    /// Normally distributed trap frequencies around the profile's mean.
    Ensemble {
        sigma: f64,
        realizations: usize,
        #[serde(default)]
        pipeline: PipelineConfig,
    },
}

fn default_samples() -> usize {
    80
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometryConfig {
    Chain { n: usize, d: f64 },
    Ring { n: usize, radius: f64 },
    RingSpacing { n: usize, d: f64 },
    Square { n: usize, d: f64 },
    RingPlusCenter { n: usize, radius: f64 },
}

impl From<GeometryConfig> for Geometry {
    fn from(g: GeometryConfig) -> Self {
        match g {
            GeometryConfig::Chain { n, d } => Geometry::Chain { n, d },
            GeometryConfig::Ring { n, radius } => Geometry::Ring { n, radius },
            GeometryConfig::RingSpacing { n, d } => Geometry::RingSpacing { n, d },
            GeometryConfig::Square { n, d } => Geometry::Square { n, d },
            GeometryConfig::RingPlusCenter { n, radius } => Geometry::RingPlusCenter { n, radius },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolarizationConfig {
    X,
    Y,
    Z,
    Circular,
    /// Complex components as `[re, im]` pairs, normalized on use.
    Custom([[f64; 2]; 3]),
}

impl PolarizationConfig {
    pub fn resolve(&self) -> Result<Polarization, RunError> {
        Ok(match *self {
            PolarizationConfig::X => Polarization::x(),
            PolarizationConfig::Y => Polarization::y(),
            PolarizationConfig::Z => Polarization::z(),
            PolarizationConfig::Circular => Polarization::circular_xy(),
            PolarizationConfig::Custom(v) => Polarization::new(v.map(|[re, im]| C64::new(re, im)))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TrapConfig {
    Uniform { nu_bar: f64 },
    Gradient { nu_bar: f64, delta_nu: f64 },
    /// Seeded from the run seed.
    Normal { nu_bar: f64, sigma: f64 },
}

impl TrapConfig {
    pub fn nu_bar(&self) -> f64 {
        match *self {
            TrapConfig::Uniform { nu_bar } | TrapConfig::Gradient { nu_bar, .. } | TrapConfig::Normal { nu_bar, .. } => nu_bar,
        }
    }

    pub fn with_nu_bar(self, nu: f64) -> Self {
        match self {
            TrapConfig::Uniform { .. } => TrapConfig::Uniform { nu_bar: nu },
            TrapConfig::Gradient { delta_nu, .. } => TrapConfig::Gradient { nu_bar: nu, delta_nu },
            TrapConfig::Normal { sigma, .. } => TrapConfig::Normal { nu_bar: nu, sigma },
        }
    }

    fn profile(&self, seed: u64) -> TrapProfile {
        match *self {
            TrapConfig::Uniform { nu_bar } => TrapProfile::Uniform { nu_bar },
            TrapConfig::Gradient { nu_bar, delta_nu } => TrapProfile::Gradient { nu_bar, delta_nu },
            TrapConfig::Normal { nu_bar, sigma } => TrapProfile::Normal { nu_bar, sigma, seed },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub geometry: GeometryConfig,
    pub polarization: PolarizationConfig,
    #[serde(default = "default_axis")]
    pub motion_axis: Vec3,
    pub trap: TrapConfig,
    pub eta: f64,
}

impl ArrayConfig {
    pub fn spec(&self, seed: u64) -> Result<ArraySpec, RunError> {
        Ok(ArraySpec {
            geometry: self.geometry.into(),
            polarization: self.polarization.resolve()?,
            axis: self.motion_axis,
            profile: self.trap.profile(seed),
            eta: self.eta,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Detuning {
    Value(f64),
    Keyword(DetuningKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetuningKeyword {
    /// Red sideband of the narrowest collective mode.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub omega: f64,
    #[serde(default = "default_axis")]
    pub direction: Vec3,
    pub detuning: Detuning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum TruncationConfig {
    #[default]
    Shared,
    PhononCap(usize),
    PerAtomCutoff(usize),
}

impl From<TruncationConfig> for Truncation {
    fn from(t: TruncationConfig) -> Self {
        match t {
            TruncationConfig::Shared => Truncation::SharedSingleExcitation,
            TruncationConfig::PhononCap(n) => Truncation::PhononCap(n),
            TruncationConfig::PerAtomCutoff(n) => Truncation::PerAtomCutoff(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineConfig {
    #[default]
    Effective,
    Full,
}

impl PipelineConfig {
    pub fn resolve(self, truncation: TruncationConfig) -> Pipeline {
        match self {
            PipelineConfig::Effective => Pipeline::Effective,
            PipelineConfig::Full => Pipeline::Full(truncation.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionConfig {
    #[default]
    MainText,
    AppendixB,
}

impl From<ConventionConfig> for Convention {
    fn from(c: ConventionConfig) -> Self {
        match c {
            ConventionConfig::MainText => Convention::MainText,
            ConventionConfig::AppendixB => Convention::AppendixB,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// Reads a config, or the `config` record of a previous run's summary.
pub fn load(path: &Path) -> Result<RunConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Schema(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| RunError::Schema(format!("{}: {e}", path.display())))?;
    let is_summary = value.get("subradcool_version").is_some();
    let record = if is_summary { value.get("config").cloned().unwrap_or_default() } else { value };
    serde_json::from_value(record).map_err(|e| RunError::Schema(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(v: serde_json::Value) -> Result<RunConfig, serde_json::Error> {
        serde_json::from_value(v)
    }

    fn base() -> serde_json::Value {
        json!({
            "experiment": { "kind": "spectrum" },
            "array": { "geometry": { "kind": "chain", "n": 2, "d": 0.2 }, "polarization": "y", "trap": { "kind": "uniform", "nu_bar": 20.0 }, "eta": 0.02 },
            "drive": { "omega": 1e-3, "detuning": "auto" },
        })
    }

    #[test]
    fn defaults_fill_optional_fields() {
        let c = parse(base()).unwrap();
        assert_eq!(c.truncation, TruncationConfig::Shared);
        assert_eq!(c.convention, ConventionConfig::MainText);
        assert_eq!(c.seed, 0);
        assert_eq!(c.drive.detuning, Detuning::Keyword(DetuningKeyword::Auto));
        assert!(c.output.dir.is_none());
    }

    #[test]
    fn numeric_detuning_and_truncations() {
        let mut v = base();
        v["drive"]["detuning"] = json!(-20.0);
        v["truncation"] = json!({ "per-atom-cutoff": 3 });
        let c = parse(v).unwrap();
        assert_eq!(c.drive.detuning, Detuning::Value(-20.0));
        assert_eq!(Truncation::from(c.truncation), Truncation::PerAtomCutoff(3));
    }

    #[test]
    fn unknown_and_malformed_fields_rejected() {
        let mut v = base();
        v["array"]["spin"] = json!(1);
        assert!(parse(v).is_err());
        let mut v = base();
        v["drive"]["detuning"] = json!("blue");
        assert!(parse(v).is_err());
        let mut v = base();
        v["experiment"] = json!({ "kind": "teleport" });
        assert!(parse(v).is_err());
    }

    #[test]
    fn serialized_config_parses_back() {
        let mut v = base();
        v["experiment"] = json!({ "kind": "ensemble", "sigma": 1e-3, "realizations": 4, "pipeline": "full" });
        v["truncation"] = json!({ "phonon-cap": 2 });
        let c = parse(v).unwrap();
        let back = parse(serde_json::to_value(&c).unwrap()).unwrap();
        assert_eq!(c, back);
    }
}
