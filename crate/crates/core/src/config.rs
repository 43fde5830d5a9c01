//! The run configuration file.
//!
//! One JSON object with a section per command. Every key is optional.
//!
//! ```json
//! {
//!   "params": {"m": 1, "b": 1, "T": 1, "hbar": 1, "kB": 1, "omega0": 0},
//!   "front": {"t_max": 100, "points": 200},
//!   "sde": {"n_traj": 1000, "t_end": 10, "force": {"kind": "free"}}
//! }
//! ```
//!
//! A CSV written by `tqdiff` is accepted too; its `# config:` header line is
//! read back, which is how a result file is reproduced.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::langevin::{Dynamics, ForceModel, InitialCondition};
use crate::moments::MomentKind;
use crate::pde::{PdeModel, PotentialSpec};
use crate::phys::OscillatorParams;
use crate::verify::Tier;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: OscillatorParams,
    pub front: FrontConfig,
    pub oscillator: OscillatorConfig,
    pub pde: PdeConfig,
    pub sde: SdeConfig,
    pub spectrum: SpectrumConfig,
    pub verify: VerifyConfig,
    /// Not echoed into result headers, so output location never changes
    /// file contents.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontConfig {
    /// Defaults to `1e-4 * t_max`.
    pub t_min: Option<f64>,
    pub t_max: f64,
    pub points: usize,
    /// Logarithmic time grid; linear otherwise.
    pub log: bool,
}

impl Default for FrontConfig {
    fn default() -> Self {
        Self {
            t_min: None,
            t_max: 100.0,
            points: 200,
            log: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillatorConfig {
    pub kind: MomentKind,
    pub sigma2_0: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for OscillatorConfig {
    fn default() -> Self {
        Self {
            kind: MomentKind::OscillatorThermal,
            sigma2_0: 0.0,
            t_max: 10.0,
            points: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeConfig {
    pub model: PdeModel,
    /// Defaults to the harmonic well of `params.omega0` for the potential
    /// models and to no potential otherwise.
    pub potential: Option<PotentialSpec>,
    pub n: usize,
    pub half_width: f64,
    pub center: f64,
    pub sigma2_0: f64,
    pub t_end: f64,
    pub outputs: usize,
    pub cfl: f64,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self {
            model: PdeModel::FreeThermal,
            potential: None,
            n: 512,
            half_width: 10.0,
            center: 0.0,
            sigma2_0: 0.5,
            t_end: 1.0,
            outputs: 10,
            cfl: crate::pde::PdeRun::DEFAULT_CFL,
        }
    }
}

impl PdeConfig {
    pub fn resolved_potential(&self, params: &OscillatorParams) -> PotentialSpec {
        match (&self.potential, self.model) {
            (Some(p), _) => p.clone(),
            (None, PdeModel::FreeThermal) => PotentialSpec::None,
            (None, _) => PotentialSpec::Harmonic {
                omega0: params.omega0,
                mass: params.bath.m,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeConfig {
    pub n_traj: usize,
    pub dt: Option<f64>,
    pub t_end: f64,
    pub seed: u64,
    pub mode: Dynamics,
    pub force: ForceModel,
    pub record_stride: usize,
    pub initial: InitialCondition,
    pub paths: usize,
    pub path_start: f64,
}

impl Default for SdeConfig {
    fn default() -> Self {
        Self {
            n_traj: 1000,
            dt: None,
            t_end: 10.0,
            seed: 0,
            mode: Dynamics::Overdamped,
            force: ForceModel::Free,
            record_stride: 10,
            initial: InitialCondition::default(),
            paths: 0,
            path_start: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Path CSV from `tqdiff sde`; defaults to `sde_paths.csv` in the
    /// output directory.
    pub input: Option<PathBuf>,
    /// Defaults to a quarter of the series length.
    pub max_lag: Option<usize>,
    pub segment_len: usize,
    pub overlap: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            input: None,
            max_lag: None,
            segment_len: 1024,
            overlap: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub tier: Tier,
    pub seed: u64,
    /// Defaults to `verify_report.json` in the output directory.
    pub report: Option<PathBuf>,
    /// Check ids to run; all when empty.
    pub checks: Vec<u8>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            tier: Tier::Quick,
            seed: 0,
            report: None,
            checks: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses a JSON config or the `# config:` line of a result CSV.
    pub fn parse(text: &str) -> Result<Self> {
        let json = if text.trim_start().starts_with('#') {
            text.lines()
                .find_map(|l| l.strip_prefix("# config:"))
                .ok_or_else(|| Error::Config("no `# config:` header line".into()))?
        } else {
            text
        };
        serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c = RunConfig::parse("{}").unwrap();
        assert_eq!(c.params, OscillatorParams::default());
        assert_eq!(c.front.points, 200);
    }

    #[test]
    fn params_use_short_names() {
        let c = RunConfig::parse(r#"{"params": {"T": 0.5, "kB": 2, "omega0": 3}}"#).unwrap();
        assert_eq!(c.params.bath.temperature, 0.5);
        assert_eq!(c.params.bath.kb, 2.0);
        assert_eq!(c.params.omega0, 3.0);
        assert_eq!(c.params.bath.m, 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            RunConfig::parse(r#"{"front": {"tmax": 3}}"#),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn echo_round_trips() {
        let mut c = RunConfig::default();
        c.sde.force = ForceModel::External { omega0: 2.0 };
        c.out_dir = Some("elsewhere".into());
        let header = format!("# tqdiff x\n# config: {}\nt\n1\n", c.to_json());
        let back = RunConfig::parse(&header).unwrap();
        assert_eq!(back.to_json(), c.to_json());
        assert!(back.out_dir.is_none());
    }
}
