//! Run configuration read from TOML.
//!
//! ```toml
//! [law]
//! name = "graded"
//! params = { a = 1.0 }
//!
//! [grid]
//! t = [0.0, 1.0]
//! t_count = 3
//! x1 = [-1.0, 1.0]
//! x1_count = 3
//! x2 = 0.0
//! x3 = 0.0
//!
//! [sampling]
//! n_f = 40
//! seed = 7
//!
//! [output]
//! dir = "out"
//! formats = ["json", "csv"]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use matdist_core::builtin::{build_law, LawParams};
use matdist_core::foliation::LeafVariant;
use matdist_core::grid::{BodyPoint, Grid};
use matdist_core::law::ConstitutiveLaw;
use matdist_core::remodel::{DEFAULT_TAU_MASS, DEFAULT_TAU_TR};
use matdist_core::sampling::AnalysisConfig;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

impl LawConfig {
    pub fn law_params(&self) -> LawParams {
        self.params
            .iter()
            .map(|(k, v)| {
                let values = match v {
                    ParamValue::Scalar(s) => vec![*s],
                    ParamValue::List(l) => l.clone(),
                };
                (k.clone(), values)
            })
            .collect()
    }

    pub fn build(&self) -> Result<Arc<dyn ConstitutiveLaw>, CliError> {
        build_law(&self.name, &self.law_params())
            .map_err(|e| CliError::Config(format!("[law]: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub t: [f64; 2],
    pub t_count: usize,
    pub x1: [f64; 2],
    pub x1_count: usize,
    pub x2: f64,
    pub x3: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            t: [0.0, 1.0],
            t_count: 3,
            x1: [-1.0, 1.0],
            x1_count: 3,
            x2: 0.0,
            x3: 0.0,
        }
    }
}

impl GridConfig {
    pub fn grid(&self) -> Grid {
        Grid::t_x1(
            self.t,
            self.t_count,
            self.x1,
            self.x1_count,
            self.x2,
            self.x3,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsomorphismConfig {
    /// `[t, x1, x2, x3]`.
    pub from: [f64; 4],
    pub to: [f64; 4],
    /// Also probe every grid point against the first one.
    pub probe: bool,
}

impl Default for IsomorphismConfig {
    fn default() -> Self {
        IsomorphismConfig {
            from: [0.0; 4],
            to: [0.0; 4],
            probe: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub seed: [f64; 4],
    pub variant: String,
    /// Directions in `(t, x1, x2, x3)`; empty traces the fiber basis.
    pub directions: Vec<[f64; 4]>,
    pub steps: usize,
    pub step: f64,
    pub freeze_time: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            seed: [0.0; 4],
            variant: "state_t".into(),
            directions: Vec::new(),
            steps: 20,
            step: 1e-2,
            freeze_time: false,
        }
    }
}

impl TraceConfig {
    pub fn leaf_variant(&self) -> Result<LeafVariant, CliError> {
        self.variant
            .parse()
            .map_err(|e| CliError::Config(format!("[trace] variant: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemodelConfig {
    /// Process CSV; relative paths resolve against the config file.
    pub process: Option<PathBuf>,
    pub particle: [f64; 3],
    pub rho0: f64,
    pub tau_mass: f64,
    pub tau_tr: f64,
}

impl Default for RemodelConfig {
    fn default() -> Self {
        RemodelConfig {
            process: None,
            particle: [0.0; 3],
            rho0: 1.0,
            tau_mass: DEFAULT_TAU_MASS,
            tau_tr: DEFAULT_TAU_TR,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub law: LawConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sampling: AnalysisConfig,
    #[serde(default)]
    pub isomorphism: IsomorphismConfig,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub remodel: RemodelConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory that relative paths resolve against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

pub fn point(c: [f64; 4]) -> BodyPoint {
    BodyPoint::from_coords(c)
}

impl RunConfig {
    /// Parses and validates; errors carry the TOML line and column.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Err(e) = self.sampling.validate() {
            return bad(format!("[sampling]: {e}"));
        }
        if self.grid.t_count == 0 || self.grid.x1_count == 0 {
            return bad("[grid]: t_count and x1_count must be at least 1".into());
        }
        let finite = self
            .grid
            .t
            .iter()
            .chain(&self.grid.x1)
            .chain([&self.grid.x2, &self.grid.x3]);
        if !finite.into_iter().all(|v| v.is_finite()) {
            return bad("[grid]: coordinates must be finite".into());
        }
        if !(self.trace.step > 0.0 && self.trace.step.is_finite()) {
            return bad(format!(
                "[trace]: step must be positive, got {}",
                self.trace.step
            ));
        }
        self.trace.leaf_variant()?;
        let r = &self.remodel;
        for (name, v) in [
            ("rho0", r.rho0),
            ("tau_mass", r.tau_mass),
            ("tau_tr", r.tau_tr),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("[remodel]: {name} must be positive, got {v}"));
            }
        }
        if self.output.formats.is_empty() {
            return bad("[output]: formats must not be empty".into());
        }
        self.law.build()?;
        Ok(())
    }

    /// Output directory, resolved against the config file when relative.
    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_toml_str("[law]\nname = \"homog_pair\"\n", "inline").unwrap();
        assert_eq!(cfg.grid, GridConfig::default());
        assert_eq!(cfg.sampling, AnalysisConfig::default());
        assert_eq!(cfg.grid.grid().len(), 9);
    }

    #[test]
    fn params_accept_scalars_and_lists() {
        let text =
            "[law]\nname = \"implant\"\nparams = { kappa = 0.2, d = [0,1,0, -1,0,0, 0,0,0] }\n";
        let cfg = RunConfig::from_toml_str(text, "inline").unwrap();
        let p = cfg.law.law_params();
        assert_eq!(p["kappa"], vec![0.2]);
        assert_eq!(p["d"].len(), 9);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = RunConfig::from_toml_str(
            "[law]\nname = \"homog_pair\"\n[grid]\nt_count = \"three\"\n",
            "cfg.toml",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 4"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn semantic_errors() {
        for text in [
            "[law]\nname = \"nope\"\n",
            "[law]\nname = \"graded\"\nparams = { b = 1.0 }\n",
            "[law]\nname = \"homog_pair\"\n[grid]\nt_count = 0\n",
            "[law]\nname = \"homog_pair\"\n[sampling]\ntau_rank = -1.0\n",
            "[law]\nname = \"homog_pair\"\n[sampling]\nunknown = 1\n",
            "[law]\nname = \"homog_pair\"\n[trace]\nvariant = \"sideways\"\n",
        ] {
            assert_eq!(
                RunConfig::from_toml_str(text, "inline")
                    .unwrap_err()
                    .exit_code(),
                2,
                "{text}"
            );
        }
    }
}
