//! TOML run configuration and the built-in presets.
//!
//! ```toml
//! [model]
//! id = "kk1d"            # kk1d | kk2d | linadv
//! # eta = 0.4            # kk2d kernel radius
//! # sigma = { kind = "constant", value = 1.0 }   # replaces every component's coefficient
//!
//! [grid]
//! lo = 0.0               # x bounds; 2D grids reuse them for y unless y_lo/y_hi are set
//! hi = 4.0
//! dx = 0.0125            # or n_cells = 320
//!
//! [scheme]
//! flux = "lf"            # lf | godunov
//! theta = 0.3333333333333333
//! cfl_safety = 1.0
//! quadrature = "mean"    # left | right | mean
//!
//! [run]
//! t_final = 0.3
//! snapshots = [0.0, 0.15, 0.3]
//! monitor = true
//! convolution_bounds = false
//! entropy_alphas = 0
//!
//! [initial]              # defaults to the model's experiment data
//! kind = "kk1d_blocks"
//!
//! [converge]
//! base_dx = 0.00625
//! levels = 4
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::SchemeConfig;
use crate::grid::{cells_for_spacing, Grid1d, Grid2d, InitialData};
use crate::model::{builtin, builtin_kk2d, ModelSpec, SigmaSpec, KK2D_DEFAULT_ETA};
use crate::solver1d::RunOptions;

pub const PRESETS: [&str; 2] = ["paper-1d", "paper-2d"];

/// Smallest number of table rows a convergence study may request.
pub const MIN_LEVELS: usize = 3;

pub const DEFAULT_RATE_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<SigmaSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cells: Option<usize>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_final: f64,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default = "default_true")]
    pub monitor: bool,
    #[serde(default)]
    pub convolution_bounds: bool,
    #[serde(default)]
    pub entropy_alphas: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_tolerance: Option<f64>,
    /// Recorded in the metadata; randomized tests read it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_margin() -> f64 {
    DEFAULT_RATE_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub base_dx: f64,
    pub levels: usize,
    /// Proven rate the measured rates must exceed by `margin`; defaults to
    /// the floor for the model's setting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper-1d" => Ok(RunConfig {
                model: ModelConfig {
                    id: "kk1d".into(),
                    eta: None,
                    sigma: None,
                },
                grid: GridConfig {
                    lo: 0.0,
                    hi: 4.0,
                    y_lo: None,
                    y_hi: None,
                    dx: Some(0.0125),
                    n_cells: None,
                },
                scheme: SchemeConfig::default(),
                run: RunSection {
                    t_final: 0.3,
                    snapshots: vec![0.0, 0.15, 0.3],
                    monitor: true,
                    convolution_bounds: false,
                    entropy_alphas: 0,
                    support_tolerance: None,
                    seed: None,
                },
                initial: Some(InitialData::Kk1dBlocks),
                converge: Some(ConvergeConfig {
                    base_dx: 0.00625,
                    levels: 4,
                    floor: None,
                    margin: DEFAULT_RATE_MARGIN,
                }),
                output: OutputConfig::default(),
            }),
            "paper-2d" => Ok(RunConfig {
                model: ModelConfig {
                    id: "kk2d".into(),
                    eta: Some(KK2D_DEFAULT_ETA),
                    sigma: None,
                },
                grid: GridConfig {
                    lo: -1.1,
                    hi: 1.1,
                    y_lo: None,
                    y_hi: None,
                    dx: Some(0.05),
                    n_cells: None,
                },
                scheme: SchemeConfig::default(),
                run: RunSection {
                    t_final: 0.1,
                    snapshots: vec![0.0, 0.1],
                    monitor: true,
                    convolution_bounds: false,
                    entropy_alphas: 0,
                    support_tolerance: None,
                    seed: None,
                },
                initial: Some(InitialData::Kk2dQuadrants),
                converge: Some(ConvergeConfig {
                    base_dx: 0.05,
                    levels: 4,
                    floor: None,
                    margin: DEFAULT_RATE_MARGIN,
                }),
                output: OutputConfig::default(),
            }),
            other => Err(Error::Config(format!(
                "unknown preset `{other}`, expected one of {}",
                PRESETS.join(", ")
            ))),
        }
    }

    /// The model with the configured overrides, validated.
    pub fn build_model(&self) -> Result<ModelSpec> {
        let mut model = match (self.model.id.as_str(), self.model.eta) {
            ("kk2d", Some(eta)) => builtin_kk2d(eta)?,
            (id, Some(_)) => {
                return Err(Error::Config(format!("`eta` applies to kk2d only, not `{id}`")));
            }
            (id, None) => builtin(id)?,
        };
        if let Some(sigma) = &self.model.sigma {
            for c in &mut model.components {
                c.sigma = sigma.clone();
            }
            // the closed-form exact solution assumes the builtin coefficient
            model.exact = None;
        }
        model.validate()?;
        self.scheme.validate(&model)?;
        Ok(model)
    }

    pub fn dimension(&self) -> Result<usize> {
        Ok(self.build_model()?.dimension())
    }

    /// Initial data, defaulting to the model's experiment.
    pub fn initial_data(&self) -> Result<InitialData> {
        if let Some(d) = &self.initial {
            return Ok(d.clone());
        }
        match self.model.id.as_str() {
            "kk1d" => Ok(InitialData::Kk1dBlocks),
            "kk2d" => Ok(InitialData::Kk2dQuadrants),
            "linadv" => Ok(InitialData::Box {
                lo: -0.5,
                hi: 0.0,
                values: vec![1.0],
            }),
            other => Err(Error::Config(format!("no default initial data for model `{other}`"))),
        }
    }

    fn spacing(&self) -> Result<f64> {
        let g = &self.grid;
        match (g.dx, g.n_cells) {
            (Some(dx), None) => Ok(dx),
            (None, Some(n)) if n > 0 => Ok((g.hi - g.lo) / n as f64),
            (None, Some(_)) => Err(Error::Config("grid.n_cells must be positive".into())),
            (Some(_), Some(_)) => Err(Error::Config("set either grid.dx or grid.n_cells, not both".into())),
            (None, None) => Err(Error::Config("grid needs dx or n_cells".into())),
        }
    }

    pub fn grid_1d(&self) -> Result<Grid1d> {
        self.grid_1d_at(self.spacing()?)
    }

    pub fn grid_1d_at(&self, dx: f64) -> Result<Grid1d> {
        if self.grid.y_lo.is_some() || self.grid.y_hi.is_some() {
            return Err(Error::Config("y bounds given for a one-dimensional model".into()));
        }
        Grid1d::with_spacing(self.grid.lo, self.grid.hi, dx)
    }

    pub fn grid_2d(&self) -> Result<Grid2d> {
        self.grid_2d_at(self.spacing()?)
    }

    pub fn grid_2d_at(&self, dx: f64) -> Result<Grid2d> {
        let g = &self.grid;
        let (y_lo, y_hi) = (g.y_lo.unwrap_or(g.lo), g.y_hi.unwrap_or(g.hi));
        // validates that dx divides both sides
        cells_for_spacing(g.hi - g.lo, dx)?;
        cells_for_spacing(y_hi - y_lo, dx)?;
        Grid2d::with_spacing(g.lo, g.hi, y_lo, y_hi, dx)
    }

    /// Square domain of a 2D convergence study.
    pub fn square_domain(&self) -> Result<(f64, f64)> {
        let g = &self.grid;
        let (y_lo, y_hi) = (g.y_lo.unwrap_or(g.lo), g.y_hi.unwrap_or(g.hi));
        if y_lo != g.lo || y_hi != g.hi {
            return Err(Error::Config(
                "two-dimensional convergence studies need a square domain".into(),
            ));
        }
        Ok((g.lo, g.hi))
    }

    pub fn run_options(&self) -> Result<RunOptions> {
        let r = &self.run;
        if !(r.t_final >= 0.0) || !r.t_final.is_finite() {
            return Err(Error::Config(format!(
                "run.t_final must be a nonnegative number, got {}",
                r.t_final
            )));
        }
        if let Some(bad) = r.snapshots.iter().find(|s| !(**s >= 0.0 && **s <= r.t_final)) {
            return Err(Error::Config(format!("snapshot time {bad} outside [0, {}]", r.t_final)));
        }
        Ok(RunOptions {
            t_final: r.t_final,
            snapshot_times: r.snapshots.clone(),
            monitor: r.monitor,
            convolution_bounds: r.convolution_bounds,
            entropy_alphas: r.entropy_alphas,
            support_tolerance: r.support_tolerance,
        })
    }

    pub fn converge_settings(&self) -> Result<&ConvergeConfig> {
        let c = self
            .converge
            .as_ref()
            .ok_or_else(|| Error::Config("missing [converge] section".into()))?;
        if c.levels < MIN_LEVELS {
            return Err(Error::Config(format!(
                "converge.levels = {} is too small: a study needs at least {MIN_LEVELS} levels",
                c.levels
            )));
        }
        if !(c.base_dx > 0.0) {
            return Err(Error::Config(format!(
                "converge.base_dx must be positive, got {}",
                c.base_dx
            )));
        }
        Ok(c)
    }

    pub fn output_dir(&self, cli_out: Option<&Path>) -> PathBuf {
        cli_out
            .map(Path::to_path_buf)
            .or_else(|| self.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::FluxFamily;
    use crate::kernel::QuadratureRule;

    #[test]
    fn presets_round_trip_through_toml() {
        for name in PRESETS {
            let c = RunConfig::preset(name).unwrap();
            let back = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
            assert_eq!(c, back);
        }
    }

    #[test]
    fn parses_documented_example() {
        let text = r#"
            [model]
            id = "kk1d"
            [grid]
            lo = 0.0
            hi = 4.0
            n_cells = 320
            [scheme]
            flux = "godunov"
            quadrature = "left"
            [run]
            t_final = 0.3
            snapshots = [0.0, 0.15, 0.3]
        "#;
        let c = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(c.scheme.flux, FluxFamily::Godunov);
        assert_eq!(c.scheme.quadrature, QuadratureRule::Left);
        assert_eq!(c.grid_1d().unwrap().n_cells, 320);
        assert!(c.run.monitor);
        assert_eq!(c.initial_data().unwrap(), InitialData::Kk1dBlocks);
    }

    #[test]
    fn unknown_keys_report_their_position() {
        let text = "[model]\nid = \"kk1d\"\ncolour = 3\n";
        let Err(Error::Config(m)) = RunConfig::from_toml_str(text) else {
            panic!("expected a config error");
        };
        assert!(m.contains("line 3"), "{m}");
    }

    #[test]
    fn hypothesis_violations_are_config_errors() {
        let mut c = RunConfig::preset("paper-1d").unwrap();
        c.scheme.theta = 0.7;
        assert!(matches!(c.build_model(), Err(Error::Config(_))));
        let mut c = RunConfig::preset("paper-1d").unwrap();
        c.model.sigma = Some(SigmaSpec::Constant { value: 0.0 });
        assert!(matches!(c.build_model(), Err(Error::InvalidModel(_))));
        let mut c = RunConfig::preset("paper-2d").unwrap();
        c.converge.as_mut().unwrap().levels = 1;
        assert!(matches!(c.converge_settings(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(RunConfig::preset("no-such-preset"), Err(Error::Config(_))));
    }
}
