//! Strict JSON run configuration.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::continuation::{Margins, ScalingSetup, Schedule};
use crate::discretize::RadialGrid;
use crate::error::{Error, Result};
use crate::geometry::ModelManifold;
use crate::minimize::MinimizeConfig;

/// Environment variable that may redirect the output directory.
pub const OUT_DIR_ENV: &str = "YAMABE_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub r_inner: f64,
    pub r_max: f64,
    #[serde(rename = "N")]
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightConfig {
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideConfig {
    pub record: usize,
    pub minimize: MinimizeConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub alpha: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(default)]
    pub overrides: Vec<OverrideConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuConfig {
    /// Additional truncation radii; the grid's own `r_max` is always included.
    pub r_max_sweep: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MuConfig {
    fn default() -> Self {
        Self { r_max_sweep: Vec::new(), tol: 1e-8, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QInfConfig {
    pub radii: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BubbleConfig {
    /// Defaults to `10 / r_max`.
    pub lambda_min: Option<f64>,
    /// Defaults to `1 / (10 h)`, keeping the bubble at least ten cells wide.
    pub lambda_max: Option<f64>,
    pub count: usize,
    /// Allowed relative gap to `Q(Sⁿ)`.
    pub tol: f64,
}

impl Default for BubbleConfig {
    fn default() -> Self {
        Self { lambda_min: None, lambda_max: None, count: 241, tol: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub model: String,
    pub r_max: f64,
    #[serde(rename = "N")]
    pub nodes: usize,
}

impl CaseConfig {
    fn new(model: &str, r_max: f64, nodes: usize) -> Self {
        Self { model: model.into(), r_max, nodes }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub model: String,
    pub r_max: f64,
    #[serde(rename = "N")]
    pub nodes: usize,
    pub alpha: f64,
    pub p: f64,
    pub fraction: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    /// Models of the monotonicity matrix, all on `[0, r_max]` with `N` nodes.
    pub models: Vec<String>,
    pub r_max: f64,
    #[serde(rename = "N")]
    pub nodes: usize,
    pub alphas: Vec<f64>,
    pub ps: Vec<f64>,
    pub tol: f64,
    pub scaling: ScalingSetup,
    pub q_mu: Vec<CaseConfig>,
    pub q_mu_tol: f64,
    /// Critical `α = 0` extremals checked for the max-point inequality and
    /// certified as `μ⁽¹⁾` witnesses.
    pub critical: Vec<CaseConfig>,
    pub max_point_tol: f64,
    pub certify_tol: f64,
    pub decay: Vec<DecayConfig>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            models: vec!["flat3".into(), "cylbump3:c=0.5".into()],
            r_max: 10.0,
            nodes: 1000,
            alphas: vec![0.0, 0.2, 0.5],
            ps: vec![2.0, 4.0, 5.5],
            tol: 1e-6,
            scaling: ScalingSetup { n: 3, s: 4.0, r1: 4.0, r2: 8.0, nodes: 400, tol: 0.01 },
            q_mu: vec![
                CaseConfig::new("sphere3", std::f64::consts::PI, 500),
                CaseConfig::new("flat3", 10.0, 500),
                CaseConfig::new("hyperbolic3", 20.0, 500),
            ],
            q_mu_tol: 1e-8,
            critical: vec![CaseConfig::new("sphere3", std::f64::consts::PI, 500)],
            max_point_tol: 1e-2,
            certify_tol: 1e-6,
            decay: vec![DecayConfig {
                model: "flat3".into(),
                r_max: 30.0,
                nodes: 600,
                alpha: 0.5,
                p: 4.0,
                fraction: 0.1,
                tol: 0.05,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Write `field.csv` where a nodal field exists.
    pub field_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, field_csv: true }
    }
}

/// One JSON document configuring every subcommand; each command reads the
/// sections it needs.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub weight: WeightConfig,
    /// Exponent for `q`; defaults to `p_crit`.
    pub p: Option<f64>,
    #[serde(default)]
    pub minimize: MinimizeConfig,
    pub schedule: Option<ScheduleConfig>,
    #[serde(default)]
    pub margins: Margins,
    #[serde(default)]
    pub mu: MuConfig,
    #[serde(default)]
    pub qinf: QInfConfig,
    #[serde(default)]
    pub bubble: BubbleConfig,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.minimize.validate()?;
        if let Some(label) = &cfg.model {
            ModelManifold::<f64>::from_label(label)?;
        }
        if !(cfg.weight.alpha >= 0.0) {
            return Err(Error::Config(format!("weight.alpha = {} must be nonnegative", cfg.weight.alpha)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies the command-line seed, which wins over the document's.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed.or(self.seed) {
            self.seed = Some(s);
            self.minimize.rng_seed = s;
        }
        self
    }

    pub fn model(&self) -> Result<ModelManifold<f64>> {
        let label = self.model.as_deref().ok_or_else(|| Error::Config("missing key `model`".into()))?;
        ModelManifold::from_label(label)
    }

    pub fn grid_config(&self) -> Result<&GridConfig> {
        self.grid.as_ref().ok_or_else(|| Error::Config("missing key `grid`".into()))
    }

    pub fn grid(&self, m: &ModelManifold<f64>) -> Result<RadialGrid<f64>> {
        let g = self.grid_config()?;
        RadialGrid::build(m, g.r_inner, g.r_max, g.nodes)
    }

    pub fn schedule(&self, n: usize) -> Result<Schedule<f64>> {
        let Some(s) = &self.schedule else {
            return Schedule::default_for(n);
        };
        let mut sched = Schedule::new(n, s.alpha.clone(), s.p.clone())?;
        for o in &s.overrides {
            o.minimize.validate()?;
            let mut cfg = o.minimize.clone();
            if let Some(seed) = self.seed {
                cfg.rng_seed = seed;
            }
            sched = sched.with_override(o.record, cfg);
        }
        Ok(sched)
    }

    /// `--out`, then the environment, then the document, then `./out`.
    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|s| !s.is_empty()) {
            return PathBuf::from(p);
        }
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}
