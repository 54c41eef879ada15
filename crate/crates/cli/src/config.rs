//! Pipeline configuration: one TOML document, relative paths resolved
//! against the config file's directory, command-line flags layered on top.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use riskflow_core::features::{FeatureGroup, RiskMode};
use riskflow_core::geo::{GridSpec, IntervalBounds, MonthId};
use riskflow_core::model::{AblationParams, Direction, Folds, ForestParams, GbtParams, ModelKind, ModelParams};
use riskflow_core::seed;
use riskflow_core::synth::{SynthParams, CRIMES_FILE, MOVEMENTS_FILE, VENUES_FILE};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; every stochastic stage derives its stream from it.
    pub seed: u64,
    pub paths: Paths,
    /// Bounding box. Without it the synthetic city's grid is used.
    pub grid: Option<GridConfig>,
    pub intervals: IntervalConfig,
    pub split: SplitConfig,
    pub features: FeatureConfig,
    pub models: ModelsConfig,
    pub ablation: AblationConfig,
    pub synth: SynthParams,
    pub report: ReportConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Input files default to the synthetic outputs in the output directory.
    pub crimes: Option<PathBuf>,
    pub venues: Option<PathBuf>,
    pub movements: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self { crimes: None, venues: None, movements: None, output: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
}

fn default_cell_size() -> f64 {
    riskflow_core::geo::DEFAULT_CELL_SIZE_M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntervalConfig {
    /// Start hours of Morning, Midday, Afternoon, Night and Overnight.
    pub starts: [u32; 5],
}

impl Default for IntervalConfig {
    fn default() -> Self {
        Self { starts: IntervalBounds::default().starts() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MonthSpec {
    List(Vec<MonthId>),
    Range { from: MonthId, to: MonthId },
}

impl MonthSpec {
    pub fn months(&self) -> Vec<MonthId> {
        match self {
            MonthSpec::List(v) => v.clone(),
            MonthSpec::Range { from, to } => MonthId::range_inclusive(*from, *to),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_months: Option<MonthSpec>,
    pub test_months: Option<MonthSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub min_moves: u64,
    pub risk_mode: RiskMode,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { min_moves: 10, risk_mode: RiskMode::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub kinds: Vec<ModelKind>,
    pub forest: ForestParams,
    pub boosted: GbtParams,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        Self { kinds: ModelKind::ALL.to_vec(), forest: ForestParams::default(), boosted: GbtParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub k: usize,
    pub groups: Vec<FeatureGroup>,
    pub direction: Direction,
    pub folds: Folds,
    /// Forest used inside the ablation; defaults to `models.forest`.
    pub forest: Option<ForestParams>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            k: 10,
            groups: FeatureGroup::ALL.to_vec(),
            direction: Direction::default(),
            folds: Folds::default(),
            forest: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub svg: bool,
    pub markdown: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { svg: true, markdown: true }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub rejects: bool,
    pub min_moves: Option<u64>,
    pub direction: Option<Direction>,
}

/// A loaded configuration with every path made absolute.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: PipelineConfig,
    pub config_bytes: Vec<u8>,
    pub base_dir: PathBuf,
    pub rejects: bool,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().replace('\n', " ")))
    }
}

impl Resolved {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Config("config is not valid UTF-8".into()))?;
        let config = PipelineConfig::from_toml(text)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base_dir = if base_dir.as_os_str().is_empty() { PathBuf::from(".") } else { base_dir };
        Self::new(config, bytes, base_dir, overrides)
    }

    pub fn new(mut config: PipelineConfig, config_bytes: Vec<u8>, base_dir: PathBuf, o: &Overrides) -> Result<Self> {
        if let Some(out) = &o.out {
            config.paths.output = out.clone();
        }
        if let Some(s) = o.seed {
            config.seed = s;
        }
        if let Some(m) = o.min_moves {
            config.features.min_moves = m;
        }
        if let Some(d) = o.direction {
            config.ablation.direction = d;
        }
        // Intervals are shared by ingestion and the generator.
        config.synth.interval_starts = config.intervals.starts;
        config.synth.seed = config.seed;
        config.models.forest.seed = seed::derive(config.seed, &[1]);
        config.models.boosted.seed = seed::derive(config.seed, &[2]);
        IntervalBounds::new(config.intervals.starts)?;
        Ok(Self { config, config_bytes, base_dir, rejects: o.rejects })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.config.paths.output)
    }

    fn input(&self, configured: &Option<PathBuf>, default_name: &str) -> PathBuf {
        configured.as_ref().map(|p| self.resolve(p)).unwrap_or_else(|| self.out_dir().join(default_name))
    }

    pub fn crimes_path(&self) -> PathBuf {
        self.input(&self.config.paths.crimes, CRIMES_FILE)
    }

    pub fn venues_path(&self) -> PathBuf {
        self.input(&self.config.paths.venues, VENUES_FILE)
    }

    pub fn movements_path(&self) -> PathBuf {
        self.input(&self.config.paths.movements, MOVEMENTS_FILE)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        match &self.config.grid {
            Some(g) => Ok(GridSpec::new(g.min_lat, g.min_lon, g.max_lat, g.max_lon, g.cell_size)?),
            None => Ok(self.config.synth.grid()?),
        }
    }

    pub fn bounds(&self) -> IntervalBounds {
        IntervalBounds::new(self.config.intervals.starts).expect("validated on load")
    }

    /// Training and test months; they must both be configured and disjoint.
    pub fn split(&self) -> Result<(Vec<MonthId>, Vec<MonthId>)> {
        let get = |s: &Option<MonthSpec>, key: &str| {
            s.as_ref().map(MonthSpec::months).ok_or_else(|| CliError::Config(format!("split.{key} is not set")))
        };
        let train = get(&self.config.split.train_months, "train_months")?;
        let test = get(&self.config.split.test_months, "test_months")?;
        if train.is_empty() {
            return Err(CliError::Config("split.train_months is empty".into()));
        }
        if let Some(m) = train.iter().find(|m| test.contains(m)) {
            return Err(CliError::Config(format!("month {m} is in both train_months and test_months")));
        }
        Ok((train, test))
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams { forest: self.config.models.forest.clone(), boosted: self.config.models.boosted.clone() }
    }

    pub fn ablation_params(&self) -> AblationParams {
        let a = &self.config.ablation;
        AblationParams {
            k: a.k,
            seed: seed::derive(self.config.seed, &[3]),
            direction: a.direction,
            folds: a.folds,
            forest: a.forest.clone().unwrap_or_else(|| self.config.models.forest.clone()),
        }
    }
}
