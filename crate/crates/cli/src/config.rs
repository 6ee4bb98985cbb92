//! JSON run configurations for the batch commands.

use serde::{Deserialize, Serialize};
use sgmidas::aggregation::{CombinationScheme, WeightScheme};
use sgmidas::error::{Error, Result};
use sgmidas::evaluation::RealizedAggregate;
use sgmidas::models::{Family, PenaltySelection};
use sgmidas::panel::{load_panel_csv, Horizon, PanelDataset, PanelSchema};
use sgmidas::simulate::{default_estimators, InnovationDesign};
use std::path::{Path, PathBuf};

/// Where the panel CSV and its companion schema live.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataConfig {
    pub csv: PathBuf,
    pub schema: PathBuf,
}

impl DataConfig {
    pub fn load(&self, base: &Path) -> Result<PanelDataset> {
        let resolve = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        let schema = PanelSchema::from_json_file(&resolve(&self.schema))?;
        load_panel_csv(&resolve(&self.csv), &schema)
    }
}

fn default_horizons() -> Vec<Horizon> {
    Horizon::all().to_vec()
}

fn default_ar_order() -> usize {
    1
}

fn default_penalty() -> PenaltySelection {
    PenaltySelection::Cv(Default::default())
}

/// `mc-table` configuration: the experiment grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McTableConfig {
    pub n: Vec<usize>,
    pub t: Vec<usize>,
    pub p: Vec<usize>,
    pub sigma: Vec<f64>,
    pub design: Vec<InnovationDesign>,
    #[serde(default = "McTableConfig::default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Family>,
    #[serde(default = "McTableConfig::default_n_lambda")]
    pub n_lambda: usize,
    #[serde(default = "McTableConfig::default_gamma_grid")]
    pub gamma_grid: Vec<f64>,
    #[serde(default = "McTableConfig::default_holdout")]
    pub holdout: usize,
    #[serde(default = "McTableConfig::default_sigma_eps")]
    pub sigma_eps: f64,
    #[serde(default = "McTableConfig::default_heteroskedastic_errors")]
    pub heteroskedastic_errors: bool,
}

impl McTableConfig {
    fn default_replications() -> usize {
        1000
    }
    fn default_n_lambda() -> usize {
        20
    }
    fn default_gamma_grid() -> Vec<f64> {
        vec![1.0]
    }
    fn default_holdout() -> usize {
        1
    }
    fn default_sigma_eps() -> f64 {
        1.0
    }
    fn default_heteroskedastic_errors() -> bool {
        sgmidas::simulate::SimulationConfig::default().heteroskedastic_errors
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.t.is_empty() || self.p.is_empty() || self.sigma.is_empty() {
            return Err(Error::Config("empty experiment grid".into()));
        }
        if self.design.is_empty() {
            return Err(Error::Config("no innovation design selected".into()));
        }
        Ok(())
    }
}

/// Which target periods a command covers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodRange {
    pub first: String,
    pub last: String,
}

/// `nowcast` configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NowcastConfig {
    pub data: DataConfig,
    pub families: Vec<Family>,
    #[serde(default = "default_ar_order")]
    pub ar_order: usize,
    #[serde(default = "default_penalty")]
    pub penalty: PenaltySelection,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<Horizon>,
    #[serde(default = "NowcastConfig::default_schemes")]
    pub weight_schemes: Vec<WeightScheme>,
    /// Target periods; the last sample period when omitted.
    #[serde(default)]
    pub target_periods: Option<PeriodRange>,
    /// Emit the active-group indicator matrix per refit period.
    #[serde(default)]
    pub selection_matrix: bool,
}

impl NowcastConfig {
    fn default_schemes() -> Vec<WeightScheme> {
        vec![WeightScheme::Fixed]
    }
}

/// `evaluate` configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateConfig {
    pub data: DataConfig,
    pub members: Vec<MemberConfig>,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<Horizon>,
    pub window: PeriodRange,
    #[serde(default = "default_ar_order")]
    pub ar_order: usize,
    #[serde(default = "default_penalty")]
    pub penalty: PenaltySelection,
    pub benchmark: MemberConfig,
    #[serde(default)]
    pub subsamples: Vec<SubsampleConfig>,
    #[serde(default)]
    pub combination: Option<CombinationScheme>,
    #[serde(default)]
    pub realized_aggregate: RealizedAggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberConfig {
    pub family: Family,
    pub scheme: WeightScheme,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsampleConfig {
    pub tag: String,
    pub last: String,
}

/// `weights` configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsConfig {
    pub data: DataConfig,
    #[serde(default = "WeightsConfig::default_schemes")]
    pub schemes: Vec<WeightScheme>,
    #[serde(default)]
    pub periods: Option<PeriodRange>,
    /// Unit partition behind the small-over-large weight-share ratio.
    #[serde(default)]
    pub partition: Option<PartitionConfig>,
    #[serde(default)]
    pub realized_aggregate: RealizedAggregate,
}

impl WeightsConfig {
    fn default_schemes() -> Vec<WeightScheme> {
        vec![
            WeightScheme::W1,
            WeightScheme::W2,
            WeightScheme::W3,
            WeightScheme::W4,
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub small: Vec<String>,
    pub big: Vec<String>,
}

/// Resolve a period label to its index in the dataset's time index.
pub fn period_index(ds: &PanelDataset, label: &str) -> Result<usize> {
    let freq = ds.time_index[0].freq;
    let period = sgmidas::period::Period::parse(freq, label)?;
    ds.time_index
        .iter()
        .position(|p| *p == period)
        .ok_or_else(|| Error::Config(format!("period `{label}` outside the sample")))
}
