use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::SolverConfig;
use crate::inverse::InversionConfig;
use crate::scenarios::{
    CoefficientField, Exp2Truth, IndenterSpec, LoadField, ObservationRegion, ReferenceScale, TestCase,
};

/// Complete run description. Every section is optional; omitted values take
/// the defaults listed on each field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridConfig,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub inversion: InversionConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Noise seed (default 0).
    #[serde(default)]
    pub seed: u64,
    /// Reference grids of at least 500 nodes per axis (default false).
    #[serde(default)]
    pub paper_scale: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Nodes per axis. Default 20 for forward solves, 30 for the experiments.
    pub n: Option<usize>,
    /// Reference grid for synthetic data. Default `4(n − 1) + 1`, or the
    /// paper-scale grid with `paper_scale`.
    pub reference_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Default `out`.
    pub dir: PathBuf,
    /// Write every k-th inversion iterate (0, the default, writes none).
    pub snapshot_every: usize,
    /// Write a PGM image next to every field CSV (default true).
    pub images: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            snapshot_every: 0,
            images: true,
        }
    }
}

/// One measurement read from field files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestMeasurement {
    pub load: PathBuf,
    pub obstacle: PathBuf,
    /// Full nodal field; only the observed nodes are used.
    pub data: PathBuf,
    /// 0/1 field of observed nodes (default: all nodes).
    #[serde(default)]
    pub mask: Option<PathBuf>,
    #[serde(default)]
    pub noise_norm: Option<f64>,
}

fn default_delta() -> f64 {
    0.001
}

fn all_three() -> Vec<usize> {
    vec![0, 1, 2]
}

fn both_testcases() -> Vec<TestCase> {
    vec![TestCase::Testcase1, TestCase::Testcase2]
}

fn table1_grids() -> Vec<usize> {
    vec![20, 40, 80]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum ProblemConfig {
    Testcase1,
    Testcase2,
    /// Forward solve from field files.
    Files {
        coefficient: PathBuf,
        load: PathBuf,
        obstacle: PathBuf,
    },
    /// Inversion of measured data.
    Ingest {
        measurements: Vec<IngestMeasurement>,
        /// Initial coefficient; its boundary values are kept (default ≡ 1).
        #[serde(default)]
        a0: Option<PathBuf>,
        #[serde(default)]
        ground_truth: Option<PathBuf>,
    },
    /// `radius`/`delta` unset: 0.1 and 0.001 for `invert`, the full
    /// {0.1, 0.25, 0.5} × {0.001, 0.01, 0.1} sweep for `experiment`.
    Exp1 {
        #[serde(default)]
        radius: Option<f64>,
        #[serde(default)]
        delta: Option<f64>,
    },
    /// `region` unset: FULL for `invert`, all three for `experiment`.
    Exp2 {
        #[serde(default)]
        region: Option<ObservationRegion>,
        #[serde(default = "printed")]
        truth: Exp2Truth,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    Exp3 {
        #[serde(default = "all_three")]
        measurements: Vec<usize>,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    Custom {
        coefficient: CoefficientField,
        load: LoadField,
        indenters: Vec<IndenterSpec>,
        #[serde(default = "full")]
        region: ObservationRegion,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    Table1 {
        #[serde(default = "table1_grids")]
        n_list: Vec<usize>,
        #[serde(default = "both_testcases")]
        testcases: Vec<TestCase>,
    },
}

fn printed() -> Exp2Truth {
    Exp2Truth::Printed
}

fn full() -> ObservationRegion {
    ObservationRegion::Full
}

impl ProblemConfig {
    pub fn is_experiment(&self) -> bool {
        matches!(self, Self::Exp1 { .. } | Self::Exp2 { .. } | Self::Exp3 { .. } | Self::Custom { .. })
    }
}

/// Flag overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub paper_scale: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Apply flag overrides and fill the grid defaults.
    pub fn materialize(mut self, o: &Overrides) -> Self {
        if let Some(dir) = &o.out {
            self.output.dir = dir.clone();
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        self.paper_scale |= o.paper_scale;
        if self.grid.n.is_none() {
            self.grid.n = Some(if self.problem.is_experiment() { 30 } else { 20 });
        }
        if let (None, Some(n)) = (self.grid.reference_n, self.grid.n) {
            if n >= 2 && !matches!(self.problem, ProblemConfig::Table1 { .. }) {
                self.grid.reference_n = Some(self.reference_scale().reference_n(n));
            }
        }
        self
    }

    pub fn reference_scale(&self) -> ReferenceScale {
        if self.paper_scale {
            ReferenceScale::Paper
        } else {
            ReferenceScale::Desk
        }
    }

    pub fn n(&self) -> usize {
        self.grid.n.unwrap_or(20)
    }
}
