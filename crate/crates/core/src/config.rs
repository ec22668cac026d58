//! TOML configuration documents.
//!
//! ```toml
//! [scenario]          # ScenarioConfig fields
//! m_tx = 8
//! seed = 1            # master seed of a campaign
//!
//! [solver]            # Hyperparams fields
//! i_outer = 25
//!
//! [plan]              # campaign layout
//! sweep_axis = "rho"
//! sweep_values = [0.0, 0.5, 1.0]
//! n_trials = 20
//! methods = ["ep_prmgd", "pr_wofb"]
//! output_dir = "out/rho"
//! ```
//!
//! Every section and field is optional and defaults to the full-scale
//! values; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{ExperimentPlan, Method, SweepAxis};
use crate::scenario::ScenarioConfig;
use crate::solver::Hyperparams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Desk,
    Paper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanSection {
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<f64>,
    pub n_trials: usize,
    pub methods: Vec<Method>,
    pub output_dir: PathBuf,
}

impl Default for PlanSection {
    fn default() -> Self {
        Self {
            sweep_axis: SweepAxis::None,
            sweep_values: Vec::new(),
            n_trials: 500,
            methods: Method::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigDocument {
    pub scenario: ScenarioConfig,
    pub solver: Hyperparams,
    pub plan: PlanSection,
}

impl ConfigDocument {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Paper => Self::default(),
            Preset::Desk => Self {
                scenario: ScenarioConfig::desk(),
                solver: Hyperparams::default(),
                plan: PlanSection { n_trials: 50, ..PlanSection::default() },
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.solver.validate()?;
        self.plan().validate()
    }

    pub fn plan(&self) -> ExperimentPlan {
        ExperimentPlan {
            scenario: self.scenario.clone(),
            hyper: self.solver.clone(),
            sweep_axis: self.plan.sweep_axis,
            sweep_values: self.plan.sweep_values.clone(),
            n_trials: self.plan.n_trials,
            methods: self.plan.methods.clone(),
            output_dir: self.plan.output_dir.clone(),
        }
    }
}
