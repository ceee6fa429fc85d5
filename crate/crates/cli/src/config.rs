//! Run configuration: one TOML file, every key optional, flags override it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thetaprime_core::backend::DEFAULT_EXTENSION_PAD;
use thetaprime_core::{
    BackendKind, DerivBackend, GridSpec, LossWeights, SimParams, SpatialForm, SweepPlan, SweepSpec,
};

use crate::error::{CliError, Result};

/// Settings for single runs (`simulate`) and the per-instance run length of
/// `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub frames: usize,
    pub substeps: usize,
    pub noise_amp: f64,
    pub c0: f64,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        let plan = SweepPlan::default();
        Self {
            frames: plan.frames,
            substeps: plan.substeps,
            noise_amp: plan.noise_amp,
            c0: 0.20,
            seed: 494,
        }
    }
}

impl RunSection {
    pub fn plan(&self) -> SweepPlan {
        SweepPlan {
            frames: self.frames,
            substeps: self.substeps,
            noise_amp: self.noise_amp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub n_train: usize,
    pub selection_seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            n_train: 12,
            selection_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub plots: bool,
    /// Frames to render with `plots`; empty means first and last.
    pub snapshot_frames: Vec<usize>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            plots: false,
            snapshot_frames: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub params: SimParams,
    pub run: RunSection,
    pub sweep: SweepSpec,
    pub split: SplitSection,
    pub loss: LossWeights,
    pub backend: DerivBackend,
    pub output: OutputSection,
    /// Settings owned by the training tool; carried through unread.
    pub trainer: toml::Table,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            params: SimParams::default(),
            run: RunSection::default(),
            sweep: SweepSpec::default(),
            split: SplitSection::default(),
            loss: LossWeights::default(),
            // keep the extension pad so `--backend fext` works without a file
            backend: DerivBackend {
                pad: DEFAULT_EXTENSION_PAD,
                ..DerivBackend::pseudo_spectral()
            },
            output: OutputSection::default(),
            trainer: toml::Table::new(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub backend: Option<BackendKind>,
    pub spatial_form: Option<SpatialForm>,
    pub frames: Option<usize>,
    pub seed: Option<u64>,
    pub c0: Option<f64>,
    pub plots: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// `--c0` and `--seed` also collapse the sweep lists to that single value.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(dir) = &o.out {
            self.output.dir = dir.clone();
        }
        if let Some(kind) = o.backend {
            self.backend.kind = kind;
        }
        if let Some(form) = o.spatial_form {
            self.params.ch_spatial_form = form;
        }
        if let Some(frames) = o.frames {
            self.run.frames = frames;
        }
        if let Some(seed) = o.seed {
            self.run.seed = seed;
            self.sweep.seeds = vec![seed];
        }
        if let Some(c0) = o.c0 {
            self.run.c0 = c0;
            self.sweep.supersaturations = vec![c0];
        }
        self.output.plots |= o.plots;
    }

    /// Checks everything up front so no command fails halfway on a typo.
    pub fn validate(&self) -> Result<()> {
        let config = |e: thetaprime_core::Error| CliError::Config(e.to_string());
        self.grid.build().map_err(config)?;
        self.params.validate().map_err(config)?;
        self.sweep.validate().map_err(config)?;
        self.loss.validate().map_err(config)?;
        self.backend.validate().map_err(config)?;
        let run = &self.run;
        if run.frames < 2 {
            return Err(CliError::Config(format!("run.frames must be at least 2, got {}", run.frames)));
        }
        if run.substeps == 0 {
            return Err(CliError::Config("run.substeps must be at least 1".into()));
        }
        if !(run.noise_amp >= 0.0 && run.noise_amp.is_finite()) {
            return Err(CliError::Config(format!("run.noise_amp must be finite and >= 0, got {}", run.noise_amp)));
        }
        if !(run.c0 > 0.0 && run.c0 < 1.0) {
            return Err(CliError::Config(format!("run.c0 must lie in (0, 1), got {}", run.c0)));
        }
        if self.split.n_train == 0 {
            return Err(CliError::Config("split.n_train must be at least 1".into()));
        }
        if let Some(f) = self.output.snapshot_frames.iter().find(|f| **f >= run.frames) {
            return Err(CliError::Config(format!(
                "output.snapshot_frames contains {f}, but runs have {} frames",
                run.frames
            )));
        }
        if self.output.plots && !cfg!(feature = "plots") {
            return Err(CliError::Config("plots requested but this build lacks the `plots` feature".into()));
        }
        Ok(())
    }

    /// Frames to render, defaulting to the first and last one.
    pub fn snapshot_frames(&self, frames: usize) -> Vec<usize> {
        if self.output.snapshot_frames.is_empty() {
            vec![0, frames - 1]
        } else {
            self.output.snapshot_frames.clone()
        }
    }
}
