//! Run configuration: one JSON document, strict keys, dotted overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use tunnelsim::chain::{build_chain, read_potential_file};
use tunnelsim::rabi::ExperimentConfig;
use tunnelsim::semiclassics::{Boundary, Kinetic};
use tunnelsim::trotter::{Ordering, TrotterError, TrotterPlan};
use tunnelsim::{ChainSpec, PotentialFamily};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    EffectiveHam,
    Defect,
    Semiclassics,
    Portrait,
    OverlapMap,
    Rabi,
    Sweep,
    Noise,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Spectrum,
        Command::EffectiveHam,
        Command::Defect,
        Command::Semiclassics,
        Command::Portrait,
        Command::OverlapMap,
        Command::Rabi,
        Command::Sweep,
        Command::Noise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::EffectiveHam => "effective-ham",
            Command::Defect => "defect",
            Command::Semiclassics => "semiclassics",
            Command::Portrait => "portrait",
            Command::OverlapMap => "overlap-map",
            Command::Rabi => "rabi",
            Command::Sweep => "sweep",
            Command::Noise => "noise",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    Cosine { p: f64 },
    Linear { alpha: f64 },
    Experimental { p: f64, w: f64, dn: f64, alpha: f64 },
    Custom { values: Vec<f64> },
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub sites: usize,
    pub hopping: f64,
    pub potential: PotentialConfig,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig { sites: 50, hopping: 1.0, potential: PotentialConfig::Experimental { p: 1.25, w: 8.0, dn: 0.0, alpha: 0.0 } }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderingName {
    KevenKoddP,
    KevenPKodd,
    Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub dt: f64,
    pub ordering: OrderingName,
    /// Weight of `P` carried by the even layer for the split ordering.
    pub split_alpha: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig { dt: 0.5, ordering: OrderingName::KevenPKodd, split_alpha: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub doublet_index: usize,
    pub noise_level: f64,
    pub steps: usize,
    pub stride: usize,
    pub dt_grid: Vec<f64>,
    pub phase_sigma: f64,
    pub trials: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let d = ExperimentConfig::<f64>::default();
        ExperimentSection {
            doublet_index: d.doublet_index,
            noise_level: d.noise_level,
            steps: d.steps,
            stride: d.stride,
            dt_grid: d.dt_grid,
            phase_sigma: 0.0,
            trials: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KineticName {
    Bare,
    Corrected,
    LargeStep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryName {
    TwoTurningPoints,
    HardWallLeft,
    HardWallRight,
}

impl From<BoundaryName> for Boundary {
    fn from(b: BoundaryName) -> Self {
        match b {
            BoundaryName::TwoTurningPoints => Boundary::TwoTurningPoints,
            BoundaryName::HardWallLeft => Boundary::HardWallLeft,
            BoundaryName::HardWallRight => Boundary::HardWallRight,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WellConfig {
    /// Search window `[lo, hi]` in site coordinates; the well bottom is the minimum inside it.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    /// Fixed bottom instead of the located minimum.
    pub center: Option<f64>,
    pub partner: Option<f64>,
    pub boundary: BoundaryName,
}

impl Default for WellConfig {
    fn default() -> Self {
        WellConfig { lo: None, hi: None, center: None, partner: None, boundary: BoundaryName::TwoTurningPoints }
    }
}

/// Knobs of the analysis commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Number of lowest levels in defect and overlap tables.
    pub levels: usize,
    /// Extra steps for the defect table; `plan.dt` is always included.
    pub dt_list: Vec<f64>,
    pub kinetic: KineticName,
    pub well: WellConfig,
    /// Portrait energies; empty means 24 values across the band.
    pub energies: Vec<f64>,
    pub portrait_samples: usize,
    /// Reference on-site value of the overlap-map ridge lines; default `min h`.
    pub h_ref: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            levels: 20,
            dt_list: Vec::new(),
            kinetic: KineticName::Bare,
            well: WellConfig::default(),
            energies: Vec::new(),
            portrait_samples: 200,
            h_ref: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub chain: ChainConfig,
    pub plan: PlanConfig,
    pub experiment: ExperimentSection,
    pub analysis: AnalysisConfig,
    pub seed: u64,
    /// Worker threads for the sweep; `None` uses every core.
    pub workers: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            chain: ChainConfig::default(),
            plan: PlanConfig::default(),
            experiment: ExperimentSection::default(),
            analysis: AnalysisConfig::default(),
            seed: 0,
            workers: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Sets `path` (dot separated) inside a JSON object, creating objects on the way.
/// The value is read as JSON when it parses, as a bare string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("override `{assignment}` has an empty key segment")));
    }
    let value = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !cur.is_object() {
            let at = parts[..i].join(".");
            return Err(CliError::Config(format!("override `{key}`: `{at}` is not an object")));
        }
        let map = cur.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        cur = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Reads a config file. A manifest written by a previous run is accepted too;
/// its `config` member is the resolved configuration.
pub fn load_document(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    match doc.get("manifest_version") {
        Some(_) => doc
            .get("config")
            .cloned()
            .ok_or_else(|| CliError::Config(format!("{}: manifest without a `config` member", path.display()))),
        None => Ok(doc),
    }
}

pub fn parse(doc: Value) -> Result<RunConfig, CliError> {
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.into_inner()))
    })
}

impl RunConfig {
    pub fn ordering(&self) -> Ordering<f64> {
        match self.plan.ordering {
            OrderingName::KevenKoddP => Ordering::KEvenKOddP,
            OrderingName::KevenPKodd => Ordering::KEvenPKOdd,
            OrderingName::Split => Ordering::Split(self.plan.split_alpha),
        }
    }

    pub fn trotter_plan(&self, dt: f64) -> Result<TrotterPlan<f64>, CliError> {
        TrotterPlan::new(dt, self.ordering()).map_err(|e| {
            let field = if e == TrotterError::BadSplit { "plan.split_alpha" } else { "plan.dt" };
            CliError::Config(format!("{field}: {e}"))
        })
    }

    pub fn family(&self) -> Result<PotentialFamily, CliError> {
        Ok(match &self.chain.potential {
            PotentialConfig::Cosine { p } => PotentialFamily::Cosine { p: *p },
            PotentialConfig::Linear { alpha } => PotentialFamily::Linear { alpha: *alpha },
            PotentialConfig::Experimental { p, w, dn, alpha } => PotentialFamily::Experimental { p: *p, w: *w, dn: *dn, alpha: *alpha },
            PotentialConfig::Custom { values } => PotentialFamily::Custom(values.clone()),
            PotentialConfig::File { path } => {
                PotentialFamily::Custom(read_potential_file(path).map_err(|e| CliError::Config(format!("chain.potential.path: {e}")))?)
            }
        })
    }

    pub fn chain_spec(&self) -> Result<ChainSpec, CliError> {
        build_chain(self.chain.sites, self.chain.hopping, &self.family()?).map_err(|e| CliError::Config(format!("chain: {e}")))
    }

    /// The experiment config; only the experimental family is accepted.
    pub fn experiment_config(&self) -> Result<ExperimentConfig<f64>, CliError> {
        let PotentialConfig::Experimental { p, w, dn, alpha } = self.chain.potential else {
            return Err(CliError::Config("chain.potential: this command needs the `experimental` family".into()));
        };
        let e = &self.experiment;
        let cfg = ExperimentConfig {
            l: self.chain.sites,
            j: self.chain.hopping,
            p,
            w,
            dn,
            alpha,
            doublet_index: e.doublet_index,
            noise_level: e.noise_level,
            seed: self.seed,
            steps: e.steps,
            stride: e.stride,
            dt_grid: e.dt_grid.clone(),
            ordering: self.ordering(),
        };
        cfg.validate().map_err(|e| CliError::Config(format!("experiment: {e}")))?;
        Ok(cfg)
    }

    pub fn kinetic(&self) -> Kinetic<f64> {
        let g = self.plan.dt;
        match self.analysis.kinetic {
            KineticName::Bare => Kinetic::Bare,
            KineticName::Corrected => Kinetic::Corrected(g),
            KineticName::LargeStep => Kinetic::LargeStep(g),
        }
    }
}
