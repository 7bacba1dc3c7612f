//! Dry-run checks of a resolved configuration.

use serde::Serialize;

use tunnelsim::trotter::folding_flag;

use crate::config::{Command, RunConfig};
use crate::output::Warning;

#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct Diagnostics {
    pub errors: Vec<String>,
    /// Hard warnings: the run is still carried out.
    pub warnings: Vec<Warning>,
    /// Naive step-size criteria, informational only.
    pub advisories: Vec<Warning>,
}

impl Diagnostics {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Steps the command will actually use.
pub fn steps_in_use(cfg: &RunConfig, command: Option<Command>) -> Vec<f64> {
    let mut dts = vec![cfg.plan.dt];
    match command {
        Some(Command::Sweep) => dts = cfg.experiment.dt_grid.clone(),
        Some(Command::Defect) => dts.extend(cfg.analysis.dt_list.iter().copied()),
        _ => {}
    }
    dts
}

pub fn validate(cfg: &RunConfig, command: Option<Command>) -> Diagnostics {
    let mut d = Diagnostics::default();
    if let Err(e) = cfg.trotter_plan(cfg.plan.dt) {
        d.errors.push(e.message().to_string());
    }
    let spec = match cfg.chain_spec() {
        Ok(s) => Some(s),
        Err(e) => {
            d.errors.push(e.message().to_string());
            None
        }
    };
    if matches!(command, Some(Command::Rabi | Command::Sweep | Command::Noise)) {
        if let Err(e) = cfg.experiment_config() {
            d.errors.push(e.message().to_string());
        }
        if command == Some(Command::Noise) && cfg.experiment.trials < 10 {
            d.errors.push(format!("experiment.trials: need at least 10, got {}", cfg.experiment.trials));
        }
    }
    if cfg.workers == Some(0) {
        d.errors.push("workers: must be at least 1".into());
    }
    if cfg.analysis.levels == 0 {
        d.errors.push("analysis.levels: must be at least 1".into());
    }
    for &dt in &steps_in_use(cfg, command) {
        if !(dt > 0.0 && dt.is_finite()) {
            d.errors.push(format!("time step {dt} must be positive and finite"));
            continue;
        }
        let j = cfg.chain.hopping;
        let g = j * dt;
        if g / 4.0 >= 1.0 {
            d.warnings.push(Warning::new(
                "locality",
                format!("J dt = {g}: J dt/4 >= 1, the effective Hamiltonian is not local"),
            ));
        }
        if g >= 1.0 {
            d.advisories.push(Warning::new("naive-step", format!("J dt = {g} >= 1")));
        }
        if let Some(spec) = &spec {
            let p = spec.h_max().abs().max(spec.h_min().abs());
            if p * dt >= 1.0 {
                d.advisories.push(Warning::new("naive-step", format!("max|h| dt = {} >= 1", p * dt)));
            }
            if folding_flag(spec, dt) {
                d.warnings.push(Warning::new(
                    "folding",
                    format!("dt = {dt}: spectrum width exceeds the quasi-energy zone 2 pi/dt"),
                ));
            }
        }
    }
    d
}
