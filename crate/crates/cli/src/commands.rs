//! One function per command; each fills an artifact directory.

use serde_json::json;

use tunnelsim::rabi::{
    detuning_fit, gate_noise_ensemble, monotone_prefix, prepare, rabi_density_map, run_trace, visibility_curve,
};
use tunnelsim::semiclassics::{
    bohr_levels, perturbation_shifts, period_change, phase_portrait, shift_bound, Kinetic, LevelPrediction, PhaseSpaceModel, Well,
};
use tunnelsim::spectral::{
    diagonalize_chain, direct_defect, find_doublets, match_states, overlap_map, perturbative_overlap_map, probability_defect,
    ridge_lines, side_weights,
};
use tunnelsim::trotter::{bch_defect, effective_hamiltonian_of, locality_profile, ordering_operators};
use tunnelsim::chain::hamiltonian_matrix;
use tunnelsim::{ChainSpec, SpectrumReport};

use crate::config::{Command, RunConfig};
use crate::output::{ArtifactDir, Cell};
use crate::CliError;

use Cell::{B, F, I, O, U};

pub fn dispatch(command: Command, cfg: &RunConfig, out: &mut ArtifactDir) -> Result<(), CliError> {
    match command {
        Command::Spectrum => spectrum(cfg, out),
        Command::EffectiveHam => effective_ham(cfg, out),
        Command::Defect => defect(cfg, out),
        Command::Semiclassics => semiclassics(cfg, out),
        Command::Portrait => portrait(cfg, out),
        Command::OverlapMap => overlap(cfg, out),
        Command::Rabi => rabi(cfg, out),
        Command::Sweep => sweep(cfg, out),
        Command::Noise => noise(cfg, out),
    }
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn center(spec: &ChainSpec) -> f64 {
    (spec.len() as f64 + 1.0) / 2.0
}

fn effective_spectrum(spec: &ChainSpec, cfg: &RunConfig, dt: f64, out: &mut ArtifactDir) -> Result<SpectrumReport, CliError> {
    let plan = cfg.trotter_plan(dt)?;
    let he = effective_hamiltonian_of(spec, &plan).map_err(numerical)?;
    if he.folded {
        out.warn("folding", format!("dt = {dt}: quasi-energies are folded"));
    }
    Ok(SpectrumReport::from_effective(&he, &plan.ordering().label()))
}

fn spectrum(cfg: &RunConfig, out: &mut ArtifactDir) -> Result<(), CliError> {
    let spec = cfg.chain_spec()?;
    let r = diagonalize_chain(&spec);
    let c = center(&spec);
    out.table(
        "energies.csv",
        &["index", "energy", "left_weight", "right_weight"],
        (0..r.len()).map(|k| {
            let (l, rr) = side_weights(r.state(k).as_slice(), c);
            vec![U(k), F(r.energies[k]), F(l), F(rr)]
        }),
    )?;
    let scan = find_doublets(&r, c, None);
    out.table(
        "doublets.csv",
        &["doublet", "lower", "upper", "e_mean", "eta", "epsilon"],
        scan.doublets.iter().map(|d| vec![U(d.index), U(d.lower), U(d.upper), F(d.e_mean), F(d.eta), F(d.epsilon)]),
    )?;
    Ok(())
}

fn effective_ham(cfg: &RunConfig, out: &mut ArtifactDir) -> Result<(), CliError> {
    let spec = cfg.chain_spec()?;
    let dt = cfg.plan.dt;
    let plan = cfg.trotter_plan(dt)?;
    let he = effective_hamiltonian_of(&spec, &plan).map_err(numerical)?;
    if he.folded {
        out.warn("folding", format!("dt = {dt}: quasi-energies are folded"));
    }
    let mut buf = Vec::new();
    he.op.write_text(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    out.text("heff.txt", &buf)?;
    let exact = diagonalize_chain(&spec);
    out.table(
        "quasienergies.csv",
        &["index", "quasienergy", "exact_energy", "difference"],
        (0..exact.len()).map(|k| vec![U(k), F(he.quasienergies[k]), F(exact.energies[k]), F(he.quasienergies[k] - exact.energies[k])]),
    )?;
    let prof = locality_profile(&he.op);
    out.table("locality.csv", &["distance", "max_abs"], prof.max_abs.iter().enumerate().map(|(k, v)| vec![U(k), F(*v)]))?;
    let d = bch_defect(&ordering_operators(&spec, plan.ordering())).map_err(numerical)?;
    let h = hamiltonian_matrix(&spec);
    let residual = he.op.sub(&h).sub(&d.scale(dt * dt)).spectral_norm();
    let g = spec.hopping() * dt;
    out.json(
        "summary.json",
        &json!({
            "dt": dt,
            "j_dt": g,
            "ordering": plan.ordering().label(),
            "folded": he.folded,
            "branch_warnings": he.branch_warnings,
            "hermiticity_error": he.op.hermiticity_error(),
            "bch_residual": residual,
            "locality_ratio": prof.ratio,
            "locality_reference": g / 4.0,
        }),
    )
}

fn defect(cfg: &RunConfig, out: &mut ArtifactDir) -> Result<(), CliError> {
    let spec = cfg.chain_spec()?;
    let exact = diagonalize_chain(&spec);
    let plan = cfg.trotter_plan(cfg.plan.dt)?;
    let d = bch_defect(&ordering_operators(&spec, plan.ordering())).map_err(numerical)?;
    let mut dts = vec![cfg.plan.dt];
    dts.extend(cfg.analysis.dt_list.iter().copied());
    dts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    dts.dedup();
    let levels = cfg.analysis.levels.min(spec.len());
    let j = spec.hopping();
    let mut rows = Vec::new();
    for &dt in &dts {
        let eff = effective_spectrum(&spec, cfg, dt, out)?;
        let dh = d.scale(dt * dt);
        for n in 0..levels {
            let m = match_states(&exact, &eff, &[n])[0];
            let direct = direct_defect(&exact.state(n), &eff.state(m));
            let pt = probability_defect(n, &exact, &dh, j * dt);
            rows.push(vec![
                F(dt),
                F(j * dt),
                U(n),
                F(exact.energies[n]),
                F(eff.energies[m]),
                F(direct),
                F(pt.dp),
                F(pt.c_n),
                U(pt.flagged.len()),
            ]);
        }
    }
    out.table(
        "defect.csv",
        &["dt", "j_dt", "level", "exact_energy", "effective_energy", "dp_direct", "dp_perturbative", "c_n", "degenerate_partners"],
        rows,
    )
}

fn well(cfg: &RunConfig, model: &PhaseSpaceModel<f64>) -> Well<f64> {
    let w = &cfg.analysis.well;
    let (d0, d1) = model.domain();
    let (lo, hi) = (w.lo.unwrap_or(d0), w.hi.unwrap_or(d1));
    let mut well = match w.center {
        Some(c) => Well::new(c, lo, hi),
        None => Well::around_minimum(model, lo, hi),
    };
    if let Some(p) = w.partner {
        well = well.with_partner(p);
    }
    well
}

fn level_row(lv: &LevelPrediction<f64>) -> Vec<Cell> {
    vec![
        I(lv.n),
        F(lv.energy),
        F(lv.spacing),
        F(lv.s12),
        F(lv.t12),
        O(lv.s_b),
        O(lv.eta),
        O(lv.gamma),
        F(lv.left.x),
        F(lv.right.x),
        U(lv.n_cl),
    ]
}

fn semiclassics(cfg: &RunConfig, out: &mut ArtifactDir) -> Result<(), CliError> {
    let spec = cfg.chain_spec()?;
    let kinetic = cfg.kinetic();
    let model = PhaseSpaceModel::from_chain(&spec, kinetic).map_err(numerical)?;
    let well = well(cfg, &model);
    let boundary = cfg.analysis.well.boundary.into();
    let levels = bohr_levels(&model, &well, boundary);
    out.table(
        "levels.csv",
        &["n", "energy", "spacing", "s12", "t12", "s_b", "eta", "gamma", "x_left", "x_right", "n_cl"],
        levels.iter().map(level_row),
    )?;
    // Trotter shifts always refer to the bare trajectories
    let bare = model.with_kinetic(Kinetic::Bare).map_err(numerical)?;
    let bare_levels = if kinetic == Kinetic::Bare { levels } else { bohr_levels(&bare, &well, boundary) };
    let (dt, j) = (cfg.plan.dt, spec.hopping());
    let mut rows = Vec::new();
    for lv in &bare_levels {
        let s = perturbation_shifts(&bare, lv, dt);
        if s.perturbative_regime_exceeded {
            out.warn("perturbative-regime-exceeded", format!("dt = {dt}: (J dt)^2 P/J > 1 for the semiclassical shifts"));
        }
        let (b_action, b_sites) = shift_bound(lv, j, dt);
        let (dt1, dt2) = period_change(&bare, lv, dt);
        rows.push(vec![
            I(lv.n),
            F(lv.energy),
            F(s.de),
            F(s.ds12),
            O(s.ds_b),
            O(s.eta_ratio),
            F(b_action),
            F(b_sites),
            F(dt1),
            F(dt2),
            B(s.perturbative_regime_exceeded),
        ]);
    }
    out.table(
        "shifts.csv",
        &["n", "energy", "de", "ds12", "ds_b", "eta_ratio", "bound_action", "bound_sites", "dt1_over_t", "dt2_over_t", "regime_exceeded"],
        rows,
    )?;
    let exact = diagonalize_chain(&spec);
    out.table("exact.csv", &["index", "energy"], exact.energies.iter().enumerate().map(|(k, e)| vec![U(k), F(*e)]))
}

fn portrait(cfg: &RunConfig, out: &mut ArtifactDir) -> Result<(), CliError> {
    let spec = cfg.chain_spec()?;
    let model = PhaseSpaceModel::from_chain(&spec, cfg.kinetic()).map_err(numerical)?;
    let energies = if cfg.analysis.energies.is_empty() {
        let (lo, hi) = (spec.h_min() - spec.hopping(), spec.h_max() + spec.hopping());
        (1..=24).map(|k| lo + (hi - lo) * k as f64 / 25.0).collect()
    } else {
        cfg.analysis.energies.clone()
    };
    let curves = phase_portrait(&model, &energies, cfg.analysis.portrait_samples);
    let mut regions = Vec::new();
    let mut points = Vec::new();
    for c in &curves {
        for (r, reg) in c.regions.iter().enumerate() {
            regions.push(vec![F(c.energy), U(r), F(reg.x_start), F(reg.x_end), F(reg.area), F(reg.area / std::f64::consts::TAU)]);
            for &(x, p) in &reg.points {
                points.push(vec![F(c.energy), U(r), F(x), F(p)]);
            }
        }
    }
    out.table("regions.csv", &["energy", "region", "x_start", "x_end", "area", "area_over_2pi"], regions)?;
    out.table("contours.csv", &["energy", "region", "x", "p"], points)
}

fn overlap(cfg: &RunConfig, out: &mut ArtifactDir) -> Result<(), CliError> {
    let spec = cfg.chain_spec()?;
    let exact = diagonalize_chain(&spec);
    let dt = cfg.plan.dt;
    let eff = effective_spectrum(&spec, cfg, dt, out)?;
    let plan = cfg.trotter_plan(dt)?;
    let d = bch_defect(&ordering_operators(&spec, plan.ordering())).map_err(numerical)?;
    let j = spec.hopping();
    let levels = cfg.analysis.levels;
    let map = overlap_map(&exact, &eff, levels, j, dt).normalized();
    let pert = perturbative_overlap_map(&exact, &d.scale(dt * dt), levels, j, dt).normalized();
    let n = map.nrows();
    let mut rows = Vec::new();
    for m in 0..n {
        for k in 0..n {
            rows.push(vec![U(m), U(k), F(exact.energies[m]), F(exact.energies[k]), F(map[(m, k)]), F(pert[(m, k)])]);
        }
    }
    out.table("overlap.csv", &["m", "n", "e_m", "e_n", "normalized", "perturbative"], rows)?;
    let h_ref = cfg.analysis.h_ref.unwrap_or(spec.h_min());
    out.table(
        "ridges.csv",
        &["n", "e_n", "diagonal", "reflected_low", "reflected_high"],
        (0..n).map(|k| {
            let r = ridge_lines(exact.energies[k], j, h_ref);
            vec![U(k), F(exact.energies[k]), F(r[0]), F(r[1]), F(r[2])]
        }),
    )
}

fn rabi(cfg: &RunConfig, out: &mut ArtifactDir) -> Result<(), CliError> {
    let exp = cfg.experiment_config()?;
    let prep = prepare(&exp).map_err(numerical)?;
    let plan = cfg.trotter_plan(cfg.plan.dt)?;
    let tr = run_trace(&prep.state, &prep.spec, &plan, exp.steps, exp.stride).map_err(numerical)?;
    out.table("trace.csv", &["step", "t", "n_left"], tr.times.iter().zip(&tr.n_left).enumerate().map(|(k, (t, n))| vec![U((k + 1) * exp.stride), F(*t), F(*n)]))?;
    out.table("spectrum.csv", &["omega", "power"], tr.omegas.iter().zip(&tr.spectrum).map(|(w, p)| vec![F(*w), F(*p)]))?;
    out.json(
        "summary.json",
        &json!({
            "dt": tr.dt,
            "doublet_energy": prep.energy,
            "doublet_gap": prep.gap,
            "exact_period": std::f64::consts::TAU / prep.gap,
            "peak_omega": tr.peak.map(|p| p.omega),
            "peak_period": tr.peak.map(|p| p.period),
            "peak_magnitude": tr.peak.map(|p| p.magnitude),
            "norm_drift": tr.norm_drift,
        }),
    )
}

fn sweep(cfg: &RunConfig, out: &mut ArtifactDir) -> Result<(), CliError> {
    let exp = cfg.experiment_config()?;
    for &dt in &exp.dt_grid {
        cfg.trotter_plan(dt)?;
    }
    let map = rabi_density_map(&exp).map_err(numerical)?;
    let mut cells = Vec::new();
    for tr in &map.traces {
        for (w, p) in tr.omegas.iter().zip(&tr.spectrum) {
            let period = if *w > 0.0 { Some(std::f64::consts::TAU / w) } else { None };
            cells.push(vec![F(tr.dt), F(*w), O(period), F(*p)]);
        }
    }
    out.table("density.csv", &["dt", "omega", "period", "power"], cells)?;
    let rows = map.traces.iter().enumerate().map(|(k, tr)| {
        let f = map.fixed_energy[k].as_ref();
        let r = map.requantized[k].as_ref();
        vec![
            F(tr.dt),
            O(tr.peak.map(|p| p.omega)),
            O(tr.peak.map(|p| p.period)),
            O(tr.peak.map(|p| p.magnitude)),
            O(f.map(|o| o.period_pi)),
            O(r.map(|o| o.energy)),
            O(r.map(|o| o.period_pi)),
            O(r.map(|o| o.period_two_pi)),
        ]
    });
    out.table(
        "peaks.csv",
        &["dt", "omega", "period", "magnitude", "overlay_fixed_pi", "requantized_energy", "overlay_requantized_pi", "overlay_requantized_two_pi"],
        rows,
    )?;
    let t0 = std::f64::consts::TAU / map.gap;
    let peaks = map.peaks();
    let pts: Vec<(f64, f64)> = peaks.iter().map(|&(dt, t, _)| (dt, t)).collect();
    let prefix = monotone_prefix(&pts);
    let fit = detuning_fit(&prefix, t0, exp.j).ok();
    let (n0, vis) = visibility_curve(&peaks, t0, None);
    out.table(
        "visibility.csv",
        &["dt", "measured", "predicted", "deviation"],
        vis.iter().map(|v| vec![F(v.dt), F(v.measured), F(v.predicted), F(v.deviation)]),
    )?;
    out.json(
        "summary.json",
        &json!({
            "doublet_energy": map.energy,
            "doublet_gap": map.gap,
            "t0": t0,
            "fit_points": prefix.len(),
            "alpha_fit": fit.map(|f| f.alpha),
            "fit_residual": fit.map(|f| f.residual),
            "visibility_n0": n0,
        }),
    )
}

fn noise(cfg: &RunConfig, out: &mut ArtifactDir) -> Result<(), CliError> {
    let exp = cfg.experiment_config()?;
    cfg.trotter_plan(cfg.plan.dt)?;
    let rep = gate_noise_ensemble(&exp, cfg.plan.dt, cfg.experiment.phase_sigma, cfg.experiment.trials).map_err(numerical)?;
    out.table("visibilities.csv", &["trial", "visibility"], rep.visibilities.iter().enumerate().map(|(k, v)| vec![U(k), F(*v)]))?;
    out.json(
        "summary.json",
        &json!({
            "dt": rep.dt,
            "phase_sigma": rep.phase_sigma,
            "noiseless": rep.noiseless,
            "mean": rep.mean,
            "std": rep.std,
            "median": rep.median,
            "threshold": rep.threshold,
            "n_cl": rep.n_cl,
            "energy_shift_std": rep.energy_shift_std,
            "energy_shift_std_predicted": rep.energy_shift_std_predicted,
        }),
    )
}
