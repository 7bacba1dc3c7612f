use nalgebra::{Complex, DVector};
use tunnelsim::chain::{build_chain, PotentialFamily};
use tunnelsim::rabi::{
    detuned_period, detuning_fit, doublet_indices, experimental_potential, find_peak, frequency_grid, left_occupancy,
    occupancy_spectrum, prepare, prepare_initial_state, rabi_density_map, run_trace, tune_alpha_for_resonance,
    visibility_curve, ExperimentConfig, RabiError,
};
use tunnelsim::semiclassics::{bohr_levels, Boundary, Kinetic, PhaseSpaceModel, Well};
use tunnelsim::spectral::{diagonalize_chain, doublet_from_pair, match_pair, ResonantModel, SpectrumReport};
use tunnelsim::trotter::{effective_hamiltonian_of, Ordering, TrotterPlan};

type State = DVector<Complex<f64>>;

fn overlap(a: &State, b: &State) -> f64 {
    a.dotc(b).norm()
}

/// Exact evolution through the eigenbasis.
fn evolve_exact(r: &SpectrumReport<f64>, psi: &State, t: f64) -> State {
    let mut out = State::zeros(psi.len());
    for k in 0..r.len() {
        let v = r.state(k);
        let c = v.dotc(psi) * Complex::from_polar(1.0, -r.energies[k] * t);
        out += v * c;
    }
    out
}

#[test]
fn profile_symmetry_and_normalization() {
    let fam = experimental_potential(1.25f64, 8.0, 0.0, 0.0, 50).unwrap();
    let h = fam.evaluate(50).unwrap();
    let worst = (0..25).map(|k| (h[k] - h[49 - k]).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-12 * 1.25);
    assert_eq!(h[24], 1.25);
    let odd = experimental_potential(1.1f64, 6.0, 0.0, 0.0, 41).unwrap().evaluate(41).unwrap();
    assert_eq!(odd[20], 1.1);
    assert!(experimental_potential(1.0f64, 0.0, 0.0, 0.0, 50).is_err());
    assert!(experimental_potential(1.0f64, 4.0, 0.0, 0.0, 3).is_err());
}

#[test]
fn symmetric_profile_needs_no_tilt() {
    let t = tune_alpha_for_resonance(1.25f64, 8.0, 0.0, 50, 1.0, 10, (-0.05, 0.05)).unwrap();
    assert!(t.alpha.abs() < 1e-6, "{}", t.alpha);
    assert!(t.epsilon.abs() < 1e-8);
    assert!(matches!(
        tune_alpha_for_resonance(1.25f64, 8.0, 0.0, 50, 1.0, 10, (0.01, 0.05)),
        Err(RabiError::NoInteriorMaximum(..))
    ));
}

#[test]
fn tuned_doublet_is_rehybridized() {
    let t = tune_alpha_for_resonance(1.05f64, 8.0, 4.0, 50, 1.0, 9, (0.04, 0.12)).unwrap();
    let spec = build_chain(50, 1.0, &PotentialFamily::Experimental { p: 1.05, w: 8.0, dn: 4.0, alpha: t.alpha }).unwrap();
    let r = diagonalize_chain(&spec);
    let (i, j) = doublet_indices(9);
    let d = doublet_from_pair(&r, i, j, 25.5).unwrap();
    assert!((d.left_weight - 0.5).abs() < 0.05, "{}", d.left_weight);
    assert!(t.epsilon.abs() < 0.1 * t.gap);
    assert!((t.period - 2.0 * std::f64::consts::PI / t.gap).abs() < 1e-9 * t.period);
}

#[test]
fn clean_initial_state() {
    let cfg = ExperimentConfig::<f64> { noise_level: 0.0, ..Default::default() };
    let prep = prepare(&cfg).unwrap();
    let (i, j) = doublet_indices(10);
    let (a, b) = (prep.exact.state(i), prep.exact.state(j));
    let psi = &prep.state;
    assert!((overlap(&a, psi).powi(2) - 0.5).abs() < 1e-6);
    assert!((overlap(&b, psi).powi(2) - 0.5).abs() < 1e-6);
    assert!((overlap(&a, psi).powi(2) + overlap(&b, psi).powi(2) - 1.0).abs() < 1e-12);
    let n = left_occupancy(psi.as_slice());
    assert!(n > 0.99 && n <= 1.0);
}

#[test]
fn noisy_initial_state_stays_close() {
    let cfg = ExperimentConfig::<f64> { noise_level: 0.0, ..Default::default() };
    let prep = prepare(&cfg).unwrap();
    let (i, j) = doublet_indices(10);
    let (a, b) = (prep.exact.state(i), prep.exact.state(j));
    let mean = (0..100u64)
        .map(|seed| {
            let noisy = prepare_initial_state(&a, &b, 0.1, seed);
            assert!((noisy.norm() - 1.0).abs() < 1e-12);
            overlap(&noisy, &prep.state)
        })
        .sum::<f64>()
        / 100.0;
    assert!(mean > 0.99, "{mean}");
    assert_eq!(prepare_initial_state(&a, &b, 0.1, 7), prepare_initial_state(&a, &b, 0.1, 7));
    assert_ne!(prepare_initial_state(&a, &b, 0.1, 7), prepare_initial_state(&a, &b, 0.1, 8));
}

#[test]
fn symmetric_trace_follows_two_level_model() {
    let cfg = ExperimentConfig::<f64> { noise_level: 0.0, ..Default::default() };
    let prep = prepare(&cfg).unwrap();
    let eta = prep.gap / 2.0;
    let trace = run_trace(&prep.state, &prep.spec, &TrotterPlan::new(0.1, Ordering::KEvenPKOdd).unwrap(), 60_000, 200).unwrap();
    let model = ResonantModel::new(0.0, eta);
    let rms = (trace.times.iter().zip(&trace.n_left).map(|(&t, &n)| (n - model.occupancy(t)).powi(2)).sum::<f64>()
        / trace.times.len() as f64)
        .sqrt();
    assert!(rms < 0.02, "{rms}");
    assert!(trace.n_left.iter().all(|&n| (0.0..=1.0 + 1e-9).contains(&n)));
    assert!(trace.norm_drift < 1e-8);
    assert_eq!(trace.spectrum.len(), 300);
}

#[test]
fn synthetic_two_level_input_peaks_at_double_frequency() {
    let (dt, stride, n) = (0.5, 200, 300);
    let w0 = 5.5e-4;
    let times: Vec<f64> = (1..=n).map(|k| dt * (k * stride) as f64).collect();
    let x: Vec<f64> = times.iter().map(|t| (w0 * t).cos().powi(2)).collect();
    let om = frequency_grid(dt, stride, n);
    let pk = find_peak(&om, &occupancy_spectrum(&times, &x, &om)).unwrap();
    assert!((pk.omega - 2.0 * w0).abs() < om[1] - om[0]);
}

/// Symmetric run at J dt = 0.5 sampled over one occupancy period, with the
/// effective-Hamiltonian spectrum for the same step.
fn half_step_run() -> (tunnelsim::rabi::Preparation<f64>, tunnelsim::rabi::RabiTrace<f64>, SpectrumReport<f64>) {
    let cfg = ExperimentConfig::<f64>::default();
    let prep = prepare(&cfg).unwrap();
    let dt = 0.5;
    let plan = TrotterPlan::new(dt, Ordering::KEvenPKOdd).unwrap();
    let period = std::f64::consts::PI / (prep.gap / 2.0);
    let steps = ((period / dt / 200.0).ceil() as usize) * 200;
    let trace = run_trace(&prep.state, &prep.spec, &plan, steps, 200).unwrap();
    let he = effective_hamiltonian_of(&prep.spec, &plan).unwrap();
    (prep, trace, SpectrumReport::from_effective(&he, ""))
}

fn deviation_from_exact(prep: &tunnelsim::rabi::Preparation<f64>, trace: &tunnelsim::rabi::RabiTrace<f64>) -> f64 {
    trace
        .times
        .iter()
        .zip(&trace.n_left)
        .map(|(&t, &n)| (n - left_occupancy(evolve_exact(&prep.exact, &prep.state, t).as_slice())).abs())
        .fold(0.0, f64::max)
}

#[test]
fn trotterized_samples_track_exact_evolution() {
    let (prep, trace, _) = half_step_run();
    let worst = deviation_from_exact(&prep, &trace);
    assert!(worst < 0.05, "max |n_trotter - n_exact| over one period = {worst}");
}

#[test]
fn gate_trace_is_effective_hamiltonian_evolution() {
    let (prep, trace, eff) = half_step_run();
    for (&t, &n) in trace.times.iter().zip(&trace.n_left) {
        assert!((n - left_occupancy(evolve_exact(&eff, &prep.state, t).as_slice())).abs() < 1e-9);
    }
}

#[test]
fn drift_from_exact_is_the_gap_enhancement() {
    let (prep, trace, eff) = half_step_run();
    let (a, b) = match_pair(&prep.exact, doublet_indices(10), &eff);
    let enhanced = eff.energies[b] - eff.energies[a];
    assert!(enhanced > prep.gap);
    // two-level estimate of the lag between cos^2 at the two gaps
    let predicted = trace
        .times
        .iter()
        .map(|&t| ((0.5 * prep.gap * t).cos().powi(2) - (0.5 * enhanced * t).cos().powi(2)).abs())
        .fold(0.0, f64::max);
    let worst = deviation_from_exact(&prep, &trace);
    assert!((worst / predicted - 1.0).abs() < 0.1, "{worst} vs {predicted}");
}

#[test]
fn overlays_separate_for_the_shallow_wide_profile() {
    let cfg = ExperimentConfig::<f64> {
        p: 1.14,
        w: 15.0,
        doublet_index: 7,
        noise_level: 0.0,
        steps: 2_000,
        stride: 200,
        dt_grid: vec![0.5, 1.0, 1.5, 2.0],
        ..Default::default()
    };
    let map = rabi_density_map(&cfg).unwrap();
    let gap: Vec<f64> = map
        .fixed_energy
        .iter()
        .zip(&map.requantized)
        .map(|(f, r)| (f.as_ref().unwrap().period_pi / r.as_ref().unwrap().period_pi).log10().abs())
        .collect();
    assert!(gap.windows(2).all(|w| w[1] > w[0]), "{gap:?}");
    assert!(gap[3] > 0.1, "{gap:?}");
}

#[test]
fn density_map_is_reproducible() {
    let cfg = ExperimentConfig::<f64> { steps: 4_000, stride: 200, dt_grid: vec![0.5, 1.5], seed: 11, ..Default::default() };
    let a = rabi_density_map(&cfg).unwrap();
    let b = rabi_density_map(&cfg).unwrap();
    for (x, y) in a.traces.iter().zip(&b.traces) {
        assert_eq!(x.n_left, y.n_left);
        assert_eq!(x.spectrum, y.spectrum);
    }
}

#[test]
fn symmetric_peak_matches_doublet_gap() {
    let cfg = ExperimentConfig::<f64> { dt_grid: vec![0.5], ..Default::default() };
    let map = rabi_density_map(&cfg).unwrap();
    let t = &map.traces[0];
    let pk = t.peak.unwrap();
    let bin = t.omegas[1] - t.omegas[0];
    assert!((pk.omega - map.gap).abs() < bin, "{} vs {}", pk.omega, map.gap);
}

#[test]
fn detuning_fit_round_trip_and_guards() {
    let t0 = 5500.0;
    let dts = [0.5, 0.75, 1.0, 1.25, 1.5, 1.75];
    let pts: Vec<(f64, f64)> = dts.iter().map(|&dt| (dt, detuned_period(t0, 1e-3, 1.0, dt))).collect();
    let f = detuning_fit(&pts, t0, 1.0).unwrap();
    assert!((f.alpha / 1e-3 - 1.0).abs() < 0.01);
    assert!(f.residual < 1e-6 && f.monotone);
    assert!(matches!(detuning_fit(&pts[..4], t0, 1.0), Err(RabiError::TooFewPoints { need: 5, got: 4 })));
    let mut bumpy = pts.clone();
    bumpy[3].1 *= 1.3;
    let f = detuning_fit(&bumpy, t0, 1.0).unwrap();
    assert!(!f.monotone && f.residual > 1e-3);
    let flat: Vec<(f64, f64)> = dts.iter().map(|&dt| (dt, t0)).collect();
    assert!(detuning_fit(&flat, t0, 1.0).unwrap().alpha < 1e-12);
}

#[test]
fn symmetric_doublet_acquires_no_detuning() {
    let cfg = ExperimentConfig::<f64>::default();
    let prep = prepare(&cfg).unwrap();
    let (i, j) = doublet_indices(10);
    let (mut num, mut den) = (0.0, 0.0);
    for dt in [0.5, 1.0, 1.5, 2.0, 2.5] {
        let he = effective_hamiltonian_of(&prep.spec, &TrotterPlan::new(dt, Ordering::KEvenPKOdd).unwrap()).unwrap();
        let eff = SpectrumReport::from_effective(&he, "");
        let (a, b) = match_pair(&prep.exact, (i, j), &eff);
        let eps = doublet_from_pair(&eff, a, b, cfg.center()).unwrap().epsilon;
        let g2 = dt * dt;
        num += eps * g2;
        den += g2 * g2;
    }
    assert!((num / den).abs() < 1e-4);
}

#[test]
fn visibility_law_limits() {
    let t0 = 5000.0f64;
    let peaks = vec![(1e-6, t0, 0.24), (0.5, 0.8 * t0, 0.2), (1.0, 0.5 * t0, 0.1)];
    let (n0, pts) = visibility_curve(&peaks, t0, Some(0.24));
    assert_eq!(n0, 0.24);
    assert!((pts[0].predicted / n0 - 1.0).abs() < 1e-12);
    assert!((pts[1].predicted - 0.24 * 0.64).abs() < 1e-12);
    // no detuning: the period never moves, so neither does the prediction
    let flat: Vec<(f64, f64, f64)> = [0.5, 1.0, 2.0].iter().map(|&d| (d, t0, 0.2)).collect();
    let (n0, pts) = visibility_curve(&flat, t0, None);
    assert!((n0 - 0.2).abs() < 1e-15);
    assert!(pts.iter().all(|p| p.predicted == n0 && p.deviation.abs() < 1e-15));
}

#[test]
fn zero_phase_noise_reproduces_clean_run() {
    let cfg = ExperimentConfig::<f64>::default();
    let r = tunnelsim::rabi::gate_noise_ensemble(&cfg, 1.0, 0.0, 10).unwrap();
    assert!(r.visibilities.iter().all(|&v| v == r.noiseless));
    assert_eq!(r.energy_shift_std, 0.0);
    assert!(matches!(tunnelsim::rabi::gate_noise_ensemble(&cfg, 1.0, 0.0, 9), Err(RabiError::TooFewTrials(9))));
}

#[test]
fn phase_noise_energy_spread_is_perturbative() {
    let cfg = ExperimentConfig::<f64> { steps: 2_000, ..Default::default() };
    let dt = 1.0;
    let r = tunnelsim::rabi::gate_noise_ensemble(&cfg, dt, 2e-4, 60).unwrap();
    let ratio = r.energy_shift_std / r.energy_shift_std_predicted;
    assert!((ratio - 1.0).abs() < 0.3, "{ratio}");
}

#[test]
fn strong_phase_noise_kills_visibility() {
    let cfg = ExperimentConfig::<f64>::default();
    let dt = 1.0;
    let clean = tunnelsim::rabi::gate_noise_ensemble(&cfg, dt, 0.0, 10).unwrap();
    let noisy = tunnelsim::rabi::gate_noise_ensemble(&cfg, dt, 5.0 * clean.threshold, 20).unwrap();
    assert!(noisy.median < 0.5 * clean.noiseless, "{} vs {}", noisy.median, clean.noiseless);
}

#[test]
fn semiclassical_level_of_the_run_is_the_tenth() {
    // the overlay curves hang off the tenth hard-wall level of the left well
    let cfg = ExperimentConfig::<f64>::default();
    let prep = prepare(&cfg).unwrap();
    let m = PhaseSpaceModel::from_chain(&prep.spec, Kinetic::Bare).unwrap();
    let lv = bohr_levels(&m, &Well::new(1.0, 0.0, cfg.center()).with_partner(50.0), Boundary::HardWallLeft)
        .into_iter()
        .find(|l| l.n == 10)
        .unwrap();
    assert!((lv.energy - prep.energy).abs() < 0.01);
}
