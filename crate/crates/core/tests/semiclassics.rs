use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use tunnelsim::chain::{build_chain, hamiltonian_matrix, ChainSpec, PotentialFamily};
use tunnelsim::numeric::loglog_slope;
use tunnelsim::semiclassics::{
    action_allowed, barrier_action, bohr_levels, correction_dh, correction_scale, detuning_effective,
    large_step_kinetic, pair_shifts, perturbation_shifts, period_change, phase_portrait, predict_level,
    tunneling_rates, turning_points, Boundary, Kinetic, LevelPrediction, PhaseSpaceModel, TurningKind, Well,
};
use tunnelsim::spectral::{diagonalize, diagonalize_chain, doublet_from_pair, match_pair, match_states, SpectrumReport};
use tunnelsim::trotter::{effective_hamiltonian_of, Ordering, TrotterPlan};

fn bare(spec: &ChainSpec<f64>) -> PhaseSpaceModel<f64> {
    PhaseSpaceModel::from_chain(spec, Kinetic::Bare).unwrap()
}

fn harmonic(l: usize, k: f64) -> ChainSpec<f64> {
    let c = (l as f64 + 1.0) / 2.0;
    ChainSpec::new(1.0, (1..=l).map(|n| 0.5 * k * (n as f64 - c).powi(2)).collect()).unwrap()
}

fn experimental(dn: f64, alpha: f64) -> ChainSpec<f64> {
    build_chain(50, 1.0, &PotentialFamily::Experimental { p: 1.25, w: 8.0, dn, alpha }).unwrap()
}

/// Left hard-wall well of the 50-site experimental profile and its mirror image.
fn experimental_wells() -> (Well<f64>, Well<f64>) {
    (Well::new(1.0, 0.0, 25.5).with_partner(50.0), Well::new(50.0, 25.5, 51.0).with_partner(1.0))
}

fn level(levels: &[LevelPrediction<f64>], n: i64) -> &LevelPrediction<f64> {
    levels.iter().find(|l| l.n == n).unwrap()
}

#[test]
fn momentum_solves_its_equation() {
    let spec = build_chain(50, 1.0, &PotentialFamily::Cosine { p: 1.25 }).unwrap();
    for kin in [Kinetic::Bare, Kinetic::Corrected(0.4), Kinetic::LargeStep(1.49707035)] {
        let m = PhaseSpaceModel::from_chain(&spec, kin).unwrap();
        for e in [-2.0, -1.0, -0.2, 0.5, 1.7] {
            for k in 0..=98 {
                let x = 1.0 + 0.5 * k as f64;
                let r = m.equation_residual(e, x, m.momentum(e, x));
                assert!(r < 1e-10, "{kin:?} E={e} x={x}: {r:e}");
            }
        }
    }
}

#[test]
fn large_step_momentum_reduces_to_bare() {
    let spec = build_chain(50, 1.0, &PotentialFamily::Cosine { p: 1.25 }).unwrap();
    let b = bare(&spec);
    let ls = PhaseSpaceModel::from_chain(&spec, Kinetic::LargeStep(0.05)).unwrap();
    let mut worst: f64 = 0.0;
    for e in [-1.5, -0.5, 0.0, 0.6] {
        for k in 0..=49 {
            let x = 1.0 + k as f64;
            let p0 = b.momentum(e, x);
            if p0.im != 0.0 || p0.re < 0.05 || p0.re > PI - 0.05 {
                continue;
            }
            worst = worst.max((ls.momentum(e, x).re / p0.re - 1.0).abs());
        }
    }
    assert!(worst < 1e-3, "{worst:e}");
}

#[test]
fn large_step_kinetic_series_and_singularity() {
    let g: f64 = 0.05;
    let p = PI / 3.0;
    let k = large_step_kinetic(p, 1.0, g);
    let corr = k.t + p.cos();
    assert!((corr / correction_dh(p, 1.0, g) - 1.0).abs() < 1e-3);

    let k = large_step_kinetic(0.7, 1.0, 0.1f64);
    assert!((k.p_c / (4.0f64 / 0.1).ln() - 1.0).abs() < 0.02);

    // bare group velocity sin p in the small-step limit
    for p in [0.3, 1.0, 2.2] {
        let k = large_step_kinetic(p, 1.0, 1e-3f64);
        assert!((k.v - f64::sin(p)).abs() < 1e-6);
        // defined modulo pi
        assert!(k.theta.sin().abs() < 1e-6);
    }
}

#[test]
fn large_step_mixing_angle_at_half_step() {
    // at J dt = pi the angle is pi/4 - p/2 on 0 < p < pi
    for p in [0.2, 0.9, FRAC_PI_2, 2.5] {
        let k = large_step_kinetic(p, 1.0, PI);
        assert!((k.theta - (FRAC_PI_4 - 0.5 * p)).rem_euclid(PI) < 1e-9 || (k.theta - (FRAC_PI_4 - 0.5 * p)).rem_euclid(PI) > PI - 1e-9, "p={p}: {}", k.theta);
    }
}

#[test]
fn cosine_double_well_turning_points() {
    let spec = build_chain(50, 1.0, &PotentialFamily::Cosine { p: 1.25 }).unwrap();
    let m = bare(&spec);
    let tps = turning_points(&m, -0.5);
    assert_eq!(tps.len(), 4);
    assert!(tps.iter().all(|t| t.kind == TurningKind::Standard));
    for t in &tps {
        assert!((m.cos_momentum(-0.5, t.x) - 1.0).abs() < 1e-8);
        assert!((t.delta - t.x.fract()).abs() < 1e-15);
    }
    // anomalous points appear once E + J >= 0.75 J
    assert!(turning_points(&m, -0.3).iter().all(|t| t.kind == TurningKind::Standard));
    assert!(turning_points(&m, -0.2).iter().any(|t| t.kind == TurningKind::Anomalous));
}

#[test]
fn linear_potential_turning_points() {
    let spec = build_chain(200, 1.0, &PotentialFamily::Linear { alpha: 0.05 }).unwrap();
    let tps = turning_points(&bare(&spec), 5.0);
    assert_eq!(tps.len(), 2);
    assert_eq!(tps[0].kind, TurningKind::Anomalous);
    assert_eq!(tps[1].kind, TurningKind::Standard);
    assert!((tps[0].x - 80.0).abs() < 1e-8);
    assert!((tps[1].x - 120.0).abs() < 1e-8);
    assert!(turning_points(&bare(&spec), 50.0).is_empty());
}

#[test]
fn flat_action_and_period() {
    let spec = ChainSpec::new(1.0, vec![0.0; 20]).unwrap();
    let (s, t) = action_allowed(&bare(&spec), 0.0, 3.0, 11.0).unwrap();
    assert!((s - FRAC_PI_2 * 8.0).abs() < 1e-9);
    // dS/dE = (x2 - x1)/(J sin p)
    assert!((t - 16.0).abs() < 1e-6);
}

#[test]
fn harmonic_well_is_isochronous() {
    let k = 1e-3;
    let spec = harmonic(200, k);
    let m = bare(&spec);
    let well = Well::new(100.5, 1.0, 200.0);
    let t0 = 2.0 * PI / k.sqrt();
    let mut periods = Vec::new();
    for de in [0.005, 0.01, 0.02] {
        let lv = predict_level(&m, &well, Boundary::TwoTurningPoints, -1.0 + de, 0).unwrap();
        let (_, t) = action_allowed(&m, lv.energy, lv.left.x, lv.right.x).unwrap();
        assert!((t / t0 - 1.0).abs() < 0.01, "E-E0={de}: {t} vs {t0}");
        assert!((lv.t12 / t0 - 1.0).abs() < 0.01);
        periods.push(t);
    }
    assert!((periods[2] / periods[0] - 1.0).abs() < 0.01);
}

#[test]
fn harmonic_ground_state() {
    let k = 1e-3;
    let spec = harmonic(200, k);
    let r = diagonalize(&hamiltonian_matrix(&spec));
    let levels = bohr_levels(&bare(&spec), &Well::new(100.5, 1.0, 200.0), Boundary::TwoTurningPoints);
    let lv = level(&levels, 0);
    let floor = spec.band_bottom();
    let half = 0.5 * k.sqrt();
    assert!(((lv.energy - floor) / half - 1.0).abs() < 0.1);
    assert!(((lv.energy - floor) / (r.energies[0] - floor) - 1.0).abs() < 0.1);
}

#[test]
fn spacing_matches_diagonalization() {
    let spec = build_chain(200, 1.0, &PotentialFamily::Cosine { p: 1.25 }).unwrap();
    let r = diagonalize(&hamiltonian_matrix(&spec));
    let m = bare(&spec);
    let levels = bohr_levels(&m, &Well::around_minimum(&m, 1.0, 100.5), Boundary::TwoTurningPoints);
    // one state per well: the doublet members 2n and 2n+1 are degenerate here
    let mean = |n: usize| 0.5 * (r.energies[2 * n] + r.energies[2 * n + 1]);
    for n in 5..=15 {
        let exact = 0.5 * (mean(n + 1) - mean(n - 1));
        let lv = level(&levels, n as i64);
        assert!((lv.spacing / exact - 1.0).abs() < 0.05, "n={n}: {} vs {exact}", lv.spacing);
    }
}

#[test]
fn linear_ladder_from_anomalous_phase() {
    let alpha = 0.05;
    let spec = build_chain(200, 1.0, &PotentialFamily::Linear { alpha }).unwrap();
    let m = bare(&spec);
    // allowed interval [E/α - 20, E/α + 20] is pinned by one anomalous and one standard point
    let levels = bohr_levels(&m, &Well::new(100.0, 30.0, 170.0).with_ceiling(5.6), Boundary::TwoTurningPoints);
    let inner: Vec<_> = levels.iter().filter(|l| l.left.x > 31.0 && l.right.x < 169.0).collect();
    assert!(inner.len() >= 10);
    for lv in inner {
        let n = (lv.energy / alpha).round();
        assert!((lv.energy - alpha * n).abs() < 1e-3 * alpha, "E={}", lv.energy);
    }
}

#[test]
fn experimental_tenth_level() {
    let spec = experimental(0.0, 0.0);
    let m = bare(&spec);
    let (left, _) = experimental_wells();
    let levels = bohr_levels(&m, &left, Boundary::HardWallLeft);
    let lv = level(&levels, 10);
    assert!((lv.energy - spec.band_bottom() - 1.156).abs() < 0.01);
}

#[test]
fn barrier_action_limits() {
    let spec = build_chain(50, 1.0, &PotentialFamily::Cosine { p: 1.25 }).unwrap();
    let m = bare(&spec);
    let well = Well::around_minimum(&m, 1.0, 25.5).with_partner(37.75);
    // below the onset of anomalous points the level data carries S_B
    let mut last = f64::INFINITY;
    for k in 0..9 {
        let e = -2.0 + 0.2 * k as f64;
        let s = predict_level(&m, &well, Boundary::TwoTurningPoints, e, 0).unwrap().s_b.unwrap();
        assert!(s < last && s > 0.0, "E={e}");
        last = s;
    }
    // barrier top of the interpolated profile, less J
    let top = m.potential().argmax(20.0, 31.0).1 - 1.0;
    let from_edge = |e: f64| {
        let tp = turning_points(&m, e).into_iter().find(|t| t.x > 20.0 && t.kind == TurningKind::Standard).unwrap();
        barrier_action(&m, e, tp.x, 37.75).unwrap().s_b
    };
    let sb: Vec<f64> = [1e-2, 1e-3, 1e-5].iter().map(|d| from_edge(top - d)).collect();
    assert!(sb.windows(2).all(|w| w[1] < w[0]));
    assert!(sb[2] < 1e-3, "{sb:?}");
}

#[test]
fn barrier_action_scales_as_root_height() {
    let ps = [0.005, 0.01, 0.02, 0.04];
    let sb: Vec<f64> = ps
        .iter()
        .map(|&p| {
            let spec = build_chain(100, 1.0, &PotentialFamily::Cosine { p }).unwrap();
            let m = bare(&spec);
            let well = Well::around_minimum(&m, 1.0, 50.5).with_partner(75.25);
            predict_level(&m, &well, Boundary::TwoTurningPoints, spec.band_bottom() + 0.01 * p, 0).unwrap().s_b.unwrap()
        })
        .collect();
    let s = loglog_slope(&ps, &sb);
    assert!((s - 0.5).abs() <= 0.1, "{s}");
}

#[test]
fn experimental_tunneling_amplitude() {
    let spec = experimental(0.0, 0.0);
    let m = bare(&spec);
    let (lw, rw) = experimental_wells();
    let lv = level(&bohr_levels(&m, &lw, Boundary::HardWallLeft), 10).clone();
    let rv = level(&bohr_levels(&m, &rw, Boundary::HardWallRight), 10).clone();
    assert!((lv.energy - rv.energy).abs() < 1e-6);
    let rates = tunneling_rates(&m, &lv, &rv).unwrap();
    let ratio = rates.eta / 5.51e-4;
    assert!(ratio > 0.5 && ratio < 2.0, "eta {}", rates.eta);
    // symmetric reduction and Gamow consistency
    assert!((rates.eta / lv.eta.unwrap() - 1.0).abs() < 1e-4);
    let g = 2.0 * PI * rates.eta * rates.eta / lv.spacing;
    assert!((rates.gamma_left / g - 1.0).abs() < 1e-3);
    assert!((lv.gamma.unwrap() - 2.0 * PI * lv.eta.unwrap().powi(2) / lv.spacing).abs() < 1e-15);
}

#[test]
fn shifts_vanish_at_zero_step() {
    let spec = experimental(0.0, 0.0);
    let m = bare(&spec);
    let (lw, rw) = experimental_wells();
    let lv = level(&bohr_levels(&m, &lw, Boundary::HardWallLeft), 10).clone();
    let rv = level(&bohr_levels(&m, &rw, Boundary::HardWallRight), 10).clone();
    let s = perturbation_shifts(&m, &lv, 0.0);
    assert_eq!(s.ds12, 0.0);
    assert_eq!(s.de, 0.0);
    assert_eq!(s.ds_b.unwrap(), 0.0);
    assert_eq!(s.eta_ratio.unwrap(), 1.0);
    assert_eq!(s.gamma_ratio.unwrap(), 1.0);
    assert_eq!(period_change(&m, &lv, 0.0), (0.0, 0.0));
    let p = pair_shifts(&m, &lv, &rv, 0.0).unwrap();
    assert_eq!(p.eta_ratio, 1.0);
}

#[test]
fn harmonic_shift_follows_energy() {
    let dt = 0.2;
    let c = correction_scale(1.0, dt);
    // quadratic limit: δE = (J dt)^2/24 (E - E_floor)
    let k = 1e-5;
    let spec = harmonic(400, k);
    let m = bare(&spec);
    let levels = bohr_levels(&m, &Well::new(200.5, 1.0, 400.0), Boundary::TwoTurningPoints);
    for n in 0..3 {
        let lv = level(&levels, n);
        let de = perturbation_shifts(&m, lv, dt).de;
        assert!((de / (c * (lv.energy - spec.band_bottom())) - 1.0).abs() < 0.02, "n={n}");
    }
    // stiffer well: the anharmonic part of the kinetic term shows, and the
    // semiclassical shift follows diagonalization
    let k = 1e-3;
    let spec = harmonic(200, k);
    let m = bare(&spec);
    let levels = bohr_levels(&m, &Well::new(100.5, 1.0, 200.0), Boundary::TwoTurningPoints);
    let exact = diagonalize(&hamiltonian_matrix(&spec));
    let he = effective_hamiltonian_of(&spec, &TrotterPlan::new(dt, Ordering::KEvenKOddP).unwrap()).unwrap();
    let eff = SpectrumReport::from_effective(&he, "");
    for n in 0..6 {
        let lv = level(&levels, n as i64);
        let de = perturbation_shifts(&m, lv, dt).de;
        let m_ = match_states(&exact, &eff, &[n])[0];
        let direct = eff.energies[m_] - exact.energies[n];
        assert!((de / direct - 1.0).abs() < 0.03, "n={n}: {de:e} vs {direct:e}");
    }
}

#[test]
fn mirror_wells_have_no_effective_detuning() {
    let spec = experimental(0.0, 0.0);
    let m = bare(&spec);
    let (lw, rw) = experimental_wells();
    let lv = level(&bohr_levels(&m, &lw, Boundary::HardWallLeft), 10).clone();
    let rv = level(&bohr_levels(&m, &rw, Boundary::HardWallRight), 10).clone();
    let dt = 0.5;
    let (ls, rs) = (perturbation_shifts(&m, &lv, dt), perturbation_shifts(&m, &rv, dt));
    let eta = lv.eta.unwrap();
    let d = detuning_effective(0.0, &lv, &ls, &rv, &rs, eta, 1.0, dt);
    assert!(d.epsilon.abs() < 1e-9 * ls.de.abs().max(1e-12));
    // threshold definition: (J dt*)^2 = eta n_cl / Δ
    let n_cl = (lv.n_cl + rv.n_cl) as f64 / 2.0;
    let spacing = (lv.spacing * rv.spacing).sqrt();
    assert!((d.threshold_dt.powi(2) - eta * n_cl / spacing).abs() < 1e-12);
    assert_eq!(d.criterion_ok, dt <= d.threshold_dt);
}

#[test]
fn asymmetric_detuning_grows_quadratically() {
    let spec = experimental(4.0, 0.0);
    let exact = diagonalize_chain(&spec);
    let base = doublet_from_pair(&exact, 18, 19, 25.5).unwrap().epsilon;
    let dts = [0.1, 0.2, 0.4];
    let shifts: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let he = effective_hamiltonian_of(&spec, &TrotterPlan::new(dt, Ordering::KEvenPKOdd).unwrap()).unwrap();
            let eff = SpectrumReport::from_effective(&he, "");
            let (a, b) = match_pair(&exact, (18, 19), &eff);
            (doublet_from_pair(&eff, a, b, 25.5).unwrap().epsilon - base).abs()
        })
        .collect();
    let s = loglog_slope(&dts, &shifts);
    assert!((s - 2.0).abs() <= 0.2, "slope {s}, shifts {shifts:?}");
}

#[test]
fn period_change_is_bounded() {
    let spec = build_chain(100, 1.0, &PotentialFamily::Cosine { p: 1.25 }).unwrap();
    let m = bare(&spec);
    let levels = bohr_levels(&m, &Well::around_minimum(&m, 1.0, 50.5), Boundary::TwoTurningPoints);
    let mut checked = 0;
    for dt in [0.1, 0.3] {
        let bound = correction_scale(1.0, dt);
        for lv in levels.iter().filter(|l| l.n >= 1 && l.s12 > 3.0) {
            let (d1, _) = period_change(&m, lv, dt);
            assert!(d1.abs() <= bound, "n={} dt={dt}: {d1:e} > {bound:e}", lv.n);
            checked += 1;
        }
    }
    assert!(checked > 10);
}

#[test]
fn energy_term_of_period_change_shrinks_with_length() {
    // same smooth profile sampled more finely, same quantum number
    let ratio = |l: usize| {
        let spec = build_chain(l, 1.0, &PotentialFamily::Cosine { p: 1.25 }).unwrap();
        let m = bare(&spec);
        let levels = bohr_levels(&m, &Well::around_minimum(&m, 1.0, (l as f64 + 1.0) / 2.0), Boundary::TwoTurningPoints);
        let (d1, d2) = period_change(&m, level(&levels, 1), 0.2);
        (d2 / d1).abs()
    };
    let r: Vec<f64> = [50, 100, 200].iter().map(|&l| ratio(l)).collect();
    assert!(r[1] < r[0] && r[2] < r[1], "{r:?}");
}

#[test]
fn portrait_topology() {
    let spec = build_chain(50, 1.0, &PotentialFamily::Cosine { p: 1.25 }).unwrap();
    let small = PhaseSpaceModel::from_chain(&spec, Kinetic::LargeStep(0.05)).unwrap();
    for c in phase_portrait(&small, &[-1.8, -1.2], 400) {
        assert_eq!(c.regions.len(), 2);
        assert!(c.regions[0].x_end < 25.5 && c.regions[1].x_start > 25.5);
    }

    let big = PhaseSpaceModel::from_chain(&spec, Kinetic::LargeStep(1.49707035)).unwrap();
    let energies: Vec<f64> = (0..400).map(|k| -2.3 + 0.005 * k as f64).collect();
    let curves = phase_portrait(&big, &energies, 400);
    // both wells plus an allowed island on top of the central barrier
    let centred = |c: &tunnelsim::semiclassics::PortraitCurve<f64>, at: f64| {
        c.regions.iter().any(|r| r.x_start / 50.0 < at && r.x_end / 50.0 > at)
    };
    let island = curves.iter().filter(|c| centred(c, 0.25) && centred(c, 0.5) && centred(c, 0.75)).count();
    assert!(island > 10);
    let low = PhaseSpaceModel::from_chain(&spec, Kinetic::LargeStep(0.05)).unwrap();
    assert!(phase_portrait(&low, &energies, 400).iter().all(|c| !(centred(c, 0.25) && centred(c, 0.5))));

    // total enclosed area only jumps where the topology changes
    for w in curves.windows(2) {
        let area = |c: &tunnelsim::semiclassics::PortraitCurve<f64>| c.regions.iter().map(|r| r.area).sum::<f64>();
        if w[0].regions.len() == w[1].regions.len() {
            assert!((area(&w[1]) - area(&w[0])).abs() < 2.0, "E={}", w[1].energy);
        }
    }
}
