//! Rabi-oscillation experiment on the engineered double well: state
//! preparation, long Trotter runs, occupancy spectra and the fits built on them.

use nalgebra::{Complex, ComplexField, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::chain::{build_chain, ChainError, ChainSpec, PotentialFamily};
use crate::numeric::golden_min;
use crate::scalar::{from_usize, lit, to_f64, Cplx, Real};
use crate::semiclassics::{bohr_levels, rabi_period, Boundary, Kinetic, PhaseSpaceModel, Well};
use crate::spectral::{diagonalize_chain, doublet_from_pair, SpectrumReport};
use crate::trotter::{norm, Ordering, StepCircuit, TrotterError, TrotterPlan};

#[derive(Debug, Error)]
pub enum RabiError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Trotter(#[from] TrotterError),
    #[error("total steps {steps} is not a multiple of the stride {stride}")]
    Stride { steps: usize, stride: usize },
    #[error("noise level {0} outside [0, 1)")]
    Noise(f64),
    #[error("doublet index {index} not available for a chain of {l} sites")]
    Doublet { index: usize, l: usize },
    #[error("step grid is empty or contains a non-positive step")]
    Grid,
    #[error("no interior optimum of the Rabi period for alpha in [{0}, {1}]")]
    NoInteriorMaximum(f64, f64),
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("need at least 10 trials, got {0}")]
    TooFewTrials(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig<T: Real> {
    pub l: usize,
    pub j: T,
    pub p: T,
    pub w: T,
    pub dn: T,
    pub alpha: T,
    /// 1-based doublet ordinal counted from the bottom of the spectrum.
    pub doublet_index: usize,
    pub noise_level: T,
    pub seed: u64,
    /// Total Trotter steps `M`.
    pub steps: usize,
    /// Sampling stride `δM`.
    pub stride: usize,
    pub dt_grid: Vec<T>,
    pub ordering: Ordering<T>,
}

impl<T: Real> Default for ExperimentConfig<T> {
    fn default() -> Self {
        ExperimentConfig {
            l: 50,
            j: T::one(),
            p: lit(1.25),
            w: lit(8.0),
            dn: T::zero(),
            alpha: T::zero(),
            doublet_index: 10,
            noise_level: lit(0.1),
            seed: 0,
            steps: 60_000,
            stride: 200,
            dt_grid: (0..9).map(|k| lit::<T>(0.5) + lit::<T>(0.25) * from_usize::<T>(k)).collect(),
            ordering: Ordering::KEvenPKOdd,
        }
    }
}

impl<T: Real> ExperimentConfig<T> {
    pub fn validate(&self) -> Result<(), RabiError> {
        if self.stride == 0 || self.steps % self.stride != 0 || self.steps == 0 {
            return Err(RabiError::Stride { steps: self.steps, stride: self.stride });
        }
        if !(self.noise_level >= T::zero() && self.noise_level < T::one()) {
            return Err(RabiError::Noise(to_f64(self.noise_level)));
        }
        if self.doublet_index == 0 || 2 * self.doublet_index > self.l {
            return Err(RabiError::Doublet { index: self.doublet_index, l: self.l });
        }
        if self.dt_grid.is_empty() || self.dt_grid.iter().any(|&d| !(d > T::zero())) {
            return Err(RabiError::Grid);
        }
        experimental_potential(self.p, self.w, self.dn, self.alpha, self.l)?;
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.steps / self.stride
    }

    pub fn chain(&self) -> Result<ChainSpec<T>, RabiError> {
        Ok(build_chain(self.l, self.j, &experimental_potential(self.p, self.w, self.dn, self.alpha, self.l)?)?)
    }

    /// Barrier centre `(L+1)/2`.
    pub fn center(&self) -> T {
        from_usize::<T>(self.l + 1) / lit(2.0)
    }
}

/// Engineered double-well family after parameter checks.
pub fn experimental_potential<T: Real>(p: T, w: T, dn: T, alpha: T, l: usize) -> Result<PotentialFamily<T>, ChainError> {
    let fam = PotentialFamily::Experimental { p, w, dn, alpha };
    fam.evaluate(l)?;
    Ok(fam)
}

/// Lower and upper state indices of doublet `k` (1-based).
pub fn doublet_indices(k: usize) -> (usize, usize) {
    (2 * k - 2, 2 * k - 1)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaTuning<T: Real> {
    pub alpha: T,
    /// Full gap of the doublet at `alpha`.
    pub gap: T,
    /// Rabi period `2π/gap`.
    pub period: T,
    /// Detuning in the localized basis at `alpha`.
    pub epsilon: T,
}

fn doublet_gap<T: Real>(spec: &ChainSpec<T>, k: usize) -> T {
    let r = diagonalize_chain(spec);
    let (i, j) = doublet_indices(k);
    r.energies[j] - r.energies[i]
}

/// Tilt `alpha` maximizing the doublet's Rabi period on `[lo, hi]`.
pub fn tune_alpha_for_resonance<T: Real>(
    p: T,
    w: T,
    dn: T,
    l: usize,
    j: T,
    doublet_index: usize,
    bracket: (T, T),
) -> Result<AlphaTuning<T>, RabiError> {
    if doublet_index == 0 || 2 * doublet_index > l {
        return Err(RabiError::Doublet { index: doublet_index, l });
    }
    let gap_at = |a: T| -> T {
        build_chain(l, j, &PotentialFamily::Experimental { p, w, dn, alpha: a })
            .map(|c| doublet_gap(&c, doublet_index))
            .unwrap_or(T::max_value().unwrap())
    };
    let (lo, hi) = bracket;
    let n = 80;
    let step = (hi - lo) / from_usize(n);
    let mut best = 0;
    let mut bv = gap_at(lo);
    for k in 1..=n {
        let v = gap_at(lo + step * from_usize(k));
        if v < bv {
            bv = v;
            best = k;
        }
    }
    if best == 0 || best == n {
        return Err(RabiError::NoInteriorMaximum(to_f64(lo), to_f64(hi)));
    }
    let a0 = lo + step * from_usize(best - 1);
    let a1 = lo + step * from_usize(best + 1);
    let (alpha, gap) = golden_min(gap_at, a0, a1, lit(1e-9));
    let spec = build_chain(l, j, &PotentialFamily::Experimental { p, w, dn, alpha })?;
    let r = diagonalize_chain(&spec);
    let (i, jj) = doublet_indices(doublet_index);
    let center = from_usize::<T>(l + 1) / lit(2.0);
    let epsilon = doublet_from_pair(&r, i, jj, center).map(|d| d.epsilon).unwrap_or(T::zero());
    Ok(AlphaTuning { alpha, gap, period: T::two_pi() / gap, epsilon })
}

/// Occupancy of the sites `i <= L/2`.
pub fn left_occupancy<T: Real>(psi: &[Cplx<T>]) -> T {
    psi[..psi.len() / 2].iter().fold(T::zero(), |s, z| s + z.modulus_squared())
}

/// Superposition of the two doublet states with the largest left-half
/// occupancy, then multiplicative uniform noise `ψ_i (1 + ε_i)` and
/// renormalization.
pub fn prepare_initial_state<T: Real>(a: &DVector<Cplx<T>>, b: &DVector<Cplx<T>>, noise_level: T, seed: u64) -> DVector<Cplx<T>> {
    let half = a.len() / 2;
    let w = |u: &DVector<Cplx<T>>, v: &DVector<Cplx<T>>| {
        let mut s = Complex::new(T::zero(), T::zero());
        for k in 0..half {
            s += u[k].conj() * v[k];
        }
        s
    };
    let waa = w(a, a).re;
    let wbb = w(b, b).re;
    let wab = w(a, b);
    let hlf = lit::<T>(0.5);
    let rad = ((waa - wbb) * (waa - wbb) * hlf * hlf + wab.modulus_squared()).sqrt();
    let top = (waa + wbb) * hlf + rad;
    let (ca, cb) = if wab.modulus() > T::default_epsilon() {
        let v = (wab, Complex::new(top - waa, T::zero()));
        let n = (v.0.modulus_squared() + v.1.modulus_squared()).sqrt();
        (v.0 / Complex::new(n, T::zero()), v.1 / Complex::new(n, T::zero()))
    } else if waa >= wbb {
        (Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::zero()))
    } else {
        (Complex::new(T::zero(), T::zero()), Complex::new(T::one(), T::zero()))
    };
    let mut psi = a * ca + b * cb;
    if noise_level > T::zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nl = to_f64(noise_level);
        for z in psi.iter_mut() {
            let e: f64 = rng.random_range(-nl..=nl);
            *z *= lit::<T>(1.0 + e);
        }
    }
    let n = norm(psi.as_slice());
    psi.map(|z| z / Complex::new(n, T::zero()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralPeak<T: Real> {
    pub bin: usize,
    pub omega: T,
    /// `2π/ω`
    pub period: T,
    /// Interpolated `|n_ω|` at the peak.
    pub magnitude: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RabiTrace<T: Real> {
    pub dt: T,
    pub times: Vec<T>,
    pub n_left: Vec<T>,
    pub omegas: Vec<T>,
    /// `|n_ω|²` on `omegas`.
    pub spectrum: Vec<T>,
    pub peak: Option<SpectralPeak<T>>,
    /// `| ‖ψ(t_final)‖ - 1 |`
    pub norm_drift: T,
}

/// Frequency grid `ω_n = 2π/(δt δM) · (n-1)/(N-1)`, `n = 1..N`.
pub fn frequency_grid<T: Real>(dt: T, stride: usize, samples: usize) -> Vec<T> {
    let base = T::two_pi() / (dt * from_usize(stride));
    let den = from_usize::<T>(samples.max(2) - 1);
    (0..samples).map(|k| base * from_usize::<T>(k) / den).collect()
}

/// `|n_ω|²` with `n_ω = (1/N) Σ_t x(t) e^{iωt}`.
pub fn occupancy_spectrum<T: Real>(times: &[T], values: &[T], omegas: &[T]) -> Vec<T> {
    let nf = from_usize::<T>(values.len());
    omegas
        .iter()
        .map(|&w| {
            let mut s = Complex::new(T::zero(), T::zero());
            for (&t, &x) in times.iter().zip(values) {
                let (sn, cs) = (w * t).sin_cos();
                s += Complex::new(cs, sn) * x;
            }
            (s / nf).modulus_squared()
        })
        .collect()
}

/// Largest bin in `1..=N/2`, refined by a parabola through three bins of `|n_ω|`.
pub fn find_peak<T: Real>(omegas: &[T], spectrum: &[T]) -> Option<SpectralPeak<T>> {
    let n = spectrum.len();
    if n < 3 {
        return None;
    }
    let top = (n / 2).max(1);
    let mut best = 1;
    for k in 2..=top.min(n - 1) {
        if spectrum[k] > spectrum[best] {
            best = k;
        }
    }
    let amp = |k: usize| spectrum[k].sqrt();
    let dw = omegas[1] - omegas[0];
    let (mut omega, mut mag) = (omegas[best], amp(best));
    if best + 1 < n {
        let (ym, y0, yp) = (amp(best - 1), amp(best), amp(best + 1));
        let den = ym - lit::<T>(2.0) * y0 + yp;
        if den < T::zero() {
            let off = lit::<T>(0.5) * (ym - yp) / den;
            omega = omegas[best] + off * dw;
            mag = y0 - lit::<T>(0.25) * (ym - yp) * off;
        }
    }
    Some(SpectralPeak { bin: best, omega, period: T::two_pi() / omega, magnitude: mag })
}

/// Gate-level evolution recording the left occupancy every `stride` steps.
pub fn run_trace<T: Real>(
    state: &DVector<Cplx<T>>,
    spec: &ChainSpec<T>,
    plan: &TrotterPlan<T>,
    steps: usize,
    stride: usize,
) -> Result<RabiTrace<T>, RabiError> {
    if stride == 0 || steps % stride != 0 || steps == 0 {
        return Err(RabiError::Stride { steps, stride });
    }
    if state.len() != spec.len() {
        return Err(TrotterError::DimensionMismatch { expected: spec.len(), got: state.len() }.into());
    }
    let nrm = norm(state.as_slice());
    if (nrm - T::one()).abs() > lit(1e-8) {
        return Err(TrotterError::NotNormalized(to_f64(nrm)).into());
    }
    let circuit = StepCircuit::new(spec, plan);
    let samples = steps / stride;
    let dt = plan.dt();
    let mut psi = state.clone();
    let mut times = Vec::with_capacity(samples);
    let mut n_left = Vec::with_capacity(samples);
    for k in 1..=samples {
        circuit.run(psi.as_mut_slice(), stride);
        times.push(dt * from_usize::<T>(k * stride));
        n_left.push(left_occupancy(psi.as_slice()));
    }
    let omegas = frequency_grid(dt, stride, samples);
    let spectrum = occupancy_spectrum(&times, &n_left, &omegas);
    let peak = find_peak(&omegas, &spectrum);
    Ok(RabiTrace { dt, times, n_left, omegas, spectrum, peak, norm_drift: (norm(psi.as_slice()) - T::one()).abs() })
}

/// Exact spectrum, doublet states and prepared initial state of a config.
#[derive(Clone, Debug)]
pub struct Preparation<T: Real> {
    pub spec: ChainSpec<T>,
    pub exact: SpectrumReport<T>,
    pub state: DVector<Cplx<T>>,
    /// Mean energy of the doublet at `δt = 0`.
    pub energy: T,
    /// Full gap of the doublet at `δt = 0`.
    pub gap: T,
}

pub fn prepare<T: Real>(config: &ExperimentConfig<T>) -> Result<Preparation<T>, RabiError> {
    config.validate()?;
    let spec = config.chain()?;
    let exact = diagonalize_chain(&spec);
    let (i, j) = doublet_indices(config.doublet_index);
    let state = prepare_initial_state(&exact.state(i), &exact.state(j), config.noise_level, config.seed);
    let energy = (exact.energies[i] + exact.energies[j]) / lit(2.0);
    let gap = exact.energies[j] - exact.energies[i];
    Ok(Preparation { spec, exact, state, energy, gap })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverlayPoint<T: Real> {
    pub dt: T,
    pub energy: T,
    /// `π T_cl e^{S_b}`
    pub period_pi: T,
    /// `2π T_cl e^{S_b}`
    pub period_two_pi: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMap<T: Real> {
    pub traces: Vec<RabiTrace<T>>,
    /// Semiclassical period at the unperturbed doublet energy.
    pub fixed_energy: Vec<Option<OverlayPoint<T>>>,
    /// Semiclassical period at the energy re-quantized for each `δt`.
    pub requantized: Vec<Option<OverlayPoint<T>>>,
    pub energy: T,
    pub gap: T,
}

impl<T: Real> DensityMap<T> {
    /// `(δt, period, |n_ω|)` of each trace's peak.
    pub fn peaks(&self) -> Vec<(T, T, T)> {
        self.traces
            .iter()
            .filter_map(|t| t.peak.map(|p| (t.dt, p.period, p.magnitude)))
            .collect()
    }
}

fn semiclassical_well<T: Real>(config: &ExperimentConfig<T>) -> Well<T> {
    let half = config.center();
    Well::new(T::one(), T::zero(), half).with_partner(from_usize(config.l))
}

fn overlay_at<T: Real>(config: &ExperimentConfig<T>, spec: &ChainSpec<T>, dt: T, e_fixed: T) -> (Option<OverlayPoint<T>>, Option<OverlayPoint<T>>) {
    let Ok(model) = PhaseSpaceModel::from_chain(spec, Kinetic::LargeStep(dt)) else {
        return (None, None);
    };
    let well = semiclassical_well(config);
    let point = |e: T| {
        rabi_period(&model, &well, Boundary::HardWallLeft, e)
            .map(|r| OverlayPoint { dt, energy: e, period_pi: r.period_pi, period_two_pi: r.period_two_pi })
    };
    let fixed = point(e_fixed);
    let n = config.doublet_index as i64;
    let req = bohr_levels(&model, &well, Boundary::HardWallLeft)
        .into_iter()
        .find(|lv| lv.n == n)
        .and_then(|lv| point(lv.energy));
    (fixed, req)
}

/// One trace per `δt` of the grid (run in parallel, kept in grid order) plus
/// both semiclassical overlays.
pub fn rabi_density_map<T: Real>(config: &ExperimentConfig<T>) -> Result<DensityMap<T>, RabiError> {
    let prep = prepare(config)?;
    let cells: Vec<Result<(RabiTrace<T>, (Option<OverlayPoint<T>>, Option<OverlayPoint<T>>)), RabiError>> = config
        .dt_grid
        .par_iter()
        .map(|&dt| {
            let plan = TrotterPlan::new(dt, config.ordering.clone())?;
            let trace = run_trace(&prep.state, &prep.spec, &plan, config.steps, config.stride)?;
            Ok((trace, overlay_at(config, &prep.spec, dt, prep.energy)))
        })
        .collect();
    let mut traces = Vec::new();
    let mut fixed_energy = Vec::new();
    let mut requantized = Vec::new();
    for c in cells {
        let (t, (f, r)) = c?;
        traces.push(t);
        fixed_energy.push(f);
        requantized.push(r);
    }
    Ok(DensityMap { traces, fixed_energy, requantized, energy: prep.energy, gap: prep.gap })
}

/// `T(δt) = T0 / sqrt(1 + (δE T0/2π)²)` with `δE = α J (J δt)²`.
pub fn detuned_period<T: Real>(t0: T, alpha: T, j: T, dt: T) -> T {
    let g = j * dt;
    let de = alpha * j * g * g;
    let x = de * t0 / T::two_pi();
    t0 / (T::one() + x * x).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetuningFit<T: Real> {
    /// Magnitude of the quadratic shift coefficient (its sign is not identifiable).
    pub alpha: T,
    /// RMS of `ln T_measured - ln T_model`.
    pub residual: T,
    /// Whether the input periods decrease monotonically with `δt`.
    pub monotone: bool,
}

/// Leading run of points (sorted by `δt`) over which the period keeps
/// decreasing. Past it the resonant peak has sunk into the noise floor.
pub fn monotone_prefix<T: Real>(points: &[(T, T)]) -> Vec<(T, T)> {
    let mut sorted: Vec<(T, T)> = points.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(T, T)> = Vec::new();
    for p in sorted {
        if let Some(last) = out.last() {
            if p.1 > last.1 {
                break;
            }
        }
        out.push(p);
    }
    out
}

/// Least-squares fit of the detuned-period law to `(δt, T)` points, done on
/// `ln T` so that long and short periods weigh alike.
pub fn detuning_fit<T: Real>(points: &[(T, T)], t0: T, j: T) -> Result<DetuningFit<T>, RabiError> {
    if points.len() < 5 {
        return Err(RabiError::TooFewPoints { need: 5, got: points.len() });
    }
    let mut sorted: Vec<(T, T)> = points.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let monotone = sorted.windows(2).all(|w| w[1].1 <= w[0].1);
    let mut est: Vec<T> = sorted
        .iter()
        .filter_map(|&(dt, t)| {
            let r = t0 / t;
            if r <= T::one() {
                return None;
            }
            let g = j * dt;
            Some(T::two_pi() / t0 * (r * r - T::one()).sqrt() / (j * g * g))
        })
        .collect();
    est.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let init = if est.is_empty() { T::zero() } else { est[est.len() / 2] };
    let sse = |a: T| {
        sorted.iter().fold(T::zero(), |s, &(dt, t)| {
            let r = t.ln() - detuned_period(t0, a, j, dt).ln();
            s + r * r
        })
    };
    let hi = (init * lit(4.0)).max(lit(1e-12));
    // coarse scan first so a poor initial guess cannot trap the search
    let n = 200;
    let mut best = T::zero();
    let mut bv = sse(T::zero());
    for k in 1..=n {
        let a = hi * from_usize::<T>(k) / from_usize(n);
        let v = sse(a);
        if v < bv {
            bv = v;
            best = a;
        }
    }
    let h = hi / from_usize(n);
    let (alpha, v) = golden_min(sse, (best - h).max(T::zero()), best + h, hi * lit(1e-12));
    let (alpha, v) = if v < bv { (alpha, v) } else { (best, bv) };
    Ok(DetuningFit { alpha, residual: (v / from_usize(sorted.len())).sqrt(), monotone })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VisibilityPoint<T: Real> {
    pub dt: T,
    pub measured: T,
    pub predicted: T,
    pub deviation: T,
}

/// `|n_ω,max| = n0 (T/T0)²` against the measured peaks `(δt, T, |n_ω|)`;
/// `n0` is fitted by least squares when not supplied.
pub fn visibility_curve<T: Real>(peaks: &[(T, T, T)], t0: T, n0: Option<T>) -> (T, Vec<VisibilityPoint<T>>) {
    let ratio = |t: T| (t / t0) * (t / t0);
    let n0 = n0.unwrap_or_else(|| {
        let (num, den) = peaks.iter().fold((T::zero(), T::zero()), |(a, b), &(_, t, m)| {
            let r = ratio(t);
            (a + m * r, b + r * r)
        });
        if den > T::zero() {
            num / den
        } else {
            T::zero()
        }
    });
    let pts = peaks
        .iter()
        .map(|&(dt, t, m)| {
            let p = n0 * ratio(t);
            VisibilityPoint { dt, measured: m, predicted: p, deviation: m - p }
        })
        .collect();
    (n0, pts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseReport<T: Real> {
    pub dt: T,
    pub phase_sigma: T,
    pub visibilities: Vec<T>,
    pub noiseless: T,
    pub mean: T,
    pub std: T,
    pub median: T,
    /// `Δ δt sqrt(n_cl)` with `Δ = 2π/T` from the noiseless run.
    pub threshold: T,
    pub n_cl: T,
    /// Spread of the left-localized doublet energy over the trials.
    pub energy_shift_std: T,
    /// First-order estimate `sqrt(δV² Σ ψ⁴)`.
    pub energy_shift_std_predicted: T,
}

fn mean_std<T: Real>(v: &[T]) -> (T, T) {
    let n = from_usize::<T>(v.len());
    let m = v.iter().fold(T::zero(), |s, &x| s + x) / n;
    let var = v.iter().fold(T::zero(), |s, &x| s + (x - m) * (x - m)) / n;
    (m, var.sqrt())
}

/// Static Gaussian phase errors `δφ_i` on every potential gate, i.e. a fixed
/// disorder `δV_i = δφ_i/δt` for each trial.
pub fn gate_noise_ensemble<T: Real>(config: &ExperimentConfig<T>, dt: T, phase_sigma: T, trials: usize) -> Result<NoiseReport<T>, RabiError> {
    if trials < 10 {
        return Err(RabiError::TooFewTrials(trials));
    }
    let prep = prepare(config)?;
    let plan = TrotterPlan::new(dt, config.ordering.clone())?;
    let clean = run_trace(&prep.state, &prep.spec, &plan, config.steps, config.stride)?;
    let clean_peak = clean.peak.ok_or(RabiError::Grid)?;
    let (i, j) = doublet_indices(config.doublet_index);
    let center = config.center();
    let base = doublet_from_pair(&prep.exact, i, j, center);
    let left_state = base.as_ref().map(|d| d.left_state.clone()).unwrap_or_else(|| prep.exact.state(i));
    let e_left0 = base.as_ref().map(|d| d.e_mean - d.epsilon / lit(2.0)).unwrap_or(prep.energy);
    let ipr = left_state.iter().fold(T::zero(), |s, z| {
        let q = z.modulus_squared();
        s + q * q
    });
    let sigma_v = phase_sigma / dt;
    let results: Vec<Result<(T, T), RabiError>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(trial as u64 + 1);
            let h: Vec<T> = if phase_sigma > T::zero() {
                let normal = Normal::new(0.0, to_f64(phase_sigma)).expect("finite sigma");
                prep.spec.potential().iter().map(|&v| v + lit::<T>(normal.sample(&mut rng)) / dt).collect()
            } else {
                prep.spec.potential().to_vec()
            };
            let spec = prep.spec.with_potential(h)?;
            let trace = run_trace(&prep.state, &spec, &plan, config.steps, config.stride)?;
            let vis = trace.peak.map(|p| p.magnitude).unwrap_or(T::zero());
            let r = diagonalize_chain(&spec);
            let e_left = doublet_from_pair(&r, i, j, center)
                .map(|d| d.e_mean - d.epsilon / lit(2.0))
                .unwrap_or((r.energies[i] + r.energies[j]) / lit(2.0));
            Ok((vis, e_left - e_left0))
        })
        .collect();
    let mut vis = Vec::with_capacity(trials);
    let mut shifts = Vec::with_capacity(trials);
    for r in results {
        let (v, s) = r?;
        vis.push(v);
        shifts.push(s);
    }
    let (mean, std) = mean_std(&vis);
    let mut sorted = vis.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if trials % 2 == 1 {
        sorted[trials / 2]
    } else {
        (sorted[trials / 2 - 1] + sorted[trials / 2]) / lit(2.0)
    };
    let shift_rms = (shifts.iter().fold(T::zero(), |s, &x| s + x * x) / from_usize(trials)).sqrt();
    let n_cl = T::one() / ipr;
    let splitting = T::two_pi() / clean_peak.period;
    Ok(NoiseReport {
        dt,
        phase_sigma,
        visibilities: vis,
        noiseless: clean_peak.magnitude,
        mean,
        std,
        median,
        threshold: splitting * dt * n_cl.sqrt(),
        n_cl,
        energy_shift_std: shift_rms,
        energy_shift_std_predicted: sigma_v * ipr.sqrt(),
    })
}
