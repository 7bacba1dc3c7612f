//! Discrete WKB on the chain: momenta, turning points, actions, quantization,
//! tunneling rates, the Trotter corrections and the large-step Hamiltonian.

use nalgebra::{Complex, ComplexField};
use thiserror::Error;

use crate::chain::{ChainSpec, SmoothPotential};
use crate::numeric::{bisect, derivative, illinois, integrate_turning};
use crate::scalar::{from_usize, lit, to_f64, Cplx, Real};

#[derive(Debug, Error, PartialEq)]
pub enum SemiclassicsError {
    #[error("large-step model needs 0 < J dt < 2 pi, got J dt = {0}")]
    StepOutOfDomain(f64),
    #[error("time step must be finite and non-negative")]
    BadStep,
    #[error("momentum is not real inside the claimed allowed interval [{0}, {1}]")]
    NotAllowed(f64, f64),
}

/// Kinetic term of the classical Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kinetic<T: Real> {
    /// `-J cos p`
    Bare,
    /// `-J cos p + J (J dt)^2/24 cos p sin^2 p`
    Corrected(T),
    /// `-(2/dt) arcsin(sin(J dt/2) cos p)`
    LargeStep(T),
}

#[derive(Clone, Debug)]
pub struct PhaseSpaceModel<T: Real> {
    kinetic: Kinetic<T>,
    potential: SmoothPotential<T>,
    j: T,
}

const SCAN_STEP: f64 = 0.05;
const X_TOL: f64 = 1e-10;
const E_TOL: f64 = 1e-10;
const QUAD_TOL: f64 = 1e-9;
const DE: f64 = 1e-4;

impl<T: Real> PhaseSpaceModel<T> {
    pub fn new(kinetic: Kinetic<T>, potential: SmoothPotential<T>, j: T) -> Result<Self, SemiclassicsError> {
        match kinetic {
            Kinetic::Bare => {}
            Kinetic::Corrected(dt) => {
                if !(dt >= T::zero()) || !dt.is_finite() {
                    return Err(SemiclassicsError::BadStep);
                }
            }
            Kinetic::LargeStep(dt) => {
                if !dt.is_finite() || dt <= T::zero() {
                    return Err(SemiclassicsError::BadStep);
                }
                let g = j * dt;
                if g >= T::two_pi() {
                    return Err(SemiclassicsError::StepOutOfDomain(to_f64(g)));
                }
            }
        }
        Ok(PhaseSpaceModel { kinetic, potential, j })
    }

    pub fn from_chain(spec: &ChainSpec<T>, kinetic: Kinetic<T>) -> Result<Self, SemiclassicsError> {
        Self::new(kinetic, spec.smooth_potential(), spec.hopping())
    }

    pub fn kinetic(&self) -> Kinetic<T> {
        self.kinetic
    }

    pub fn hopping(&self) -> T {
        self.j
    }

    pub fn potential(&self) -> &SmoothPotential<T> {
        &self.potential
    }

    pub fn with_kinetic(&self, kinetic: Kinetic<T>) -> Result<Self, SemiclassicsError> {
        Self::new(kinetic, self.potential.clone(), self.j)
    }

    pub fn h(&self, x: T) -> T {
        self.potential.value(x)
    }

    /// First and last site positions.
    pub fn domain(&self) -> (T, T) {
        (T::one(), from_usize(self.potential.sites()))
    }

    /// Kinetic energy for complex momentum.
    pub fn kinetic_energy(&self, p: Cplx<T>) -> Cplx<T> {
        let j = Complex::new(self.j, T::zero());
        match self.kinetic {
            Kinetic::Bare => -p.cos() * j,
            Kinetic::Corrected(dt) => {
                let g = correction_scale(self.j, dt) * self.j;
                let s = p.sin();
                -p.cos() * j + p.cos() * s * s * g
            }
            Kinetic::LargeStep(dt) => {
                let s = (self.j * dt / lit(2.0)).sin();
                (p.cos() * s).asin() * (-lit::<T>(2.0) / dt)
            }
        }
    }

    pub fn hamiltonian(&self, x: T, p: Cplx<T>) -> Cplx<T> {
        self.kinetic_energy(p) + Complex::new(self.h(x), T::zero())
    }

    /// Kinetic energy at `p = 0`, the lower band edge.
    pub fn band_floor(&self) -> T {
        self.kinetic_energy(Complex::new(T::zero(), T::zero())).re
    }

    /// `cos p` solving the equation of motion at `(E, x)`.
    pub fn cos_momentum(&self, e: T, x: T) -> T {
        let d = e - self.h(x);
        match self.kinetic {
            Kinetic::Bare => -d / self.j,
            Kinetic::Corrected(dt) => {
                // g c^3 + (J - g) c + d = 0 is monotone in c
                let g = correction_scale(self.j, dt) * self.j;
                let mut c = -d / self.j;
                for _ in 0..60 {
                    let f = g * c * c * c + (self.j - g) * c + d;
                    let fp = lit::<T>(3.0) * g * c * c + self.j - g;
                    let step = f / fp;
                    c -= step;
                    if step.abs() <= lit::<T>(1e-15) * (T::one() + c.abs()) {
                        break;
                    }
                }
                c
            }
            Kinetic::LargeStep(dt) => {
                let s = (self.j * dt / lit(2.0)).sin();
                -(d * dt / lit(2.0)).sin() / s
            }
        }
    }

    /// Complex momentum: real in allowed regions, `i|p|` beyond a standard
    /// turning point and `pi + i|p|` beyond an anomalous one.
    pub fn momentum(&self, e: T, x: T) -> Cplx<T> {
        momentum_from_cos(self.cos_momentum(e, x))
    }

    /// `|p|` in forbidden regions, zero where motion is allowed.
    pub fn imaginary_momentum(&self, e: T, x: T) -> T {
        let c = self.cos_momentum(e, x).abs();
        if c > T::one() {
            c.acosh()
        } else {
            T::zero()
        }
    }

    /// Classical velocity `dT/dp` for real momentum.
    pub fn velocity(&self, p: T) -> T {
        let (s, c) = p.sin_cos();
        match self.kinetic {
            Kinetic::Bare => self.j * s,
            Kinetic::Corrected(dt) => {
                let g = correction_scale(self.j, dt) * self.j;
                self.j * s + g * (lit::<T>(2.0) * s * c * c - s * s * s)
            }
            Kinetic::LargeStep(dt) => {
                let sg = (self.j * dt / lit(2.0)).sin();
                let q = (T::one() - sg * sg * c * c).max(T::zero()).sqrt();
                lit::<T>(2.0) / dt * sg * s / q
            }
        }
    }

    /// Residual of the defining equation for `p` at `(E, x)`.
    pub fn equation_residual(&self, e: T, x: T, p: Cplx<T>) -> T {
        match self.kinetic {
            Kinetic::LargeStep(dt) => {
                let s = (self.j * dt / lit(2.0)).sin();
                let d = (e - self.h(x)) * dt / lit(2.0);
                (p.cos() * s + Complex::new(d.sin(), T::zero())).modulus()
            }
            _ => (self.hamiltonian(x, p) - Complex::new(e, T::zero())).modulus(),
        }
    }

    fn allowed_at(&self, e: T, x: T) -> bool {
        self.cos_momentum(e, x).abs() <= T::one()
    }
}

/// `(J dt)^2 / 24`
pub fn correction_scale<T: Real>(j: T, dt: T) -> T {
    let g = j * dt;
    g * g / lit(24.0)
}

fn momentum_from_cos<T: Real>(c: T) -> Cplx<T> {
    if c > T::one() {
        Complex::new(T::zero(), c.acosh())
    } else if c < -T::one() {
        Complex::new(T::pi(), (-c).acosh())
    } else {
        Complex::new(c.acos(), T::zero())
    }
}

/// `J (J dt)^2/24 cos p sin^2 p`
pub fn correction_dh<T: Real>(p: T, j: T, dt: T) -> T {
    let (s, c) = p.sin_cos();
    j * correction_scale(j, dt) * c * s * s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TurningKind {
    /// `p = 0`
    Standard,
    /// `p = ±pi`
    Anomalous,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TurningPoint<T: Real> {
    pub x: T,
    pub kind: TurningKind,
    /// Fractional part of `x` relative to the site grid.
    pub delta: T,
}

/// Turning points over the whole chain.
pub fn turning_points<T: Real>(model: &PhaseSpaceModel<T>, e: T) -> Vec<TurningPoint<T>> {
    let (a, b) = model.domain();
    turning_points_in(model, e, a, b)
}

/// Roots of `cos p = ±1` on `[a, b]`, sorted by position.
pub fn turning_points_in<T: Real>(model: &PhaseSpaceModel<T>, e: T, a: T, b: T) -> Vec<TurningPoint<T>> {
    let mut out = Vec::new();
    if b <= a {
        return out;
    }
    let n = (to_f64(b - a) / SCAN_STEP).ceil().max(1.0) as usize;
    let step = (b - a) / from_usize(n);
    let f_std = |x: T| model.cos_momentum(e, x) - T::one();
    let f_anom = |x: T| model.cos_momentum(e, x) + T::one();
    let mut x0 = a;
    let mut c0 = model.cos_momentum(e, x0);
    for k in 1..=n {
        let x1 = if k == n { b } else { a + step * from_usize(k) };
        let c1 = model.cos_momentum(e, x1);
        for (kind, f, v0, v1) in [
            (TurningKind::Standard, &f_std as &dyn Fn(T) -> T, c0 - T::one(), c1 - T::one()),
            (TurningKind::Anomalous, &f_anom as &dyn Fn(T) -> T, c0 + T::one(), c1 + T::one()),
        ] {
            // a root sitting exactly on a grid point is counted once, from its left interval
            let crosses = (v0 < T::zero() && v1 >= T::zero()) || (v0 > T::zero() && v1 <= T::zero());
            if crosses {
                if let Some(x) = bisect(f, x0, x1, lit(X_TOL)) {
                    out.push(TurningPoint { x, kind, delta: x - x.floor() });
                }
            }
        }
        x0 = x1;
        c0 = c1;
    }
    out.sort_by(|p, q| p.x.partial_cmp(&q.x).unwrap());
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    Standard,
    Anomalous,
    /// Hard wall, vanishing wave function one site beyond the chain end.
    Wall,
}

/// End of a classically allowed interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge<T: Real> {
    pub x: T,
    pub kind: EdgeKind,
}

impl<T: Real> Edge<T> {
    fn from_turning(tp: &TurningPoint<T>) -> Self {
        let kind = match tp.kind {
            TurningKind::Standard => EdgeKind::Standard,
            TurningKind::Anomalous => EdgeKind::Anomalous,
        };
        Edge { x: tp.x, kind }
    }

    fn singular(&self) -> bool {
        self.kind != EdgeKind::Wall
    }

    /// Phase lost at this edge when it bounds the interval from the left.
    fn phase_left(&self) -> T {
        let q = T::frac_pi_4();
        match self.kind {
            EdgeKind::Standard => q,
            EdgeKind::Wall => T::frac_pi_2(),
            // pi/4 - theta with theta = -pi/2 + pi x
            EdgeKind::Anomalous => q + T::frac_pi_2() - T::pi() * self.x,
        }
    }

    fn phase_right(&self) -> T {
        let q = T::frac_pi_4();
        match self.kind {
            EdgeKind::Standard => q,
            EdgeKind::Wall => T::frac_pi_2(),
            EdgeKind::Anomalous => q - T::frac_pi_2() + T::pi() * self.x,
        }
    }
}

/// Which ends of a well may be hard walls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    TwoTurningPoints,
    HardWallLeft,
    HardWallRight,
}

impl Boundary {
    fn wall_left(self) -> bool {
        self == Boundary::HardWallLeft
    }

    fn wall_right(self) -> bool {
        self == Boundary::HardWallRight
    }
}

/// A potential well: its bottom, the search window and optionally the
/// position of the neighbouring well across the barrier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Well<T: Real> {
    pub center: T,
    pub lo: T,
    pub hi: T,
    pub partner: Option<T>,
    pub ceiling: Option<T>,
}

impl<T: Real> Well<T> {
    pub fn new(center: T, lo: T, hi: T) -> Self {
        Well { center, lo, hi, partner: None, ceiling: None }
    }

    /// Well whose centre is the potential minimum on `[lo, hi]`.
    pub fn around_minimum(model: &PhaseSpaceModel<T>, lo: T, hi: T) -> Self {
        let (d0, d1) = model.domain();
        let (x, _) = model.potential().argmin(lo.max(d0), hi.min(d1));
        Self::new(x, lo, hi)
    }

    pub fn with_partner(mut self, x: T) -> Self {
        self.partner = Some(x);
        self
    }

    pub fn with_ceiling(mut self, e: T) -> Self {
        self.ceiling = Some(e);
        self
    }
}

/// First turning point met walking from `from` to `to`.
fn first_turning<T: Real>(model: &PhaseSpaceModel<T>, e: T, from: T, to: T) -> Option<TurningPoint<T>> {
    let span = to - from;
    if span == T::zero() {
        return None;
    }
    let n = (to_f64(span.abs()) / SCAN_STEP).ceil().max(1.0) as usize;
    let step = span / from_usize(n);
    let mut x0 = from;
    let mut c0 = model.cos_momentum(e, x0);
    for k in 1..=n {
        let x1 = if k == n { to } else { from + step * from_usize(k) };
        let c1 = model.cos_momentum(e, x1);
        for (kind, target) in [(TurningKind::Standard, T::one()), (TurningKind::Anomalous, -T::one())] {
            let (v0, v1) = (c0 - target, c1 - target);
            if (v0 < T::zero()) != (v1 < T::zero()) || v1 == T::zero() {
                let f = |x: T| model.cos_momentum(e, x) - target;
                if let Some(x) = bisect(f, x0.min(x1), x0.max(x1), lit(X_TOL)) {
                    return Some(TurningPoint { x, kind, delta: x - x.floor() });
                }
            }
        }
        x0 = x1;
        c0 = c1;
    }
    None
}

/// Allowed interval around the well centre at energy `E`.
pub fn allowed_interval<T: Real>(model: &PhaseSpaceModel<T>, e: T, well: &Well<T>, boundary: Boundary) -> Option<(Edge<T>, Edge<T>)> {
    if !model.allowed_at(e, well.center) {
        return None;
    }
    let left = match first_turning(model, e, well.center, well.lo) {
        Some(t) => Edge::from_turning(&t),
        None if boundary.wall_left() => Edge { x: well.lo, kind: EdgeKind::Wall },
        None => return None,
    };
    let right = match first_turning(model, e, well.center, well.hi) {
        Some(t) => Edge::from_turning(&t),
        None if boundary.wall_right() => Edge { x: well.hi, kind: EdgeKind::Wall },
        None => return None,
    };
    Some((left, right))
}

fn real_momentum<T: Real>(model: &PhaseSpaceModel<T>, e: T, x: T) -> T {
    model.cos_momentum(e, x).max(-T::one()).min(T::one()).acos()
}

fn action_between<T: Real>(model: &PhaseSpaceModel<T>, e: T, l: &Edge<T>, r: &Edge<T>) -> T {
    let f = |x: T| real_momentum(model, e, x);
    integrate_turning(&f, l.x, r.x, l.singular(), r.singular(), T::one(), lit(QUAD_TOL))
}

/// `S12 = ∫ p dx` on `[x1, x2]` and the period `T12 = 2 dS12/dE`.
///
/// Ends that are turning points at `E` are tracked when differentiating.
pub fn action_allowed<T: Real>(model: &PhaseSpaceModel<T>, e: T, x1: T, x2: T) -> Result<(T, T), SemiclassicsError> {
    let slack = lit::<T>(1e-7);
    for k in 0..=32 {
        let x = x1 + (x2 - x1) * from_usize::<T>(k) / lit(32.0);
        if model.cos_momentum(e, x).abs() > T::one() + slack {
            return Err(SemiclassicsError::NotAllowed(to_f64(x1), to_f64(x2)));
        }
    }
    let tp_ends = |e: T| {
        let c1 = model.cos_momentum(e, x1).abs();
        let c2 = model.cos_momentum(e, x2).abs();
        ((c1 - T::one()).abs() < lit(1e-6), (c2 - T::one()).abs() < lit(1e-6))
    };
    let (s1, s2) = tp_ends(e);
    let f = |x: T| real_momentum(model, e, x);
    let s = integrate_turning(&f, x1, x2, s1, s2, T::one(), lit(QUAD_TOL));
    // turning-point ends move with the energy; walls and interior ends stay put
    let mid = (x1 + x2) / lit(2.0);
    let follow = |ee: T, x: T, on: bool| {
        if !on {
            return x;
        }
        let reach = x + (x - mid).signum() * lit(1.0);
        first_turning(model, ee, mid, reach).map(|t| t.x).unwrap_or(x)
    };
    let s_of = |ee: T| {
        let g = |x: T| real_momentum(model, ee, x);
        integrate_turning(&g, follow(ee, x1, s1), follow(ee, x2, s2), s1, s2, T::one(), lit(QUAD_TOL))
    };
    let t = lit::<T>(2.0) * derivative(s_of, e, lit::<T>(DE) * model.hopping());
    Ok((s, t))
}

/// Half period as a quadrature, `∫ dx / v`.
fn half_period<T: Real>(model: &PhaseSpaceModel<T>, e: T, l: &Edge<T>, r: &Edge<T>) -> T {
    let f = |x: T| {
        let v = model.velocity(real_momentum(model, e, x)).abs();
        T::one() / v.max(T::default_epsilon())
    };
    integrate_turning(&f, l.x, r.x, l.singular(), r.singular(), T::one(), lit(QUAD_TOL))
}

/// Under-barrier action between a well edge and the next turning point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierAction<T: Real> {
    pub s_b: T,
    pub x_left: T,
    pub x_right: T,
    /// Another allowed region sits between the well and its partner; the
    /// action only covers the first forbidden stretch.
    pub interior_allowed: bool,
}

/// `S_B = ∫ |p| dx` from `from` towards `toward` over the forbidden stretch.
///
/// `None` when no turning point lies in between (energy above the barrier).
pub fn barrier_action<T: Real>(model: &PhaseSpaceModel<T>, e: T, from: T, toward: T) -> Option<BarrierAction<T>> {
    let (a, b, rightward) = if toward > from { (from, toward, true) } else { (toward, from, false) };
    let eps = lit::<T>(1e-7);
    let tps = turning_points_in(model, e, a + eps, b - eps);
    if tps.is_empty() {
        return None;
    }
    let far = if rightward { tps[0].x } else { tps[tps.len() - 1].x };
    let (xl, xr) = if rightward { (from, far) } else { (far, from) };
    let mid = (xl + xr) / lit(2.0);
    if model.allowed_at(e, mid) {
        return None;
    }
    let f = |x: T| model.imaginary_momentum(e, x);
    let s_b = integrate_turning(&f, xl, xr, true, true, T::one(), lit(QUAD_TOL));
    Some(BarrierAction { s_b, x_left: xl, x_right: xr, interior_allowed: tps.len() > 1 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelShifts<T: Real> {
    pub ds12: T,
    pub de: T,
    pub ds_b: Option<T>,
    pub dsb_de: Option<T>,
    /// Shift of the resonant pair; equals `de` for a single well.
    pub de_n: T,
    pub eta_ratio: Option<T>,
    pub gamma_ratio: Option<T>,
    pub perturbative_regime_exceeded: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelPrediction<T: Real> {
    /// Zero-based between two turning points, one-based when a wall is involved.
    pub n: i64,
    pub energy: T,
    pub spacing: T,
    pub s12: T,
    pub t12: T,
    pub s_b: Option<T>,
    pub eta: Option<T>,
    pub gamma: Option<T>,
    pub left: Edge<T>,
    pub right: Edge<T>,
    pub n_cl: usize,
    pub n_barr: Option<usize>,
    pub barrier: Option<BarrierAction<T>>,
    pub well: Well<T>,
    pub boundary: Boundary,
    pub shifts: Option<LevelShifts<T>>,
}

fn quantum_phase<T: Real>(model: &PhaseSpaceModel<T>, e: T, well: &Well<T>, boundary: Boundary) -> Option<T> {
    let (l, r) = allowed_interval(model, e, well, boundary)?;
    let s = action_between(model, e, &l, &r);
    Some((s - l.phase_left() - r.phase_right()) / T::pi())
}

fn facing_edge<T: Real>(well: &Well<T>, l: &Edge<T>, r: &Edge<T>) -> Option<(T, T)> {
    let p = well.partner?;
    Some(if p > well.center { (r.x, p) } else { (l.x, p) })
}

/// Semiclassical data for the well at a given energy; `n` is left as supplied.
pub fn predict_level<T: Real>(model: &PhaseSpaceModel<T>, well: &Well<T>, boundary: Boundary, e: T, n: i64) -> Option<LevelPrediction<T>> {
    let (l, r) = allowed_interval(model, e, well, boundary)?;
    let s12 = action_between(model, e, &l, &r);
    // includes the position-dependent phase of anomalous edges
    let s_of = |ee: T| {
        allowed_interval(model, ee, well, boundary)
            .map(|(a, b)| action_between(model, ee, &a, &b) - a.phase_left() - b.phase_right())
            .unwrap_or(T::zero())
    };
    let t12 = lit::<T>(2.0) * derivative(s_of, e, lit::<T>(DE) * model.hopping());
    let spacing = T::two_pi() / t12;
    let barrier = facing_edge(well, &l, &r).and_then(|(from, to)| barrier_action(model, e, from, to));
    let s_b = barrier.map(|b| b.s_b);
    let two_pi = T::two_pi();
    Some(LevelPrediction {
        n,
        energy: e,
        spacing,
        s12,
        t12,
        s_b,
        eta: s_b.map(|s| spacing / two_pi * (-s).exp()),
        gamma: s_b.map(|s| spacing / two_pi * (-lit::<T>(2.0) * s).exp()),
        left: l,
        right: r,
        n_cl: to_f64(r.x - l.x).round() as usize,
        n_barr: barrier.map(|b| to_f64(b.x_right - b.x_left).round() as usize),
        barrier,
        well: *well,
        boundary,
        shifts: None,
    })
}

fn default_ceiling<T: Real>(model: &PhaseSpaceModel<T>, well: &Well<T>, boundary: Boundary) -> T {
    let floor = model.band_floor();
    let (d0, d1) = model.domain();
    let big = T::max_value().unwrap();
    let left = if boundary.wall_left() || well.center <= well.lo.max(d0) {
        big
    } else {
        model.potential().argmax(well.lo.max(d0), well.center).1 + floor
    };
    let right = if boundary.wall_right() || well.center >= well.hi.min(d1) {
        big
    } else {
        model.potential().argmax(well.center, well.hi.min(d1)).1 + floor
    };
    let top = model.potential().argmax(d0, d1).1 - floor;
    left.min(right).min(top)
}

/// All quantized levels of a well, bracketed on an adaptive energy grid of
/// about a tenth of the local spacing and refined by bisection.
pub fn bohr_levels<T: Real>(model: &PhaseSpaceModel<T>, well: &Well<T>, boundary: Boundary) -> Vec<LevelPrediction<T>> {
    let e_lo = model.h(well.center) + model.band_floor();
    let e_hi = well.ceiling.unwrap_or_else(|| default_ceiling(model, well, boundary));
    if e_hi <= e_lo {
        return Vec::new();
    }
    let range = e_hi - e_lo;
    let tiny = range * lit(1e-9);
    let min_step = range * lit(1e-7);
    let max_step = range / lit(50.0);
    let q = |e: T| quantum_phase(model, e, well, boundary);
    let mut found: Vec<(i64, T)> = Vec::new();
    let mut e0 = e_lo + tiny;
    let mut q0 = q(e0);
    let mut step = range / lit(400.0);
    while e0 < e_hi - tiny {
        let e1 = (e0 + step).min(e_hi - tiny);
        let q1 = q(e1);
        if let (Some(a), Some(b)) = (q0, q1) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let mut k = lo.ceil();
            while k <= hi {
                if k > lo || a == k {
                    let kk = k;
                    let g = |e: T| q(e).map(|v| v - kk).unwrap_or(T::zero());
                    if let Some(root) = illinois(g, e0, e1, lit(E_TOL)) {
                        let n = k.to_i64().unwrap_or(0);
                        if !found.iter().any(|&(m, _)| m == n) {
                            found.push((n, root));
                        }
                    }
                }
                k += T::one();
            }
            let dq = (b - a).abs();
            if dq > T::zero() {
                step = (lit::<T>(0.1) * (e1 - e0) / dq).max(min_step).min(max_step);
            }
        }
        e0 = e1;
        q0 = q1;
    }
    found.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    found
        .into_iter()
        .filter_map(|(k, e)| {
            let mut lv = predict_level(model, well, boundary, e, k)?;
            if lv.left.kind == EdgeKind::Wall || lv.right.kind == EdgeKind::Wall {
                lv.n = k + 1;
            }
            Some(lv)
        })
        .collect()
}

/// `(eta, Gamma_left, Gamma_right)` for a resonant pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TunnelRates<T: Real> {
    pub eta: T,
    pub gamma_left: T,
    pub gamma_right: T,
    pub s_b: T,
}

/// `eta = sqrt(Δ_L Δ_R)/2π e^{-S_B(Ē)}`, `Γ = Δ/2π e^{-2 S_B(E)}`.
pub fn tunneling_rates<T: Real>(model: &PhaseSpaceModel<T>, left: &LevelPrediction<T>, right: &LevelPrediction<T>) -> Option<TunnelRates<T>> {
    let e_mean = (left.energy + right.energy) / lit(2.0);
    let (l, r) = allowed_interval(model, e_mean, &left.well, left.boundary)?;
    let (from, _) = facing_edge(&left.well, &l, &r)?;
    let toward = right.well.center;
    let s_b = barrier_action(model, e_mean, from, toward)?.s_b;
    let two_pi = T::two_pi();
    let eta = (left.spacing * right.spacing).sqrt() / two_pi * (-s_b).exp();
    let g = |lv: &LevelPrediction<T>| lv.s_b.map(|s| lv.spacing / two_pi * (-lit::<T>(2.0) * s).exp()).unwrap_or(T::zero());
    Some(TunnelRates { eta, gamma_left: g(left), gamma_right: g(right), s_b })
}

fn bare_of<T: Real>(model: &PhaseSpaceModel<T>) -> PhaseSpaceModel<T> {
    PhaseSpaceModel { kinetic: Kinetic::Bare, potential: model.potential.clone(), j: model.j }
}

fn barrier_correction<T: Real>(model: &PhaseSpaceModel<T>, e: T, b: &BarrierAction<T>, scale: T) -> T {
    let f = |x: T| {
        let q = model.imaginary_momentum(e, x);
        (lit::<T>(2.0) * q).sinh() / lit(2.0)
    };
    -scale * integrate_turning(&f, b.x_left, b.x_right, true, true, T::one(), lit(QUAD_TOL))
}

fn barrier_slope<T: Real>(model: &PhaseSpaceModel<T>, level: &LevelPrediction<T>, e: T) -> Option<T> {
    let s_of = |ee: T| {
        allowed_interval(model, ee, &level.well, level.boundary)
            .and_then(|(l, r)| facing_edge(&level.well, &l, &r))
            .and_then(|(from, to)| barrier_action(model, ee, from, to))
            .map(|b| b.s_b)
            .unwrap_or(T::zero())
    };
    level.well.partner?;
    Some(derivative(s_of, e, lit::<T>(DE) * model.hopping()))
}

fn regime_exceeded<T: Real>(model: &PhaseSpaceModel<T>, level: &LevelPrediction<T>, dt: T) -> bool {
    let (d0, d1) = model.domain();
    let bottom = model.h(level.well.center);
    let top = model.potential().argmax(d0, d1).1;
    let p = (top - bottom) / lit(2.0);
    let g = model.hopping() * dt;
    g * g * p / model.hopping() > T::one()
}

/// First-order Trotter corrections for a single level, computed on the bare
/// trajectory.
pub fn perturbation_shifts<T: Real>(model: &PhaseSpaceModel<T>, level: &LevelPrediction<T>, dt: T) -> LevelShifts<T> {
    let bare = bare_of(model);
    let scale = correction_scale(model.hopping(), dt);
    let e = level.energy;
    // δH/v = scale · cos p sin p on real momenta
    let f = |x: T| {
        let p = real_momentum(&bare, e, x);
        let (s, c) = p.sin_cos();
        c * s
    };
    let ds12 = -scale * integrate_turning(&f, level.left.x, level.right.x, level.left.singular(), level.right.singular(), T::one(), lit(QUAD_TOL));
    let de = -lit::<T>(2.0) * ds12 / level.t12;
    let ds_b = level.barrier.as_ref().map(|b| barrier_correction(&bare, e, b, scale));
    let dsb_de = barrier_slope(&bare, level, e);
    let eta_ratio = match (ds_b, dsb_de) {
        (Some(a), Some(b)) => Some((-(a + b * de)).exp()),
        _ => None,
    };
    LevelShifts {
        ds12,
        de,
        ds_b,
        dsb_de,
        de_n: de,
        eta_ratio,
        gamma_ratio: eta_ratio.map(|r| r * r),
        perturbative_regime_exceeded: regime_exceeded(model, level, dt),
    }
}

/// Corrections for a resonant pair: each well's shift plus the pair's common
/// shift `δE_N = -δS_L/T_L - δS_R/T_R` and the resulting `eta_eff/eta`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairShifts<T: Real> {
    pub left: LevelShifts<T>,
    pub right: LevelShifts<T>,
    pub de_n: T,
    pub ds_b: T,
    pub eta_ratio: T,
}

pub fn pair_shifts<T: Real>(model: &PhaseSpaceModel<T>, left: &LevelPrediction<T>, right: &LevelPrediction<T>, dt: T) -> Option<PairShifts<T>> {
    let mut ls = perturbation_shifts(model, left, dt);
    let mut rs = perturbation_shifts(model, right, dt);
    let de_n = -ls.ds12 / left.t12 - rs.ds12 / right.t12;
    let bare = bare_of(model);
    let e_mean = (left.energy + right.energy) / lit(2.0);
    let (l, r) = allowed_interval(&bare, e_mean, &left.well, left.boundary)?;
    let (from, _) = facing_edge(&left.well, &l, &r)?;
    let b = barrier_action(&bare, e_mean, from, right.well.center)?;
    let ds_b = barrier_correction(&bare, e_mean, &b, correction_scale(model.hopping(), dt));
    let slope = barrier_slope(&bare, left, e_mean)?;
    let eta_ratio = (-(ds_b + slope * de_n)).exp();
    ls.de_n = de_n;
    rs.de_n = de_n;
    Some(PairShifts { left: ls, right: rs, de_n, ds_b, eta_ratio })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetuningReport<T: Real> {
    pub epsilon: T,
    /// `(J dt*)^2 = eta n_cl / Δ`
    pub threshold_dt: T,
    pub criterion_ok: bool,
}

/// Detuning of the resonant pair after the Trotter shifts.
///
/// `ε = E_right - E_left`, so each well contributes its own `δE = -2δS/T`.
pub fn detuning_effective<T: Real>(
    eps0: T,
    left: &LevelPrediction<T>,
    left_shift: &LevelShifts<T>,
    right: &LevelPrediction<T>,
    right_shift: &LevelShifts<T>,
    eta: T,
    j: T,
    dt: T,
) -> DetuningReport<T> {
    let epsilon = eps0 + right_shift.de - left_shift.de;
    let n_cl = from_usize::<T>(left.n_cl + right.n_cl) / lit(2.0);
    let spacing = (left.spacing * right.spacing).sqrt();
    let threshold_dt = (eta * n_cl / spacing).sqrt() / j;
    DetuningReport { epsilon, threshold_dt, criterion_ok: dt <= threshold_dt }
}

/// Upper estimates of the level shift `|δE|`: `(Jδt)²/24 · 4 S12/T12` and
/// the looser `(Jδt)²/24 · 2 n_cl Δ/π`.
pub fn shift_bound<T: Real>(level: &LevelPrediction<T>, j: T, dt: T) -> (T, T) {
    let c = correction_scale(j, dt);
    let action = c * lit::<T>(4.0) * level.s12.abs() / level.t12;
    let sites = c * lit::<T>(2.0) * from_usize::<T>(level.n_cl) * level.spacing / T::pi();
    (action, sites)
}

/// `(δT1/T, δT2/T)`: deformation of the trajectory and the energy shift.
pub fn period_change<T: Real>(model: &PhaseSpaceModel<T>, level: &LevelPrediction<T>, dt: T) -> (T, T) {
    let bare = bare_of(model);
    let scale = correction_scale(model.hopping(), dt);
    let e = level.energy;
    let (l, r) = (level.left, level.right);
    let j = model.hopping();
    let num = |x: T| {
        let p = real_momentum(&bare, e, x);
        (lit::<T>(2.0) * p).cos() / (j * p.sin()).max(T::default_epsilon())
    };
    let tq = half_period(&bare, e, &l, &r);
    let d1 = -scale * integrate_turning(&num, l.x, r.x, l.singular(), r.singular(), T::one(), lit(QUAD_TOL)) / tq;
    let shift = perturbation_shifts(model, level, dt).de;
    let t_of = |ee: T| {
        allowed_interval(&bare, ee, &level.well, level.boundary)
            .map(|(a, b)| lit::<T>(2.0) * half_period(&bare, ee, &a, &b))
            .unwrap_or(T::zero())
    };
    let t = lit::<T>(2.0) * tq;
    let dtde = derivative(t_of, e, lit::<T>(DE) * j);
    (d1, dtde * shift / t)
}

/// Full classical period `2∫dx/v` of a level by direct quadrature.
pub fn period_quadrature<T: Real>(model: &PhaseSpaceModel<T>, level: &LevelPrediction<T>) -> T {
    lit::<T>(2.0) * half_period(model, level.energy, &level.left, &level.right)
}

/// Large-step kinetic data at real momentum `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LargeStepKinetic<T: Real> {
    pub t: T,
    pub theta: T,
    pub v: T,
    /// Positive imaginary part of the singular momentum `±i p_c`.
    pub p_c: T,
}

fn large_step_t<T: Real>(p: T, j: T, dt: T) -> T {
    let s = (j * dt / lit(2.0)).sin();
    -lit::<T>(2.0) / dt * (s * p.cos()).asin()
}

fn large_step_theta<T: Real>(p: T, j: T, dt: T) -> T {
    let s = (j * dt / lit(2.0)).sin();
    let q = (j * dt / lit(4.0)).sin();
    let c = p.cos();
    let den = (T::one() - c * c * s * s).max(T::zero()).sqrt();
    let sin2 = q * q * (lit::<T>(2.0) * p).sin() / den;
    let cos2 = (T::one() - lit::<T>(2.0) * c * c * q * q) / den;
    let mut two = sin2.atan2(cos2);
    if two < T::zero() {
        two += T::two_pi();
    }
    two / lit(2.0)
}

pub fn large_step_kinetic<T: Real>(p: T, j: T, dt: T) -> LargeStepKinetic<T> {
    let h = lit::<T>(1e-5);
    let t = large_step_t(p, j, dt);
    let theta = large_step_theta(p, j, dt);
    let dtdp = derivative(|q| large_step_t(q, j, dt), p, h);
    let c4 = |q: T| (lit::<T>(4.0) * large_step_theta(q, j, dt)).cos();
    let dc4 = derivative(c4, p, h);
    let v = dtdp * c4(p) + t * dc4 / lit(2.0);
    let s = (j * dt / lit(2.0)).sin().abs();
    LargeStepKinetic { t, theta, v, p_c: (T::one() / s).acosh() }
}

/// One connected allowed stretch of a phase-space contour.
#[derive(Clone, Debug, PartialEq)]
pub struct PortraitRegion<T: Real> {
    pub x_start: T,
    pub x_end: T,
    /// `2 ∫ arccos(cos p) dx`, the area of the band `|p| <= p(x)`.
    pub area: T,
    /// `(x, p)` on the upper branch; the lower branch is `(x, -p)`.
    pub points: Vec<(T, T)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PortraitCurve<T: Real> {
    pub energy: T,
    pub regions: Vec<PortraitRegion<T>>,
}

/// Real-momentum contours `H(x, p) = E` over the chain.
pub fn phase_portrait<T: Real>(model: &PhaseSpaceModel<T>, energies: &[T], samples: usize) -> Vec<PortraitCurve<T>> {
    let (d0, d1) = model.domain();
    let samples = samples.max(16);
    energies
        .iter()
        .map(|&e| {
            let tps = turning_points_in(model, e, d0, d1);
            let mut cuts: Vec<(T, bool)> = vec![(d0, false)];
            cuts.extend(tps.iter().map(|t| (t.x, true)));
            cuts.push((d1, false));
            let mut regions = Vec::new();
            for w in cuts.windows(2) {
                let ((a, sa), (b, sb)) = (w[0], w[1]);
                if b - a <= T::default_epsilon() || !model.allowed_at(e, (a + b) / lit(2.0)) {
                    continue;
                }
                let f = |x: T| real_momentum(model, e, x);
                let area = lit::<T>(2.0) * integrate_turning(&f, a, b, sa, sb, T::one(), lit(QUAD_TOL));
                let n = ((to_f64(b - a) / to_f64(d1 - d0)) * samples as f64).ceil().max(2.0) as usize;
                let points = (0..=n)
                    .map(|k| {
                        let x = a + (b - a) * from_usize::<T>(k) / from_usize(n);
                        (x, f(x))
                    })
                    .collect();
                regions.push(PortraitRegion { x_start: a, x_end: b, area, points });
            }
            PortraitCurve { energy: e, regions }
        })
        .collect()
}

/// Semiclassical Rabi period of a symmetric hard-wall double well.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RabiPrediction<T: Real> {
    pub energy: T,
    pub t_cl: T,
    pub s_b: T,
    /// `pi T_cl e^{S_b}`, the occupancy period for splitting `2 eta`.
    pub period_pi: T,
    /// `2 pi T_cl e^{S_b}`
    pub period_two_pi: T,
}

pub fn rabi_period<T: Real>(model: &PhaseSpaceModel<T>, well: &Well<T>, boundary: Boundary, e: T) -> Option<RabiPrediction<T>> {
    let lv = predict_level(model, well, boundary, e, 0)?;
    let s_b = lv.s_b?;
    let base = lv.t12 * s_b.exp();
    Some(RabiPrediction { energy: e, t_cl: lv.t12, s_b, period_pi: T::pi() * base, period_two_pi: T::two_pi() * base })
}

/// Rabi period at the energy of quantized level `n` of the given model.
pub fn rabi_period_requantized<T: Real>(model: &PhaseSpaceModel<T>, well: &Well<T>, boundary: Boundary, n: i64) -> Option<RabiPrediction<T>> {
    let lv = bohr_levels(model, well, boundary).into_iter().find(|l| l.n == n)?;
    rabi_period(model, well, boundary, lv.energy)
}
