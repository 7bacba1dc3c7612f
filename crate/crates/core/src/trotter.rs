//! Second-order product formulas for the chain Hamiltonian.
//!
//! The Hamiltonian is split into `K_even` (bonds starting at even sites),
//! `K_odd` (bonds starting at odd sites) and the diagonal `P`. An ordering is
//! a list `A_1..A_n` of generators; one step is the palindrome
//! `e^{-iA_n δt/2} ⋯ e^{-iA_2 δt/2} e^{-iA_1 δt} e^{-iA_2 δt/2} ⋯ e^{-iA_n δt/2}`,
//! so `A_1` sits in the middle and `A_n` on the outside.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Schur};
use thiserror::Error;

use crate::chain::ChainSpec;
use crate::operator::{commutator, DenseOperator, OperatorTag};
use crate::scalar::{cis_neg, from_usize, lit, Cplx, Real};

#[derive(Debug, Error, PartialEq)]
pub enum TrotterError {
    #[error("time step must be positive and finite")]
    BadStep,
    #[error("split weight must lie in [0, 1]")]
    BadSplit,
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("state has {got} components, chain has {expected} sites")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator list is empty")]
    Empty,
    #[error("Schur decomposition did not converge")]
    NoConvergence,
}

/// Which bonds a generator carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bonds {
    None,
    /// Bonds `(2,3), (4,5), ...`
    Even,
    /// Bonds `(1,2), (3,4), ...`
    Odd,
}

/// `A = bonds + weight·P`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Generator<T: Real> {
    pub bonds: Bonds,
    pub weight: T,
}

impl<T: Real> Generator<T> {
    pub fn kinetic(bonds: Bonds) -> Self {
        Generator { bonds, weight: T::zero() }
    }

    pub fn potential() -> Self {
        Generator { bonds: Bonds::None, weight: T::one() }
    }

    pub fn dense(&self, spec: &ChainSpec<T>) -> DenseOperator<T> {
        let l = spec.len();
        let mut m = DMatrix::<Cplx<T>>::zeros(l, l);
        for (n, &h) in spec.potential().iter().enumerate() {
            m[(n, n)] = Complex::new(self.weight * h, T::zero());
        }
        let t = Complex::new(-spec.hopping() * lit(0.5), T::zero());
        for (a, b) in bond_pairs(self.bonds, l) {
            m[(a, b)] = t;
            m[(b, a)] = t;
        }
        DenseOperator::new(m, OperatorTag::Hermitian)
    }
}

/// 0-based site pairs `(k, k+1)` of a bond set.
fn bond_pairs(bonds: Bonds, l: usize) -> Vec<(usize, usize)> {
    let start = match bonds {
        Bonds::None => return Vec::new(),
        Bonds::Odd => 0,
        Bonds::Even => 1,
    };
    (start..l.saturating_sub(1)).step_by(2).map(|k| (k, k + 1)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Ordering<T: Real> {
    /// `(K_even, K_odd, P)`: `K_even` in the middle, `P` outermost.
    KEvenKOddP,
    /// `(K_even, P, K_odd)`: the potential sits between the two kinetic layers.
    KEvenPKOdd,
    /// `(K_even + αP, K_odd + (1-α)P)`.
    Split(T),
}

impl<T: Real> Ordering<T> {
    pub fn generators(&self) -> Vec<Generator<T>> {
        match self {
            Ordering::KEvenKOddP => vec![
                Generator::kinetic(Bonds::Even),
                Generator::kinetic(Bonds::Odd),
                Generator::potential(),
            ],
            Ordering::KEvenPKOdd => vec![
                Generator::kinetic(Bonds::Even),
                Generator::potential(),
                Generator::kinetic(Bonds::Odd),
            ],
            Ordering::Split(a) => vec![
                Generator { bonds: Bonds::Even, weight: *a },
                Generator { bonds: Bonds::Odd, weight: T::one() - *a },
            ],
        }
    }

    pub fn label(&self) -> String {
        match self {
            Ordering::KEvenKOddP => "keven-kodd-p".into(),
            Ordering::KEvenPKOdd => "keven-p-kodd".into(),
            Ordering::Split(a) => format!("split({})", crate::scalar::to_f64(*a)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrotterPlan<T: Real> {
    dt: T,
    ordering: Ordering<T>,
}

impl<T: Real> TrotterPlan<T> {
    pub fn new(dt: T, ordering: Ordering<T>) -> Result<Self, TrotterError> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(TrotterError::BadStep);
        }
        if let Ordering::Split(a) = &ordering {
            if !(*a >= T::zero() && *a <= T::one()) {
                return Err(TrotterError::BadSplit);
            }
        }
        Ok(TrotterPlan { dt, ordering })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn ordering(&self) -> &Ordering<T> {
        &self.ordering
    }
}

/// The three pieces `(K_even, K_odd, P)` of the Hamiltonian.
pub fn kinetic_parts<T: Real>(spec: &ChainSpec<T>) -> (DenseOperator<T>, DenseOperator<T>, DenseOperator<T>) {
    (
        Generator::kinetic(Bonds::Even).dense(spec),
        Generator::kinetic(Bonds::Odd).dense(spec),
        Generator::potential().dense(spec),
    )
}

#[derive(Clone, Debug)]
enum Block<T: Real> {
    Phase(usize, Cplx<T>),
    Pair(usize, [Cplx<T>; 4]),
}

/// Exact exponential `e^{-iτA}` of one generator: disjoint 2×2 rotations and site phases.
#[derive(Clone, Debug)]
pub struct Layer<T: Real> {
    blocks: Vec<Block<T>>,
}

impl<T: Real> Layer<T> {
    pub fn new(spec: &ChainSpec<T>, g: &Generator<T>, tau: T) -> Self {
        let l = spec.len();
        let h = spec.potential();
        let mut covered = vec![false; l];
        let mut blocks = Vec::with_capacity(l);
        let half = lit::<T>(0.5);
        for (a, b) in bond_pairs(g.bonds, l) {
            covered[a] = true;
            covered[b] = true;
            let (da, db) = (g.weight * h[a], g.weight * h[b]);
            let m0 = (da + db) * half;
            let mz = (da - db) * half;
            let mx = -spec.hopping() * half;
            let r = (mz * mz + mx * mx).sqrt();
            let c = (tau * r).cos();
            let s = if r > T::zero() { (tau * r).sin() / r } else { tau };
            let ph = cis_neg(tau * m0);
            let i = Complex::new(T::zero(), T::one());
            let u00 = ph * (Complex::new(c, T::zero()) - i * (s * mz));
            let u11 = ph * (Complex::new(c, T::zero()) + i * (s * mz));
            let u01 = ph * (-i * (s * mx));
            blocks.push(Block::Pair(a, [u00, u01, u01, u11]));
        }
        for n in 0..l {
            if !covered[n] {
                blocks.push(Block::Phase(n, cis_neg(tau * g.weight * h[n])));
            }
        }
        Layer { blocks }
    }

    pub fn apply(&self, psi: &mut [Cplx<T>]) {
        for b in &self.blocks {
            match b {
                Block::Phase(n, z) => psi[*n] *= *z,
                Block::Pair(a, u) => {
                    let (x, y) = (psi[*a], psi[*a + 1]);
                    psi[*a] = u[0] * x + u[1] * y;
                    psi[*a + 1] = u[2] * x + u[3] * y;
                }
            }
        }
    }

    /// Left-multiplies `m` by the layer.
    pub fn apply_left(&self, m: &mut DMatrix<Cplx<T>>) {
        let ncol = m.ncols();
        for b in &self.blocks {
            match b {
                Block::Phase(n, z) => {
                    for c in 0..ncol {
                        m[(*n, c)] *= *z;
                    }
                }
                Block::Pair(a, u) => {
                    for c in 0..ncol {
                        let (x, y) = (m[(*a, c)], m[(*a + 1, c)]);
                        m[(*a, c)] = u[0] * x + u[1] * y;
                        m[(*a + 1, c)] = u[2] * x + u[3] * y;
                    }
                }
            }
        }
    }
}

/// Gate sequence of one step, plus the merged outer layer used when steps are chained.
#[derive(Clone, Debug)]
pub struct StepCircuit<T: Real> {
    dim: usize,
    /// `e^{-iA_n δt/2}`
    outer_half: Option<Layer<T>>,
    /// `e^{-iA_n δt}`: two outer halves of consecutive steps fused.
    outer_full: Option<Layer<T>>,
    /// Everything strictly inside the outer halves, in time order.
    core: Vec<Layer<T>>,
}

impl<T: Real> StepCircuit<T> {
    pub fn new(spec: &ChainSpec<T>, plan: &TrotterPlan<T>) -> Self {
        Self::from_generators(spec, &plan.ordering.generators(), plan.dt)
    }

    pub fn from_generators(spec: &ChainSpec<T>, gens: &[Generator<T>], dt: T) -> Self {
        assert!(!gens.is_empty(), "ordering needs at least one generator");
        let half = dt * lit(0.5);
        let n = gens.len();
        if n == 1 {
            return StepCircuit {
                dim: spec.len(),
                outer_half: None,
                outer_full: None,
                core: vec![Layer::new(spec, &gens[0], dt)],
            };
        }
        let mut core = Vec::with_capacity(2 * n - 3);
        for g in gens[1..n - 1].iter().rev() {
            core.push(Layer::new(spec, g, half));
        }
        core.push(Layer::new(spec, &gens[0], dt));
        for g in &gens[1..n - 1] {
            core.push(Layer::new(spec, g, half));
        }
        StepCircuit {
            dim: spec.len(),
            outer_half: Some(Layer::new(spec, &gens[n - 1], half)),
            outer_full: Some(Layer::new(spec, &gens[n - 1], dt)),
            core,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One full step applied in place, without merging.
    pub fn apply_step(&self, psi: &mut [Cplx<T>]) {
        if let Some(o) = &self.outer_half {
            o.apply(psi);
        }
        for l in &self.core {
            l.apply(psi);
        }
        if let Some(o) = &self.outer_half {
            o.apply(psi);
        }
    }

    /// Dense one-step unitary.
    pub fn unitary(&self) -> DenseOperator<T> {
        let mut m = DMatrix::identity(self.dim, self.dim);
        if let Some(o) = &self.outer_half {
            o.apply_left(&mut m);
        }
        for l in &self.core {
            l.apply_left(&mut m);
        }
        if let Some(o) = &self.outer_half {
            o.apply_left(&mut m);
        }
        DenseOperator::new(m, OperatorTag::Unitary)
    }

    /// `steps` consecutive steps in place, fusing adjacent outer half layers.
    pub fn run(&self, psi: &mut [Cplx<T>], steps: usize) {
        if steps == 0 {
            return;
        }
        match (&self.outer_half, &self.outer_full) {
            (Some(half), Some(full)) => {
                half.apply(psi);
                for s in 0..steps {
                    for l in &self.core {
                        l.apply(psi);
                    }
                    if s + 1 < steps {
                        full.apply(psi);
                    }
                }
                half.apply(psi);
            }
            _ => {
                for _ in 0..steps {
                    for l in &self.core {
                        l.apply(psi);
                    }
                }
            }
        }
    }
}

/// One-step unitary of the plan.
pub fn step_unitary<T: Real>(spec: &ChainSpec<T>, plan: &TrotterPlan<T>) -> DenseOperator<T> {
    StepCircuit::new(spec, plan).unitary()
}

pub fn norm<T: Real>(psi: &[Cplx<T>]) -> T {
    psi.iter().fold(T::zero(), |s, z| s + z.modulus_squared()).sqrt()
}

/// Evolves a normalized state by `steps` Trotter steps at gate level.
pub fn evolve<T: Real>(
    state: &DVector<Cplx<T>>,
    circuit: &StepCircuit<T>,
    steps: usize,
) -> Result<DVector<Cplx<T>>, TrotterError> {
    if state.len() != circuit.dim() {
        return Err(TrotterError::DimensionMismatch { expected: circuit.dim(), got: state.len() });
    }
    let nrm = norm(state.as_slice());
    if (nrm - T::one()).abs() > lit(1e-8) {
        return Err(TrotterError::NotNormalized(crate::scalar::to_f64(nrm)));
    }
    let mut psi = state.clone();
    circuit.run(psi.as_mut_slice(), steps);
    Ok(psi)
}

/// Exact generator of a one-step unitary.
#[derive(Clone, Debug)]
pub struct EffectiveHamiltonian<T: Real> {
    pub op: DenseOperator<T>,
    /// Quasi-energies in `(-π/δt, π/δt]`, ascending.
    pub quasienergies: Vec<T>,
    /// Eigenvectors, columns matched to `quasienergies`.
    pub vectors: DMatrix<Cplx<T>>,
    pub dt: T,
    /// Target spectrum wider than the quasi-energy zone.
    pub folded: bool,
    /// Indices whose phase sits on the `±π` branch cut within `1e-12`.
    pub branch_warnings: Vec<usize>,
}

/// `2J + (max h - min h) > 2π/δt`: the target spectrum does not fit in one quasi-energy zone.
pub fn folding_flag<T: Real>(spec: &ChainSpec<T>, dt: T) -> bool {
    lit::<T>(2.0) * spec.hopping() + spec.potential_range() > T::two_pi() / dt
}

/// `H_eff = -(1/(iδt)) Ln U` with the principal branch.
pub fn effective_hamiltonian<T: Real>(u: &DenseOperator<T>, dt: T) -> Result<EffectiveHamiltonian<T>, TrotterError> {
    if !(dt > T::zero()) {
        return Err(TrotterError::BadStep);
    }
    let n = u.dim();
    let schur = Schur::try_new(u.matrix().clone(), T::default_epsilon(), 0).ok_or(TrotterError::NoConvergence)?;
    let (q, t) = schur.unpack();
    let cut = lit::<T>(1e-12);
    let mut items: Vec<(T, usize)> = Vec::with_capacity(n);
    let mut branch = Vec::new();
    for k in 0..n {
        let z = t[(k, k)];
        let mut phi = z.im.atan2(z.re);
        if (phi - T::pi()).abs() < cut || (phi + T::pi()).abs() < cut {
            branch.push(k);
            // the boundary phase goes to the positive energy branch
            if phi > T::zero() {
                phi = -T::pi();
            }
        }
        items.push((-phi / dt, k));
    }
    items.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut vecs = DMatrix::<Cplx<T>>::zeros(n, n);
    for (col, &(_, k)) in items.iter().enumerate() {
        vecs.set_column(col, &q.column(k));
    }
    let energies: Vec<T> = items.iter().map(|x| x.0).collect();
    let branch_warnings = branch
        .iter()
        .map(|&k| items.iter().position(|x| x.1 == k).unwrap())
        .collect();
    // clusters of numerically equal phases are re-orthonormalized
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (energies[end] - energies[end - 1]) * dt < cut {
            end += 1;
        }
        if end - start > 1 {
            orthonormalize_columns(&mut vecs, start, end);
        }
        start = end;
    }
    let mut m = DMatrix::<Cplx<T>>::zeros(n, n);
    for k in 0..n {
        let v = vecs.column(k);
        let e = Complex::new(energies[k], T::zero());
        m += (&v * v.adjoint()) * e;
    }
    let m = (&m + m.adjoint()) * Complex::new(lit::<T>(0.5), T::zero());
    Ok(EffectiveHamiltonian {
        op: DenseOperator::new(m, OperatorTag::Hermitian),
        quasienergies: energies,
        vectors: vecs,
        dt,
        folded: false,
        branch_warnings,
    })
}

/// Effective Hamiltonian of a plan, with the folding flag set from the chain.
pub fn effective_hamiltonian_of<T: Real>(
    spec: &ChainSpec<T>,
    plan: &TrotterPlan<T>,
) -> Result<EffectiveHamiltonian<T>, TrotterError> {
    let mut e = effective_hamiltonian(&step_unitary(spec, plan), plan.dt)?;
    e.folded = folding_flag(spec, plan.dt);
    Ok(e)
}

fn orthonormalize_columns<T: Real>(m: &mut DMatrix<Cplx<T>>, start: usize, end: usize) {
    for k in start..end {
        let mut v = m.column(k).clone_owned();
        for j in start..k {
            let u = m.column(j).clone_owned();
            let proj = u.dotc(&v);
            v -= u * proj;
        }
        let nv = v.norm();
        m.set_column(k, &(v / Complex::new(nv, T::zero())));
    }
}

/// Leading `δt²` coefficient `𝒟` of `H_eff - H` for the palindrome built from
/// `ops = [A_1, ..., A_n]` (`A_1` in the middle).
///
/// `𝒟_{k+1} = 𝒟_k - (1/12)([H_k,[H_k,A_{k+1}]] - ½[A_{k+1},[A_{k+1},H_k]])`, with `H_k = Σ_{j≤k} A_j`.
pub fn bch_defect<T: Real>(ops: &[DenseOperator<T>]) -> Result<DenseOperator<T>, TrotterError> {
    let first = ops.first().ok_or(TrotterError::Empty)?;
    let n = first.dim();
    if let Some(bad) = ops.iter().find(|o| o.dim() != n) {
        return Err(TrotterError::DimensionMismatch { expected: n, got: bad.dim() });
    }
    let mut d = DMatrix::<Cplx<T>>::zeros(n, n);
    let mut h = first.matrix().clone();
    let twelfth = Complex::new(T::one() / lit(12.0), T::zero());
    let half = Complex::new(lit::<T>(0.5), T::zero());
    for a in &ops[1..] {
        let a = a.matrix();
        let hha = commutator(&h, &commutator(&h, a));
        let aah = commutator(a, &commutator(a, &h));
        d -= (hha - aah * half) * twelfth;
        h += a;
    }
    Ok(DenseOperator::new(d, OperatorTag::Hermitian))
}

/// Generators of the plan as dense operators, `A_1` first.
pub fn ordering_operators<T: Real>(spec: &ChainSpec<T>, ordering: &Ordering<T>) -> Vec<DenseOperator<T>> {
    ordering.generators().iter().map(|g| g.dense(spec)).collect()
}

/// Decay of matrix elements with distance from the diagonal.
#[derive(Clone, Debug)]
pub struct LocalityProfile<T: Real> {
    /// `max_n |H^{n,n+k}|` for `k = 0..L-1`.
    pub max_abs: Vec<T>,
    /// Geometric ratio fitted on `k > 3` above the round-off floor.
    pub ratio: Option<T>,
    /// Distances used in the fit.
    pub fit_range: Option<(usize, usize)>,
}

pub fn locality_profile<T: Real>(h: &DenseOperator<T>) -> LocalityProfile<T> {
    let n = h.dim();
    let m = h.matrix();
    let max_abs: Vec<T> = (0..n)
        .map(|k| (0..n - k).fold(T::zero(), |a, r| a.max(m[(r, r + k)].modulus())))
        .collect();
    let scale = max_abs.iter().copied().fold(T::zero(), T::max);
    let floor = scale * lit(1e-12);
    let mut ks = Vec::new();
    let mut ys = Vec::new();
    for (k, &v) in max_abs.iter().enumerate().skip(4) {
        if v <= floor {
            break;
        }
        ks.push(from_usize::<T>(k));
        ys.push(v.ln());
    }
    let (ratio, fit_range) = if ks.len() >= 2 {
        let (slope, _) = crate::numeric::linear_fit(&ks, &ys);
        (Some(slope.exp()), Some((4, 3 + ks.len())))
    } else {
        (None, None)
    };
    LocalityProfile { max_abs, ratio, fit_range }
}
