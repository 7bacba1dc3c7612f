//! Exact diagonalization and the quantities built on eigendata: doublets,
//! the two-level resonant model, overlap maps, probability defect, the
//! rigorous product-formula bound and the Wannier–Stark ladder.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, SymmetricEigen};

use crate::chain::ChainSpec;
use crate::operator::{DenseOperator, OperatorTag};
use crate::scalar::{from_usize, lit, Cplx, Real};
use crate::special::bessel_j_table;
use crate::trotter::EffectiveHamiltonian;

#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumSource<T: Real> {
    Exact,
    Effective { dt: T, ordering: String },
    /// Doublets rotated into left/right localized states; energies are
    /// expectation values and need not be sorted inside a pair.
    Localized,
}

#[derive(Clone, Debug)]
pub struct SpectrumReport<T: Real> {
    pub energies: Vec<T>,
    /// Eigenvectors as columns, matched to `energies`.
    pub states: DMatrix<Cplx<T>>,
    pub source: SpectrumSource<T>,
}

impl<T: Real> SpectrumReport<T> {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn state(&self, k: usize) -> DVector<Cplx<T>> {
        self.states.column(k).clone_owned()
    }

    /// Effective-Hamiltonian spectrum taken straight from the matrix logarithm.
    pub fn from_effective(heff: &EffectiveHamiltonian<T>, ordering: &str) -> Self {
        SpectrumReport {
            energies: heff.quasienergies.clone(),
            states: heff.vectors.clone(),
            source: SpectrumSource::Effective { dt: heff.dt, ordering: ordering.to_string() },
        }
    }

    /// `exp(-i H t)` assembled from the eigenpairs.
    pub fn propagator(&self, t: T) -> DenseOperator<T> {
        let n = self.len();
        let mut scaled = self.states.clone();
        for k in 0..n {
            let (s, c) = (self.energies[k] * t).sin_cos();
            let ph = Complex::new(c, -s);
            for r in 0..n {
                scaled[(r, k)] *= ph;
            }
        }
        DenseOperator::new(scaled * self.states.adjoint(), OperatorTag::Unitary)
    }

    /// `max_k ‖H v_k - E_k v_k‖`
    pub fn max_residual(&self, h: &DenseOperator<T>) -> T {
        let mut worst = T::zero();
        for k in 0..self.len() {
            let v = self.states.column(k);
            let r = h.matrix() * v - v * Complex::new(self.energies[k], T::zero());
            worst = worst.max(r.norm());
        }
        worst
    }

    /// Rotates every cluster of eigenvalues closer than `tol` onto eigenstates of the
    /// site reflection `k -> L-1-k`, then projects each state onto its parity sector.
    /// Only meaningful when the operator commutes with the reflection.
    pub fn resolve_mirror_degeneracies(&self, tol: T) -> Self {
        let n = self.len();
        let reflect = |v: &DMatrix<Cplx<T>>| {
            let mut rv = v.clone();
            for r in 0..n {
                rv.set_row(r, &v.row(n - 1 - r));
            }
            rv
        };
        let mut out = self.clone();
        let mut a = 0;
        while a < n {
            let mut b = a + 1;
            while b < n && self.energies[b] - self.energies[b - 1] < tol {
                b += 1;
            }
            if b - a > 1 {
                let v = self.states.columns(a, b - a).into_owned();
                let m = v.adjoint() * reflect(&v);
                let m = (&m + m.adjoint()) * Complex::new(lit::<T>(0.5), T::zero());
                let w = SymmetricEigen::new(m).eigenvectors;
                out.states.columns_mut(a, b - a).copy_from(&(v * w));
            }
            a = b;
        }
        let rv = reflect(&out.states);
        for k in 0..n {
            let v = out.states.column(k).clone_owned();
            let r = rv.column(k).clone_owned();
            let sign = if v.dotc(&r).re >= T::zero() { T::one() } else { -T::one() };
            let p = v + r * Complex::new(sign, T::zero());
            let norm = p.norm();
            out.states.set_column(k, &(p / Complex::new(norm, T::zero())));
        }
        out
    }

    /// `max |V†V - I|`
    pub fn orthonormality_error(&self) -> T {
        let g = self.states.adjoint() * &self.states;
        let n = g.nrows();
        let mut e = T::zero();
        for r in 0..n {
            for c in 0..n {
                let t = if r == c { T::one() } else { T::zero() };
                e = e.max((g[(r, c)] - Complex::new(t, T::zero())).modulus());
            }
        }
        e
    }
}

/// Full eigensystem of a Hermitian operator, energies ascending.
pub fn diagonalize<T: Real>(h: &DenseOperator<T>) -> SpectrumReport<T> {
    let n = h.dim();
    let (vals, vecs): (Vec<T>, DMatrix<Cplx<T>>) = if h.is_real() {
        let e = SymmetricEigen::new(h.real_part());
        (e.eigenvalues.iter().copied().collect(), e.eigenvectors.map(|v| Complex::new(v, T::zero())))
    } else {
        let e = SymmetricEigen::new(h.matrix().clone());
        (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
    };
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
    let mut states = DMatrix::zeros(n, n);
    for (col, &k) in idx.iter().enumerate() {
        states.set_column(col, &vecs.column(k));
    }
    SpectrumReport { energies: idx.iter().map(|&k| vals[k]).collect(), states, source: SpectrumSource::Exact }
}

/// `true` when `h_n = h_{L+1-n}` to `1e-12` of the potential range.
pub fn is_mirror_symmetric<T: Real>(spec: &ChainSpec<T>) -> bool {
    let h = spec.potential();
    let tol = lit::<T>(1e-12) * spec.potential_range().max(T::one());
    (0..h.len() / 2).all(|k| (h[k] - h[h.len() - 1 - k]).abs() <= tol)
}

/// Exact spectrum of a chain. Mirror-symmetric chains are diagonalized in
/// the even and odd sectors separately, so that doublets whose splitting is
/// below round-off still come out as parity eigenstates.
pub fn diagonalize_chain<T: Real>(spec: &ChainSpec<T>) -> SpectrumReport<T> {
    let h = crate::chain::hamiltonian_matrix(spec);
    if !is_mirror_symmetric(spec) {
        return diagonalize(&h);
    }
    let l = spec.len();
    let half = l / 2;
    let s = T::one() / lit::<T>(2.0).sqrt();
    // columns: even combinations (plus the middle site), then odd ones
    let n_even = l - half;
    let mut q = DMatrix::<T>::zeros(l, l);
    for k in 0..half {
        q[(k, k)] = s;
        q[(l - 1 - k, k)] = s;
        q[(k, n_even + k)] = s;
        q[(l - 1 - k, n_even + k)] = -s;
    }
    if l % 2 == 1 {
        q[(half, half)] = T::one();
    }
    let hp = q.transpose() * h.real_part() * &q;
    let mut vals = Vec::with_capacity(l);
    let mut vecs = DMatrix::<T>::zeros(l, l);
    for (start, len) in [(0, n_even), (n_even, half)] {
        if len == 0 {
            continue;
        }
        let block = hp.view((start, start), (len, len)).clone_owned();
        let e = SymmetricEigen::new(block);
        let basis = q.columns(start, len);
        for k in 0..len {
            vecs.set_column(vals.len(), &(basis * e.eigenvectors.column(k)));
            vals.push(e.eigenvalues[k]);
        }
    }
    let mut idx: Vec<usize> = (0..l).collect();
    idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
    let mut states = DMatrix::zeros(l, l);
    for (col, &k) in idx.iter().enumerate() {
        states.set_column(col, &vecs.column(k).map(|v| Complex::new(v, T::zero())));
    }
    SpectrumReport { energies: idx.iter().map(|&k| vals[k]).collect(), states, source: SpectrumSource::Exact }
}

/// Probability on sites strictly left / right of `center` (sites sit at `x = 1..L`).
pub fn side_weights<T: Real>(psi: &[Cplx<T>], center: T) -> (T, T) {
    let mut l = T::zero();
    let mut r = T::zero();
    for (k, z) in psi.iter().enumerate() {
        let x = from_usize::<T>(k + 1);
        if x < center {
            l += z.modulus_squared();
        } else if x > center {
            r += z.modulus_squared();
        }
    }
    (l, r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoubletReport<T: Real> {
    /// 1-based doublet ordinal.
    pub index: usize,
    /// State indices of the lower and upper member.
    pub lower: usize,
    pub upper: usize,
    pub e_mean: T,
    /// Half splitting `(E_upper - E_lower)/2`.
    pub eta: T,
    /// `E_right - E_left` in the localized basis.
    pub epsilon: T,
    /// Weights of the lower member on each side of the barrier.
    pub left_weight: T,
    pub right_weight: T,
    /// Left- and right-localized combinations.
    pub left_state: DVector<Cplx<T>>,
    pub right_state: DVector<Cplx<T>>,
}

impl<T: Real> DoubletReport<T> {
    pub fn splitting(&self) -> T {
        self.eta * lit(2.0)
    }

    /// Tunneling matrix element `|⟨L|H|R⟩|` of the localized pair.
    pub fn tunneling(&self) -> T {
        let q = self.eta * self.eta - self.epsilon * self.epsilon / lit(4.0);
        q.max(T::zero()).sqrt()
    }
}

/// Builds the localized pair from states `i < j` of a report.
///
/// The left/right combinations are the extreme eigenvectors of `W_L - W_R`
/// restricted to the pair; `None` when either fails to put more than half of
/// its weight on its own side by at least `sqrt(eps)`.
pub fn doublet_from_pair<T: Real>(report: &SpectrumReport<T>, i: usize, j: usize, center: T) -> Option<DoubletReport<T>> {
    let a = report.state(i);
    let b = report.state(j);
    let l = a.len();
    let mut d = DVector::<T>::zeros(l);
    for k in 0..l {
        let x = from_usize::<T>(k + 1);
        d[k] = if x < center {
            T::one()
        } else if x > center {
            -T::one()
        } else {
            T::zero()
        };
    }
    let weigh = |u: &DVector<Cplx<T>>, v: &DVector<Cplx<T>>| {
        let mut s = Complex::new(T::zero(), T::zero());
        for k in 0..l {
            s += u[k].conj() * v[k] * d[k];
        }
        s
    };
    let waa = weigh(&a, &a).re;
    let wbb = weigh(&b, &b).re;
    let wab = weigh(&a, &b);
    // eigenvectors of [[waa, wab], [wab*, wbb]]
    let half = lit::<T>(0.5);
    let mid = (waa + wbb) * half;
    let dif = (waa - wbb) * half;
    let rad = (dif * dif + wab.modulus_squared()).sqrt();
    let top = mid + rad;
    let (ca, cb) = if wab.modulus() > T::default_epsilon() * lit(10.0) {
        let v = (wab, Complex::new(top - waa, T::zero()));
        let n = (v.0.modulus_squared() + v.1.modulus_squared()).sqrt();
        (v.0 / Complex::new(n, T::zero()), v.1 / Complex::new(n, T::zero()))
    } else if waa >= wbb {
        (Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::zero()))
    } else {
        (Complex::new(T::zero(), T::zero()), Complex::new(T::one(), T::zero()))
    };
    let left = &a * ca + &b * cb;
    // orthogonal partner
    let right = &a * (-cb.conj()) + &b * ca.conj();
    let (ll, _) = side_weights(left.as_slice(), center);
    let (_, rr) = side_weights(right.as_slice(), center);
    let floor = half + T::default_epsilon().sqrt();
    if ll <= floor || rr <= floor {
        return None;
    }
    let (ea, eb) = (report.energies[i], report.energies[j]);
    let e_left = ca.modulus_squared() * ea + cb.modulus_squared() * eb;
    let e_right = cb.modulus_squared() * ea + ca.modulus_squared() * eb;
    let (lw, rw) = side_weights(a.as_slice(), center);
    Some(DoubletReport {
        index: 0,
        lower: i,
        upper: j,
        e_mean: (ea + eb) * half,
        eta: (eb - ea).abs() * half,
        epsilon: e_right - e_left,
        left_weight: lw,
        right_weight: rw,
        left_state: left,
        right_state: right,
    })
}

#[derive(Clone, Debug)]
pub struct DoubletScan<T: Real> {
    pub doublets: Vec<DoubletReport<T>>,
    /// Ordinals of consecutive pairs that could not be classified.
    pub excluded: Vec<usize>,
}

/// Pairs consecutive levels `(2k-2, 2k-1)` from the bottom up to `ceiling`.
pub fn find_doublets<T: Real>(report: &SpectrumReport<T>, barrier_center: T, ceiling: Option<T>) -> DoubletScan<T> {
    let mut doublets = Vec::new();
    let mut excluded = Vec::new();
    let mut k = 1;
    while 2 * k <= report.len() {
        let (i, j) = (2 * k - 2, 2 * k - 1);
        if let Some(c) = ceiling {
            if report.energies[j] > c {
                break;
            }
        }
        match doublet_from_pair(report, i, j, barrier_center) {
            Some(mut d) => {
                d.index = k;
                doublets.push(d);
            }
            None => excluded.push(k),
        }
        k += 1;
    }
    DoubletScan { doublets, excluded }
}

/// For each reference state, the index of the target state with the largest overlap.
pub fn match_states<T: Real>(reference: &SpectrumReport<T>, target: &SpectrumReport<T>, indices: &[usize]) -> Vec<usize> {
    indices
        .iter()
        .map(|&k| {
            let v = reference.states.column(k);
            let ov = target.states.adjoint() * v;
            let mut best = 0;
            for m in 1..ov.len() {
                if ov[m].modulus() > ov[best].modulus() {
                    best = m;
                }
            }
            best
        })
        .collect()
}

/// The two target states carrying the largest weight in the span of the
/// reference pair `(i, j)`, in ascending energy.
pub fn match_pair<T: Real>(reference: &SpectrumReport<T>, pair: (usize, usize), target: &SpectrumReport<T>) -> (usize, usize) {
    let a = target.states.adjoint() * reference.states.column(pair.0);
    let b = target.states.adjoint() * reference.states.column(pair.1);
    let mut w: Vec<(T, usize)> = (0..a.len()).map(|m| (a[m].modulus_squared() + b[m].modulus_squared(), m)).collect();
    w.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    let (p, q) = (w[0].1, w[1].1);
    if target.energies[p] <= target.energies[q] {
        (p, q)
    } else {
        (q, p)
    }
}

/// Rotates the lowest `pairs` doublets into left/right localized states.
pub fn localize_doublets<T: Real>(report: &SpectrumReport<T>, barrier_center: T, pairs: usize) -> SpectrumReport<T> {
    let mut out = report.clone();
    out.source = SpectrumSource::Localized;
    for k in 1..=pairs {
        let (i, j) = (2 * k - 2, 2 * k - 1);
        if j >= report.len() {
            break;
        }
        if let Some(d) = doublet_from_pair(report, i, j, barrier_center) {
            out.states.set_column(i, &d.left_state);
            out.states.set_column(j, &d.right_state);
            out.energies[i] = d.e_mean - d.epsilon * lit(0.5);
            out.energies[j] = d.e_mean + d.epsilon * lit(0.5);
        }
    }
    out
}

/// Two-level resonant subspace `[[-ε/2, η], [η, ε/2]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonantModel<T: Real> {
    pub epsilon: T,
    pub eta: T,
}

impl<T: Real> ResonantModel<T> {
    pub fn new(epsilon: T, eta: T) -> Self {
        assert!(eta >= T::zero(), "tunneling amplitude must be non-negative");
        ResonantModel { epsilon, eta }
    }

    /// `Ω = sqrt(η² + ε²/4)`
    pub fn omega(&self) -> T {
        (self.eta * self.eta + self.epsilon * self.epsilon / lit(4.0)).sqrt()
    }

    pub fn eigenvalues(&self) -> (T, T) {
        let w = self.omega();
        (-w, w)
    }

    /// Time-independent part `(ε/2Ω)²` of the left occupancy.
    pub fn floor(&self) -> T {
        let w = self.omega();
        if w == T::zero() {
            return T::one();
        }
        let r = self.epsilon / (lit::<T>(2.0) * w);
        r * r
    }

    /// Left-well occupancy starting from the left state.
    pub fn occupancy(&self, t: T) -> T {
        let f = self.floor();
        let c = (self.omega() * t).cos();
        f + (T::one() - f) * c * c
    }

    /// Period of the occupancy oscillation, `π/Ω`.
    pub fn period(&self) -> T {
        T::pi() / self.omega()
    }
}

/// `|⟨M|N_eff⟩|` for the first `levels` states; the diagonal holds
/// `sqrt(1 - |⟨N|N_eff⟩|²)`. Raw values plus the `(Jδt)²` normalization.
#[derive(Clone, Debug)]
pub struct OverlapMap<T: Real> {
    /// Rows: effective level `M`; columns: exact level `N`.
    pub raw: DMatrix<T>,
    pub normalization: T,
}

impl<T: Real> OverlapMap<T> {
    pub fn normalized(&self) -> DMatrix<T> {
        self.raw.map(|v| v / self.normalization)
    }
}

pub fn overlap_map<T: Real>(
    exact: &SpectrumReport<T>,
    effective: &SpectrumReport<T>,
    levels: usize,
    j: T,
    dt: T,
) -> OverlapMap<T> {
    let n = levels.min(exact.len()).min(effective.len());
    let mut raw = DMatrix::zeros(n, n);
    for nn in 0..n {
        let v = exact.states.column(nn);
        for m in 0..n {
            let ov = effective.states.column(m).dotc(&v).modulus();
            raw[(m, nn)] = if m == nn { (T::one() - ov * ov).max(T::zero()).sqrt() } else { ov };
        }
    }
    let jdt = j * dt;
    OverlapMap { raw, normalization: jdt * jdt }
}

/// First-order perturbative version of the overlap map:
/// `|⟨M|δH|N⟩/(E_N - E_M)|` off the diagonal, `sqrt(δP_N)` on it.
pub fn perturbative_overlap_map<T: Real>(exact: &SpectrumReport<T>, delta_h: &DenseOperator<T>, levels: usize, j: T, dt: T) -> OverlapMap<T> {
    let n = levels.min(exact.len());
    let mut raw = DMatrix::zeros(n, n);
    let dv = delta_h.matrix() * exact.states.columns(0, n);
    for nn in 0..n {
        for m in 0..n {
            if m != nn {
                let el = exact.states.column(m).dotc(&dv.column(nn)).modulus();
                raw[(m, nn)] = el / (exact.energies[nn] - exact.energies[m]).abs();
            }
        }
        raw[(nn, nn)] = probability_defect(nn, exact, delta_h, j * dt).dp.sqrt();
    }
    let jdt = j * dt;
    OverlapMap { raw, normalization: jdt * jdt }
}

/// Reference lines of the overlap map for a level at energy `e_n`:
/// `E_M = E_N`, `E_M = 2J - (E_N + h)`, `E_M = 2J + (E_N + h)`.
pub fn ridge_lines<T: Real>(e_n: T, j: T, h_ref: T) -> [T; 3] {
    let two_j = lit::<T>(2.0) * j;
    [e_n, two_j - (e_n + h_ref), two_j + (e_n + h_ref)]
}

#[derive(Clone, Debug)]
pub struct DefectReport<T: Real> {
    /// Second-order sum over non-degenerate partners.
    pub dp: T,
    /// `δP/(Jδt)⁴`
    pub c_n: T,
    /// Partners closer than `1e-10 J`, with their unnormalized `|⟨N'|δH|N⟩|²`.
    pub flagged: Vec<(usize, T)>,
}

/// `δP = Σ_{N'≠N} |⟨N'|δH|N⟩|²/(E_N - E_{N'})²`.
pub fn probability_defect<T: Real>(n: usize, exact: &SpectrumReport<T>, delta_h: &DenseOperator<T>, jdt: T) -> DefectReport<T> {
    let v = exact.states.column(n);
    let dv = delta_h.matrix() * v;
    let thresh = lit::<T>(1e-10);
    let mut dp = T::zero();
    let mut flagged = Vec::new();
    for m in 0..exact.len() {
        if m == n {
            continue;
        }
        let el = exact.states.column(m).dotc(&dv).modulus_squared();
        let gap = exact.energies[n] - exact.energies[m];
        if gap.abs() < thresh {
            flagged.push((m, el));
        } else {
            dp += el / (gap * gap);
        }
    }
    let j4 = jdt * jdt * jdt * jdt;
    DefectReport { dp, c_n: if j4 > T::zero() { dp / j4 } else { T::zero() }, flagged }
}

/// `1 - |⟨N|N_eff⟩|²`
pub fn direct_defect<T: Real>(exact: &DVector<Cplx<T>>, effective: &DVector<Cplx<T>>) -> T {
    let o = effective.dotc(exact).modulus();
    T::one() - o * o
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigorousBound<T: Real> {
    /// `x = 3 n Λ δt`
    pub x: T,
    pub one_step: T,
    /// `(t/δt)·one_step`
    pub accumulated: T,
    /// Time at which the accumulated detuning reaches order one, `1/(Λ x²)`.
    pub t_bound: T,
}

/// Product-formula error bound `C x³/n + x⁴/12 e^x` with `C = 1/4`.
pub fn rigorous_bound<T: Real>(n: usize, lambda: T, dt: T, t: T) -> RigorousBound<T> {
    let nf = from_usize::<T>(n);
    let x = lit::<T>(3.0) * nf * lambda * dt;
    let c = lit::<T>(0.25);
    let one_step = c * x * x * x / nf + x * x * x * x / lit(12.0) * x.exp();
    let accumulated = if dt > T::zero() { one_step * t / dt } else { T::zero() };
    let t_bound = if x > T::zero() { T::one() / (lambda * x * x) } else { T::max_value().unwrap() };
    RigorousBound { x, one_step, accumulated, t_bound }
}

/// Analytic eigensystem of the chain in a linear potential `h_n = α n`.
#[derive(Clone, Debug)]
pub struct WannierStark<T: Real> {
    pub alpha: T,
    pub j: T,
    pub l: usize,
    /// `J_k(J/α)` for `k = 0..L`.
    bessel: Vec<T>,
}

impl<T: Real> WannierStark<T> {
    pub fn spacing(&self) -> T {
        self.alpha
    }

    /// Level centred on site `N`: energy `αN`.
    pub fn energy(&self, n: usize) -> T {
        self.alpha * from_usize::<T>(n)
    }

    /// Amplitudes `⟨n|N⟩ = J_{n-N}(J/α)` on sites `n = 1..L`.
    pub fn amplitudes(&self, center: usize) -> DVector<T> {
        DVector::from_fn(self.l, |k, _| {
            let d = (k + 1) as i64 - center as i64;
            let m = d.unsigned_abs() as usize;
            let v = if m < self.bessel.len() { self.bessel[m] } else { T::zero() };
            if d < 0 && m % 2 == 1 {
                -v
            } else {
                v
            }
        })
    }
}

pub fn wannier_stark_oracle<T: Real>(alpha: T, spec: &ChainSpec<T>) -> WannierStark<T> {
    let j = spec.hopping();
    WannierStark { alpha, j, l: spec.len(), bessel: bessel_j_table(spec.len(), j / alpha) }
}

/// Maximum-overlap magnitude between a real vector and a column of a report.
pub fn overlap_with<T: Real>(report: &SpectrumReport<T>, k: usize, v: &DVector<T>) -> T {
    let col = report.states.column(k);
    let mut s = Complex::new(T::zero(), T::zero());
    for i in 0..v.len() {
        s += col[i].conj() * v[i];
    }
    s.modulus() / v.norm()
}
