//! Chain geometry, on-site potential profiles and the single-particle
//! hopping Hamiltonian.

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

use crate::numeric::CubicSpline;
use crate::operator::{DenseOperator, OperatorTag};
use crate::scalar::{from_usize, lit, Cplx, Real};

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("chain needs at least 2 sites, got {0}")]
    TooShort(usize),
    #[error("hopping scale must be positive and finite")]
    BadHopping,
    #[error("potential parameter `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("potential value at site {0} is not finite")]
    NonFiniteSite(usize),
    #[error("custom potential has {got} values for {expected} sites")]
    LengthMismatch { expected: usize, got: usize },
    #[error("experimental profile needs w > 0 and L >= 4")]
    BadProfile,
    #[error("cannot read potential file: {0}")]
    Io(String),
}

/// Raw data of the target Hamiltonian: `L` sites, hopping `J`, on-site values `h_1..h_L`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainSpec<T: Real> {
    l: usize,
    j: T,
    a: T,
    h: Vec<T>,
}

/// On-site potential families.
#[derive(Clone, Debug, PartialEq)]
pub enum PotentialFamily<T: Real> {
    /// `h_n = P cos(4π(n-1)/(L-1))`: a double well with barrier tops at the ends and the middle.
    Cosine { p: T },
    /// `h_n = α n`.
    Linear { alpha: T },
    /// Double well with endpoints pinned to zero and an optional tilt.
    Experimental { p: T, w: T, dn: T, alpha: T },
    Custom(Vec<T>),
}

impl<T: Real> PotentialFamily<T> {
    fn check_finite(&self) -> Result<(), ChainError> {
        let fin = |v: T, name| if v.is_finite() { Ok(()) } else { Err(ChainError::NonFinite(name)) };
        match self {
            PotentialFamily::Cosine { p } => fin(*p, "P"),
            PotentialFamily::Linear { alpha } => fin(*alpha, "alpha"),
            PotentialFamily::Experimental { p, w, dn, alpha } => {
                fin(*p, "P")?;
                fin(*w, "w")?;
                fin(*dn, "dn")?;
                fin(*alpha, "alpha")
            }
            PotentialFamily::Custom(_) => Ok(()),
        }
    }

    /// Potential values `h_1..h_L`.
    pub fn evaluate(&self, l: usize) -> Result<Vec<T>, ChainError> {
        self.check_finite()?;
        let h = match self {
            PotentialFamily::Cosine { p } => {
                let denom = from_usize::<T>(l - 1);
                (0..l)
                    .map(|k| *p * (lit::<T>(4.0) * T::pi() * from_usize::<T>(k) / denom).cos())
                    .collect()
            }
            PotentialFamily::Linear { alpha } => (1..=l).map(|n| *alpha * from_usize::<T>(n)).collect(),
            PotentialFamily::Experimental { p, w, dn, alpha } => {
                experimental_profile(l, *p, *w, *dn, *alpha)?
            }
            PotentialFamily::Custom(v) => {
                if v.len() != l {
                    return Err(ChainError::LengthMismatch { expected: l, got: v.len() });
                }
                v.clone()
            }
        };
        Ok(h)
    }
}

/// Envelope `f(n, δn)`; vanishes at `n = 1` and `n = L`, where the exponent
/// diverges to minus infinity.
fn envelope<T: Real>(n: T, l: usize, w: T, dn: T) -> T {
    let lf = from_usize::<T>(l);
    let half = lit::<T>(0.5);
    let center = (lf + T::one()) * half;
    let q = (n - dn - center) / w;
    let wall = (n - T::one()) * (lf - n);
    if wall <= T::zero() {
        return T::zero();
    }
    (-(half * q * q * q * q) - lf * half / wall.sqrt()).exp()
}

/// `h_n = P f(n,δn)/f(n₀,δn) + α (n - (L+1)/2)/L` with `n₀ = ⌊(L+1)/2⌋`.
pub fn experimental_profile<T: Real>(l: usize, p: T, w: T, dn: T, alpha: T) -> Result<Vec<T>, ChainError> {
    if w <= T::zero() || l < 4 {
        return Err(ChainError::BadProfile);
    }
    let lf = from_usize::<T>(l);
    let n0 = from_usize::<T>(l.div_ceil(2));
    let norm = envelope(n0, l, w, dn);
    if norm == T::zero() {
        return Err(ChainError::BadProfile);
    }
    Ok((1..=l)
        .map(|n| {
            let nf = from_usize::<T>(n);
            p * envelope(nf, l, w, dn) / norm + alpha * (nf - (lf + T::one()) * lit(0.5)) / lf
        })
        .collect())
}

/// Builds a chain from a potential family.
pub fn build_chain<T: Real>(l: usize, j: T, family: &PotentialFamily<T>) -> Result<ChainSpec<T>, ChainError> {
    if l < 2 {
        return Err(ChainError::TooShort(l));
    }
    let h = family.evaluate(l)?;
    ChainSpec::new(j, h)
}

/// Reads a one-column potential file (one `h_n` per line, `#` comments allowed).
pub fn read_potential_file(path: &std::path::Path) -> Result<Vec<f64>, ChainError> {
    let text = std::fs::read_to_string(path).map_err(|e| ChainError::Io(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let v: f64 = s
            .parse()
            .map_err(|_| ChainError::Io(format!("line {}: not a number: {s}", i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

impl<T: Real> ChainSpec<T> {
    pub fn new(j: T, h: Vec<T>) -> Result<Self, ChainError> {
        if h.len() < 2 {
            return Err(ChainError::TooShort(h.len()));
        }
        if !(j > T::zero()) || !j.is_finite() {
            return Err(ChainError::BadHopping);
        }
        if let Some(k) = h.iter().position(|v| !v.is_finite()) {
            return Err(ChainError::NonFiniteSite(k + 1));
        }
        Ok(ChainSpec { l: h.len(), j, a: T::one(), h })
    }

    /// Same chain with the hopping switched off; only used for limiting checks.
    pub fn without_hopping(&self) -> Self {
        ChainSpec { j: T::zero(), ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.l
    }

    pub fn is_empty(&self) -> bool {
        self.l == 0
    }

    pub fn hopping(&self) -> T {
        self.j
    }

    pub fn lattice_constant(&self) -> T {
        self.a
    }

    pub fn potential(&self) -> &[T] {
        &self.h
    }

    pub fn h_min(&self) -> T {
        self.h.iter().copied().fold(T::max_value().unwrap(), T::min)
    }

    pub fn h_max(&self) -> T {
        self.h.iter().copied().fold(T::min_value().unwrap(), T::max)
    }

    /// Potential range `max h - min h`.
    pub fn potential_range(&self) -> T {
        self.h_max() - self.h_min()
    }

    /// Lowest energy allowed by the band, `min h - J`.
    pub fn band_bottom(&self) -> T {
        self.h_min() - self.j
    }

    pub fn with_potential(&self, h: Vec<T>) -> Result<Self, ChainError> {
        ChainSpec::new(self.j, h)
    }

    pub fn smooth_potential(&self) -> SmoothPotential<T> {
        SmoothPotential { spline: CubicSpline::new(T::one(), self.h.clone()) }
    }

    /// Real symmetric form of the Hamiltonian.
    pub fn hamiltonian_real(&self) -> DMatrix<T> {
        let l = self.l;
        let t = -self.j * lit(0.5);
        DMatrix::from_fn(l, l, |r, c| {
            if r == c {
                self.h[r]
            } else if r + 1 == c || c + 1 == r {
                t
            } else {
                T::zero()
            }
        })
    }
}

/// Hamiltonian matrix: `h_n` on the diagonal, `-J/2` on the first off-diagonals, open ends.
pub fn hamiltonian_matrix<T: Real>(spec: &ChainSpec<T>) -> DenseOperator<T> {
    let m = spec.hamiltonian_real().map(|v| Complex::new(v, T::zero()));
    DenseOperator::new(m, OperatorTag::Hermitian)
}

/// Cubic interpolation of the site potential, `h(x)` with sites at `x = 1..L`.
#[derive(Clone, Debug)]
pub struct SmoothPotential<T: Real> {
    spline: CubicSpline<T>,
}

impl<T: Real> SmoothPotential<T> {
    pub fn value(&self, x: T) -> T {
        self.spline.value(x)
    }

    pub fn gradient(&self, x: T) -> T {
        self.spline.slope(x)
    }

    pub fn sites(&self) -> usize {
        self.spline.len()
    }

    /// Maximum of `h(x)` on `[a, b]`, located on a fine grid and refined by golden search.
    pub fn argmax(&self, a: T, b: T) -> (T, T) {
        self.extremum(a, b, true)
    }

    pub fn argmin(&self, a: T, b: T) -> (T, T) {
        self.extremum(a, b, false)
    }

    fn extremum(&self, a: T, b: T, max: bool) -> (T, T) {
        let sign = if max { -T::one() } else { T::one() };
        let n = ((b - a).to_f64().unwrap_or(1.0) * 16.0).ceil().max(8.0) as usize;
        let step = (b - a) / from_usize::<T>(n);
        let mut best = a;
        let mut bv = sign * self.value(a);
        for k in 1..=n {
            let x = a + step * from_usize::<T>(k);
            let v = sign * self.value(x);
            if v < bv {
                bv = v;
                best = x;
            }
        }
        let lo = (best - step).max(a);
        let hi = (best + step).min(b);
        let (x, v) = crate::numeric::golden_min(|x| sign * self.value(x), lo, hi, lit(1e-10));
        if v < bv {
            (x, sign * v)
        } else {
            (best, sign * bv)
        }
    }
}

/// Wigner symbol of the bare Hamiltonian, `-J cos p + h(x)`, for complex momentum.
pub fn wigner_transform<T: Real>(pot: &SmoothPotential<T>, j: T, x: T, p: Cplx<T>) -> Cplx<T> {
    use nalgebra::ComplexField;
    -p.cos() * j + Complex::new(pot.value(x), T::zero())
}
