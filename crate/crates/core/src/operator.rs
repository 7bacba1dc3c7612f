//! Dense complex operators on the single-particle space.

use std::io::{BufRead, Write};

use nalgebra::{Complex, ComplexField, DMatrix};

use crate::scalar::{lit, to_f64, Cplx, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorTag {
    Unitary,
    Hermitian,
    General,
}

impl OperatorTag {
    pub fn as_str(self) -> &'static str {
        match self {
            OperatorTag::Unitary => "unitary",
            OperatorTag::Hermitian => "hermitian",
            OperatorTag::General => "general",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unitary" => Some(OperatorTag::Unitary),
            "hermitian" => Some(OperatorTag::Hermitian),
            "general" => Some(OperatorTag::General),
            _ => None,
        }
    }
}

/// `L×L` complex matrix with a tag saying how it should be interpreted.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator<T: Real> {
    m: DMatrix<Cplx<T>>,
    tag: OperatorTag,
}

impl<T: Real> DenseOperator<T> {
    pub fn new(m: DMatrix<Cplx<T>>, tag: OperatorTag) -> Self {
        assert!(m.is_square(), "operator must be square");
        DenseOperator { m, tag }
    }

    pub fn zeros(dim: usize, tag: OperatorTag) -> Self {
        Self::new(DMatrix::zeros(dim, dim), tag)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim), OperatorTag::Unitary)
    }

    pub fn from_real(m: &DMatrix<T>, tag: OperatorTag) -> Self {
        Self::new(m.map(|v| Complex::new(v, T::zero())), tag)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn tag(&self) -> OperatorTag {
        self.tag
    }

    pub fn matrix(&self) -> &DMatrix<Cplx<T>> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<Cplx<T>> {
        self.m
    }

    pub fn with_tag(mut self, tag: OperatorTag) -> Self {
        self.tag = tag;
        self
    }

    /// `max |(U†U - I)_{ij}|`
    pub fn unitarity_error(&self) -> T {
        let p = self.m.adjoint() * &self.m;
        let n = self.dim();
        let mut e = T::zero();
        for r in 0..n {
            for c in 0..n {
                let target = if r == c { T::one() } else { T::zero() };
                e = e.max((p[(r, c)] - Complex::new(target, T::zero())).modulus());
            }
        }
        e
    }

    /// `max |(A - A†)_{ij}|`
    pub fn hermiticity_error(&self) -> T {
        let n = self.dim();
        let mut e = T::zero();
        for r in 0..n {
            for c in r..n {
                e = e.max((self.m[(r, c)] - self.m[(c, r)].conj()).modulus());
            }
        }
        e
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_error() < lit(1e-10)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_error() < lit(1e-12)
    }

    /// True when every imaginary part vanishes exactly.
    pub fn is_real(&self) -> bool {
        self.m.iter().all(|z| z.im == T::zero())
    }

    pub fn real_part(&self) -> DMatrix<T> {
        self.m.map(|z| z.re)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(&self.m + &other.m, OperatorTag::General)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(&self.m - &other.m, OperatorTag::General)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.m.map(|z| z * s), self.tag)
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> T {
        self.m
            .clone()
            .singular_values()
            .iter()
            .copied()
            .fold(T::zero(), T::max)
    }

    /// `sqrt(Tr(A - B)†(A - B) / dim)`
    pub fn normalized_distance(&self, other: &Self) -> T {
        let d = &self.m - &other.m;
        let n = lit::<T>(self.dim() as f64);
        (d.iter().fold(T::zero(), |a, z| a + z.modulus_squared()) / n).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.m.iter().fold(T::zero(), |a, z| a.max(z.modulus()))
    }

    /// Text format: header line `dim tag`, then one row per line as
    /// whitespace-separated `re im` pairs, row-major.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.dim();
        writeln!(w, "{} {}", n, self.tag.as_str())?;
        for r in 0..n {
            let mut line = String::new();
            for c in 0..n {
                let z = self.m[(r, c)];
                if c > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{:.16e} {:.16e}", to_f64(z.re), to_f64(z.im)));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> std::io::Result<Self> {
        let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty operator file"))??;
        let mut it = header.split_whitespace();
        let n: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad dimension in header"))?;
        let tag = it
            .next()
            .and_then(OperatorTag::parse)
            .ok_or_else(|| bad("bad tag in header"))?;
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            let line = lines.next().ok_or_else(|| bad("missing row"))??;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad("bad number"))?;
            if vals.len() != 2 * n {
                return Err(bad("row has wrong length"));
            }
            for c in 0..n {
                m[(r, c)] = Complex::new(lit(vals[2 * c]), lit(vals[2 * c + 1]));
            }
        }
        Ok(Self::new(m, tag))
    }
}

/// Commutator `[A, B] = AB - BA`.
pub fn commutator<T: Real>(a: &DMatrix<Cplx<T>>, b: &DMatrix<Cplx<T>>) -> DMatrix<Cplx<T>> {
    a * b - b * a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let m = DMatrix::from_fn(3, 3, |r, c| Complex::new(r as f64 + 0.25, c as f64 - 1.0 / 3.0));
        let op = DenseOperator::new(m, OperatorTag::General);
        let mut buf = Vec::new();
        op.write_text(&mut buf).unwrap();
        let back = DenseOperator::<f64>::read_text(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.tag(), OperatorTag::General);
        assert!(back.sub(&op).max_abs() < 1e-15);
    }

    #[test]
    fn identity_checks() {
        let id = DenseOperator::<f64>::identity(4);
        assert!(id.is_unitary());
        assert!(id.is_hermitian());
        assert!((id.spectral_norm() - 1.0).abs() < 1e-14);
    }
}
