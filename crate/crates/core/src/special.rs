//! Special functions.

use crate::scalar::{from_usize, lit, Real};

/// Integer-order Bessel functions `J_0(x) .. J_nmax(x)` by Miller's backward
/// recurrence, normalized with `J_0 + 2 Σ J_2k = 1`.
pub fn bessel_j_table<T: Real>(nmax: usize, x: T) -> Vec<T> {
    let ax = x.abs();
    let mut out = vec![T::zero(); nmax + 1];
    if ax == T::zero() {
        out[0] = T::one();
        return out;
    }
    let big = nmax.max(ax.to_usize().unwrap_or(0) + 1);
    let mut start = big + 20 + (40.0 * big as f64).sqrt() as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let two = lit::<T>(2.0);
    let mut jp1 = T::zero();
    let mut j = lit::<T>(1e-30);
    let mut norm = T::zero();
    let rescale = lit::<T>(1e250f64.min(to_max::<T>()));
    for k in (0..=start).rev() {
        if k <= nmax {
            out[k] = j;
        }
        if k % 2 == 0 {
            norm += if k == 0 { j } else { two * j };
        }
        if k == 0 {
            break;
        }
        let jm1 = two * from_usize::<T>(k) / ax * j - jp1;
        jp1 = j;
        j = jm1;
        if j.abs() > rescale {
            let s = T::one() / rescale;
            j *= s;
            jp1 *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    for (k, v) in out.iter_mut().enumerate() {
        *v /= norm;
        if x < T::zero() && k % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

fn to_max<T: Real>() -> f64 {
    // keep rescaling threshold well inside the type's range
    if std::mem::size_of::<T>() <= 4 {
        1e30
    } else {
        1e250
    }
}

/// `J_n(x)` for any integer order.
pub fn bessel_j<T: Real>(n: i64, x: T) -> T {
    let m = n.unsigned_abs() as usize;
    let v = bessel_j_table(m, x)[m];
    if n < 0 && m % 2 == 1 {
        -v
    } else {
        v
    }
}
