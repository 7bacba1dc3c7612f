//! Small numerical kernels shared by the physics modules: quadrature,
//! bracketing root search, 1D minimization, splines and fits.

use crate::scalar::{from_usize, lit, Real};

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T) -> T {
    if a == b {
        return T::zero();
    }
    let two = lit::<T>(2.0);
    let m = (a + b) / two;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / lit(6.0) * (fa + lit::<T>(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
) -> T {
    let two = lit::<T>(2.0);
    let m = (a + b) / two;
    let lm = (a + m) / two;
    let rm = (m + b) / two;
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= lit::<T>(15.0) * tol || (b - a).abs() < lit::<T>(1e-13) {
        return left + right + err / lit(15.0);
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / two, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / two, depth - 1)
}

/// Integral on `[a, b]` of a function with square-root behaviour at the
/// flagged endpoints.
///
/// Within `width` of a flagged endpoint the variable is changed to
/// `u = sqrt(|x - x_t|)`, which turns `sqrt(x - x_t)` into a smooth function
/// of `u`; the remainder is handled by plain adaptive Simpson.
pub fn integrate_turning<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    sing_a: bool,
    sing_b: bool,
    width: T,
    tol: T,
) -> T {
    if b <= a {
        return T::zero();
    }
    let span = b - a;
    let n_sing = usize::from(sing_a) + usize::from(sing_b);
    if n_sing == 0 {
        return adaptive_simpson(f, a, b, tol);
    }
    let d = width.min(span / from_usize::<T>(n_sing + 1));
    let third = tol / lit(3.0);
    let mut total = T::zero();
    let (mut lo, mut hi) = (a, b);
    if sing_a {
        let root = d.sqrt();
        let g = |u: T| {
            let u = u.max(root * lit(1e-3));
            f(a + u * u) * lit::<T>(2.0) * u
        };
        total += adaptive_simpson(&g, T::zero(), root, third);
        lo = a + d;
    }
    if sing_b {
        let root = d.sqrt();
        let g = |u: T| {
            let u = u.max(root * lit(1e-3));
            f(b - u * u) * lit::<T>(2.0) * u
        };
        total += adaptive_simpson(&g, T::zero(), root, third);
        hi = b - d;
    }
    total + adaptive_simpson(f, lo, hi, third)
}

/// Bisection for a sign change of `f` on `[a, b]`; returns `None` when the
/// endpoints do not bracket a root.
pub fn bisect<T: Real, F: Fn(T) -> T>(f: F, mut a: T, mut b: T, xtol: T) -> Option<T> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == T::zero() {
        return Some(a);
    }
    if fb == T::zero() {
        return Some(b);
    }
    if fa.is_sign_positive() == fb.is_sign_positive() {
        return None;
    }
    let two = lit::<T>(2.0);
    for _ in 0..200 {
        let m = (a + b) / two;
        if (b - a).abs() <= xtol || m == a || m == b {
            return Some(m);
        }
        let fm = f(m);
        if fm == T::zero() {
            return Some(m);
        }
        if fm.is_sign_positive() == fa.is_sign_positive() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some((a + b) / two)
}

/// Illinois false position on a bracketing interval; like [`bisect`] but
/// superlinear for smooth `f`.
pub fn illinois<T: Real, F: Fn(T) -> T>(f: F, mut a: T, mut b: T, xtol: T) -> Option<T> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == T::zero() {
        return Some(a);
    }
    if fb == T::zero() {
        return Some(b);
    }
    if fa.is_sign_positive() == fb.is_sign_positive() {
        return None;
    }
    let half = lit::<T>(0.5);
    let mut side = 0i8;
    let mut c = a;
    for _ in 0..200 {
        let prev = c;
        c = (a * fb - b * fa) / (fb - fa);
        if !(c > a.min(b) && c < a.max(b)) {
            c = (a + b) * half;
        }
        let fc = f(c);
        if fc == T::zero() || (c - prev).abs() <= xtol || (b - a).abs() <= xtol {
            return Some(c);
        }
        if fc.is_sign_positive() == fb.is_sign_positive() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= half;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= half;
            }
            side = 1;
        }
    }
    Some(c)
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub fn golden_min<T: Real, F: Fn(T) -> T>(f: F, mut a: T, mut b: T, xtol: T) -> (T, T) {
    let r = lit::<T>(0.618_033_988_749_894_9);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = (a + b) / lit(2.0);
    (x, f(x))
}

/// Centered difference with one Richardson extrapolation step.
pub fn derivative<T: Real, F: Fn(T) -> T>(f: F, x: T, h: T) -> T {
    let two = lit::<T>(2.0);
    let d1 = (f(x + h) - f(x - h)) / (two * h);
    let h2 = h / two;
    let d2 = (f(x + h2) - f(x - h2)) / (two * h2);
    (lit::<T>(4.0) * d2 - d1) / lit(3.0)
}

/// Ordinary least-squares line through `(xs, ys)`: returns `(slope, intercept)`.
pub fn linear_fit<T: Real>(xs: &[T], ys: &[T]) -> (T, T) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points");
    let n = from_usize::<T>(xs.len());
    let mx = xs.iter().fold(T::zero(), |s, &x| s + x) / n;
    let my = ys.iter().fold(T::zero(), |s, &y| s + y) / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `ln y` against `ln x`.
pub fn loglog_slope<T: Real>(xs: &[T], ys: &[T]) -> T {
    let lx: Vec<T> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<T> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// Pearson correlation coefficient.
pub fn correlation<T: Real>(xs: &[T], ys: &[T]) -> T {
    assert_eq!(xs.len(), ys.len());
    let n = from_usize::<T>(xs.len());
    let mx = xs.iter().fold(T::zero(), |s, &x| s + x) / n;
    let my = ys.iter().fold(T::zero(), |s, &y| s + y) / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn ranks<T: Real>(v: &[T]) -> Vec<T> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut r = vec![T::zero(); v.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut e = k + 1;
        while e < idx.len() && v[idx[e]] == v[idx[k]] {
            e += 1;
        }
        // ties share the mean rank
        let mean = from_usize::<T>(k + e - 1) / lit(2.0);
        for &i in &idx[k..e] {
            r[i] = mean;
        }
        k = e;
    }
    r
}

/// Spearman rank correlation.
pub fn rank_correlation<T: Real>(xs: &[T], ys: &[T]) -> T {
    correlation(&ranks(xs), &ranks(ys))
}

/// Natural cubic spline through equally spaced knots `x0, x0 + 1, ...`.
///
/// Outside the knot range the value is clamped to the end knots.
#[derive(Clone, Debug)]
pub struct CubicSpline<T: Real> {
    x0: T,
    y: Vec<T>,
    m: Vec<T>,
}

impl<T: Real> CubicSpline<T> {
    pub fn new(x0: T, y: Vec<T>) -> Self {
        let n = y.len();
        assert!(n >= 2, "spline needs two knots");
        let mut m = vec![T::zero(); n];
        if n > 2 {
            // second derivatives from the tridiagonal system m_{i-1} + 4 m_i + m_{i+1} = 6 Δ²y_i
            let k = n - 2;
            let mut c = vec![T::zero(); k];
            let mut d = vec![T::zero(); k];
            let four = lit::<T>(4.0);
            let six = lit::<T>(6.0);
            for i in 0..k {
                let rhs = six * (y[i + 2] - lit::<T>(2.0) * y[i + 1] + y[i]);
                let denom = if i == 0 { four } else { four - c[i - 1] };
                c[i] = T::one() / denom;
                d[i] = if i == 0 { rhs / denom } else { (rhs - d[i - 1]) / denom };
            }
            m[k] = d[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = d[i] - c[i] * m[i + 2];
            }
        }
        CubicSpline { x0, y, m }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn x_min(&self) -> T {
        self.x0
    }

    pub fn x_max(&self) -> T {
        self.x0 + from_usize::<T>(self.y.len() - 1)
    }

    fn locate(&self, x: T) -> (usize, T) {
        let n = self.y.len();
        let t = (x - self.x0).max(T::zero()).min(from_usize(n - 1));
        let mut i = t.floor().to_usize().unwrap_or(0);
        if i >= n - 1 {
            i = n - 2;
        }
        (i, t - from_usize(i))
    }

    pub fn value(&self, x: T) -> T {
        let (i, s) = self.locate(x);
        let six = lit::<T>(6.0);
        let a = T::one() - s;
        a * self.y[i]
            + s * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (s * s * s - s) * self.m[i + 1]) / six
    }

    pub fn slope(&self, x: T) -> T {
        if x < self.x_min() || x > self.x_max() {
            return T::zero();
        }
        let (i, s) = self.locate(x);
        let six = lit::<T>(6.0);
        let three = lit::<T>(3.0);
        let a = T::one() - s;
        self.y[i + 1] - self.y[i]
            + (-(three * a * a - T::one()) * self.m[i] + (three * s * s - T::one()) * self.m[i + 1])
                / six
    }
}
