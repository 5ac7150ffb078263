//! Quadrature, bracketing root finders and monotone envelopes.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

/// Default economic tolerance for equilibrium comparisons.
pub const ECON_TOL: f64 = 1e-7;

/// Maximum polynomial degree accepted by [`integrate_piecewise`].
pub const MAX_DEGREE: usize = 32;

const MIN_GL_ORDER: usize = 17;

/// Economic tolerance, overridable with `EPSW_ECON_TOL`.
pub fn econ_tol() -> f64 {
    std::env::var("EPSW_ECON_TOL")
        .ok()
        .and_then(|s| s.parse::<f64>().ok())
        .filter(|t| t.is_finite() && *t > 0.0)
        .unwrap_or(ECON_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs_tol: 1e-10, rel_tol: 1e-9, max_iter: 200 }
    }
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<Self> {
        if !(abs_tol > 0.0 && rel_tol > 0.0 && max_iter >= 1) {
            return Err(Error::Parameter(format!(
                "tolerance requires abs_tol > 0, rel_tol > 0, max_iter >= 1 (got {abs_tol}, {rel_tol}, {max_iter})"
            )));
        }
        Ok(Tolerance { abs_tol, rel_tol, max_iter })
    }

    pub fn tight() -> Self {
        Tolerance { abs_tol: 1e-14, rel_tol: 1e-14, max_iter: 200 }
    }

    pub fn with_abs(abs_tol: f64) -> Self {
        Tolerance { abs_tol, ..Tolerance::tight() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::Parameter(format!("invalid bracket [{lo}, {hi}]")));
        }
        Ok(Bracket { lo, hi })
    }

    pub fn unit() -> Self {
        Bracket { lo: 0.0, hi: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Dense polynomial, coefficients in ascending order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Polynomial { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial { coeffs: vec![c] }
    }

    pub fn monomial(c: f64, k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Polynomial { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| *c != 0.0)
            .unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::constant(0.0);
        }
        Polynomial {
            coeffs: self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| c * (i + 1) as f64)
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|i| self.coeffs.get(i).unwrap_or(&0.0) + other.coeffs.get(i).unwrap_or(&0.0))
            .collect();
        Polynomial { coeffs }
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Polynomial::constant(0.0);
        }
        let mut coeffs = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Polynomial { coeffs }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub poly: Polynomial,
}

impl Segment {
    pub fn new(lo: f64, hi: f64, poly: Polynomial) -> Self {
        Segment { lo, hi, poly }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> std::sync::Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, std::sync::Arc<(Vec<f64>, Vec<f64>)>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| std::sync::Arc::new(compute_gauss_legendre(n)))
        .clone()
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates `g` over [a, b] with an n-point Gauss-Legendre rule.
pub fn gl_integrate<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, g: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let rule = gauss_legendre(n.max(1));
    let (nodes, weights) = (&rule.0, &rule.1);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for (x, w) in nodes.iter().zip(weights.iter()) {
        s += w * g(mid + half * x);
    }
    s * half
}

/// Order used for integrands of the given polynomial degree.
pub fn gl_order(degree: usize) -> usize {
    MIN_GL_ORDER.max((degree + 2) / 2)
}

/// Sum of exact integrals over ordered, non-overlapping polynomial pieces.
pub fn integrate_piecewise(segments: &[Segment]) -> Result<f64> {
    let mut prev_hi = f64::NEG_INFINITY;
    let mut total = 0.0;
    for (i, s) in segments.iter().enumerate() {
        if !(s.lo.is_finite() && s.hi.is_finite()) || s.lo > s.hi {
            return Err(Error::Segments(format!("segment {i} has bad interval [{}, {}]", s.lo, s.hi)));
        }
        if s.lo < -1e-15 || s.hi > 1.0 + 1e-15 {
            return Err(Error::Segments(format!("segment {i} leaves [0, 1]")));
        }
        if s.lo < prev_hi {
            return Err(Error::Segments(format!("segment {i} overlaps or is out of order")));
        }
        let deg = s.poly.degree();
        if deg > MAX_DEGREE {
            return Err(Error::Segments(format!("segment {i} has degree {deg} > {MAX_DEGREE}")));
        }
        total += gl_integrate(s.lo, s.hi, gl_order(deg), |x| s.poly.eval(x));
        prev_hi = s.hi;
    }
    Ok(total)
}

/// Bisection for a monotone function on a bracket with a sign change.
pub fn bisect_root<F: FnMut(f64) -> f64>(mut f: F, b: Bracket, t: Tolerance) -> Result<f64> {
    let (mut lo, mut hi) = (b.lo, b.hi);
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    for _ in 0..t.max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo < t.abs_tol.max(t.rel_tol * mid.abs()) || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Err(Error::Convergence { iterations: t.max_iter, lo, hi })
}

/// Largest `x` in the bracket with `pred(x)` true, assuming `pred` holds on
/// an initial segment. Returns `lo` when `pred(lo)` fails.
pub fn bisect_sup<P: FnMut(f64) -> bool>(mut pred: P, b: Bracket, abs_tol: f64) -> f64 {
    if pred(b.hi) {
        return b.hi;
    }
    if !pred(b.lo) {
        return b.lo;
    }
    let (mut lo, mut hi) = (b.lo, b.hi);
    while hi - lo > abs_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `z[i] = min(ys[i..])`: the largest non-decreasing sequence below `ys`.
pub fn running_right_infimum(xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    if ys.is_empty() {
        return Err(Error::Segments("empty input".into()));
    }
    if xs.len() != ys.len() {
        return Err(Error::Segments(format!("length mismatch {} vs {}", xs.len(), ys.len())));
    }
    if xs.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Segments("abscissae must be strictly increasing".into()));
    }
    let mut z = ys.to_vec();
    for i in (0..z.len().saturating_sub(1)).rev() {
        if z[i + 1] < z[i] {
            z[i] = z[i + 1];
        }
    }
    Ok(z)
}

/// Golden-section search for a minimum of a unimodal function.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `n` equally spaced points on [0, 1].
pub fn unit_grid(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}
