//! Piecewise-polynomial productivity densities on [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{gl_integrate, gl_order, Polynomial, Segment, MAX_DEGREE};

const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityPiece {
    pub lo: f64,
    pub hi: f64,
    pub poly: Polynomial,
}

/// A density on [0, 1] that is polynomial between breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductivityDist {
    pieces: Vec<DensityPiece>,
    cdf_at: Vec<f64>,
    f_lower: f64,
    f_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub strictly_positive: bool,
    pub f_lower: f64,
    pub f_upper: f64,
    pub warnings: Vec<String>,
}

impl ProductivityDist {
    /// Builds a density from consecutive pieces covering [0, 1].
    pub fn from_pieces(pieces: Vec<DensityPiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Density("no pieces".into()));
        }
        if pieces[0].lo != 0.0 || pieces[pieces.len() - 1].hi != 1.0 {
            return Err(Error::Density("pieces must start at 0 and end at 1".into()));
        }
        for (i, p) in pieces.iter().enumerate() {
            if !(p.lo < p.hi) {
                return Err(Error::Density(format!("piece {i} is empty or reversed")));
            }
            if i > 0 && pieces[i - 1].hi != p.lo {
                return Err(Error::Density(format!("gap or overlap before piece {i}")));
            }
            if p.poly.degree() > MAX_DEGREE - 2 {
                return Err(Error::Density(format!("piece {i} degree exceeds {}", MAX_DEGREE - 2)));
            }
            if p.poly.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::Density(format!("piece {i} has non-finite coefficients")));
            }
        }
        let mut cdf_at = Vec::with_capacity(pieces.len() + 1);
        let mut acc = 0.0;
        cdf_at.push(0.0);
        for p in &pieces {
            acc += gl_integrate(p.lo, p.hi, gl_order(p.poly.degree()), |x| p.poly.eval(x));
            cdf_at.push(acc);
        }
        if (acc - 1.0).abs() > NORM_TOL {
            return Err(Error::Normalization { deficit: 1.0 - acc });
        }
        let (f_lower, f_upper) = bounds(&pieces);
        if f_lower < -1e-12 {
            return Err(Error::Density(format!("density is negative (infimum {f_lower})")));
        }
        Ok(ProductivityDist { pieces, cdf_at, f_lower: f_lower.max(0.0), f_upper })
    }

    pub fn uniform() -> Self {
        Self::from_pieces(vec![DensityPiece { lo: 0.0, hi: 1.0, poly: Polynomial::constant(1.0) }])
            .expect("uniform density is valid")
    }

    /// Density `k v^(k-1)`, CDF `v^k`.
    pub fn power(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("power distribution needs k >= 1".into()));
        }
        if k as usize > MAX_DEGREE - 1 {
            return Err(Error::Parameter(format!("power k={k} exceeds supported degree")));
        }
        let poly = Polynomial::monomial(k as f64, k as usize - 1);
        Self::from_pieces(vec![DensityPiece { lo: 0.0, hi: 1.0, poly }])
    }

    /// Piecewise-constant density; `levels.len() == breaks.len() + 1`.
    pub fn step(breaks: &[f64], levels: &[f64]) -> Result<Self> {
        if levels.len() != breaks.len() + 1 {
            return Err(Error::Density(format!(
                "{} breaks need {} levels, got {}",
                breaks.len(),
                breaks.len() + 1,
                levels.len()
            )));
        }
        if levels.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::Density("levels must be finite and non-negative".into()));
        }
        let mut edges = vec![0.0];
        for b in breaks {
            if !(*b > 0.0 && *b < 1.0) || *b <= *edges.last().unwrap() {
                return Err(Error::Density("breaks must be strictly increasing inside (0, 1)".into()));
            }
            edges.push(*b);
        }
        edges.push(1.0);
        let pieces = edges
            .windows(2)
            .zip(levels)
            .map(|(e, l)| DensityPiece { lo: e[0], hi: e[1], poly: Polynomial::constant(*l) })
            .collect();
        Self::from_pieces(pieces)
    }

    /// Convex combination `sum w_k F_k`; weights must sum to one.
    pub fn mixture(parts: &[(f64, &ProductivityDist)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if parts.is_empty() || (total - 1.0).abs() > 1e-10 || parts.iter().any(|(w, _)| *w < 0.0) {
            return Err(Error::Density("mixture weights must be non-negative and sum to 1".into()));
        }
        let mut edges: Vec<f64> = parts
            .iter()
            .flat_map(|(_, d)| d.pieces.iter().map(|p| p.lo))
            .chain(std::iter::once(1.0))
            .collect();
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup();
        let pieces = edges
            .windows(2)
            .map(|e| {
                let mid = 0.5 * (e[0] + e[1]);
                let poly = parts.iter().fold(Polynomial::constant(0.0), |acc, (w, d)| {
                    acc.add(&d.pieces[d.piece_index(mid)].poly.scale(*w))
                });
                DensityPiece { lo: e[0], hi: e[1], poly }
            })
            .collect();
        Self::from_pieces(pieces)
    }

    pub fn pieces(&self) -> &[DensityPiece] {
        &self.pieces
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.lo).chain(std::iter::once(1.0)).collect()
    }

    pub fn f_lower(&self) -> f64 {
        self.f_lower
    }

    pub fn f_upper(&self) -> f64 {
        self.f_upper
    }

    pub fn max_degree(&self) -> usize {
        self.pieces.iter().map(|p| p.poly.degree()).max().unwrap_or(0)
    }

    fn piece_index(&self, v: f64) -> usize {
        let i = self.pieces.partition_point(|p| p.hi <= v);
        i.min(self.pieces.len() - 1)
    }

    /// Density at `v` (right-continuous at breakpoints, 0 outside [0, 1]).
    pub fn density(&self, v: f64) -> f64 {
        if !(0.0..=1.0).contains(&v) {
            return 0.0;
        }
        self.pieces[self.piece_index(v)].poly.eval(v)
    }

    pub fn cdf(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        if v >= 1.0 {
            return 1.0;
        }
        let i = self.piece_index(v);
        let p = &self.pieces[i];
        let partial = gl_integrate(p.lo, v, gl_order(p.poly.degree()), |x| p.poly.eval(x));
        (self.cdf_at[i] + partial).clamp(0.0, 1.0)
    }

    /// `int_a^b g(v) f(v) dv`, where `g` is polynomial of degree at most
    /// `g_degree` between consecutive entries of `g_breaks`.
    pub fn integrate_with<G: Fn(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        g_breaks: &[f64],
        g_degree: usize,
        g: G,
    ) -> f64 {
        let a = a.max(0.0);
        let b = b.min(1.0);
        if b <= a {
            return 0.0;
        }
        let mut cuts: Vec<f64> = self
            .pieces
            .iter()
            .map(|p| p.lo)
            .chain(g_breaks.iter().copied())
            .filter(|x| *x > a && *x < b)
            .collect();
        cuts.push(a);
        cuts.push(b);
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                continue;
            }
            let p = &self.pieces[self.piece_index(0.5 * (lo + hi))];
            let n = gl_order(p.poly.degree() + g_degree);
            total += gl_integrate(lo, hi, n, |x| g(x) * p.poly.eval(x));
        }
        total
    }

    /// `int_a^b v^k f(v) dv`.
    pub fn partial_moment(&self, k: usize, a: f64, b: f64) -> f64 {
        self.integrate_with(a, b, &[], k, |x| x.powi(k as i32))
    }

    /// `int_a^b (v - c) f(v) dv`.
    pub fn surplus(&self, a: f64, b: f64, c: f64) -> f64 {
        self.integrate_with(a, b, &[], 1, |x| x - c)
    }

    pub fn moment(&self, order: usize) -> f64 {
        self.partial_moment(order, 0.0, 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn as_segments(&self) -> Vec<Segment> {
        self.pieces
            .iter()
            .map(|p| Segment::new(p.lo, p.hi, p.poly.clone()))
            .collect()
    }

    pub fn regularity(&self) -> RegularityReport {
        let strictly_positive = self.f_lower > 0.0;
        let mut warnings = Vec::new();
        if !strictly_positive {
            warnings.push(format!(
                "density infimum is {:.3e}: the positive-lower-bound assumption fails; results are \
                 reported for this density as given and are expected to be stable under a small \
                 perturbation that restores positivity",
                self.f_lower
            ));
        }
        RegularityReport { strictly_positive, f_lower: self.f_lower, f_upper: self.f_upper, warnings }
    }

    /// Like [`regularity`](Self::regularity) but fails when the density touches zero.
    pub fn require_regular(&self) -> Result<RegularityReport> {
        let r = self.regularity();
        if !r.strictly_positive {
            return Err(Error::Regularity(r.warnings.join("; ")));
        }
        Ok(r)
    }
}

fn bounds(pieces: &[DensityPiece]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in pieces {
        for x in critical_points(&p.poly, p.lo, p.hi) {
            let y = p.poly.eval(x);
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    (lo, hi)
}

/// Endpoints plus roots of the derivative inside [lo, hi].
fn critical_points(p: &Polynomial, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = vec![lo, hi];
    if p.degree() < 2 {
        return out;
    }
    let d = p.derivative();
    const N: usize = 512;
    let xs: Vec<f64> = (0..=N).map(|k| lo + (hi - lo) * k as f64 / N as f64).collect();
    for w in xs.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (mut fa, fb) = (d.eval(a), d.eval(b));
        if fa == 0.0 {
            out.push(a);
            continue;
        }
        if fa.signum() == fb.signum() {
            continue;
        }
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            let fm = d.eval(m);
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_basics() {
        let u = ProductivityDist::uniform();
        assert!((u.cdf(0.5) - 0.5).abs() < 1e-15);
        assert!((u.mean() - 0.5).abs() < 1e-15);
        assert_eq!(u.f_lower(), 1.0);
        assert_eq!(u.f_upper(), 1.0);
    }

    #[test]
    fn power_five() {
        let p = ProductivityDist::power(5).unwrap();
        assert!((p.cdf(1.0) - 1.0).abs() < 1e-15);
        assert!((p.cdf(0.5) - 0.5f64.powi(5)).abs() < 1e-15);
        assert!((p.mean() - 5.0 / 6.0).abs() < 1e-14);
        assert_eq!(p.f_lower(), 0.0);
        assert!(ProductivityDist::power(0).is_err());
        assert_eq!(ProductivityDist::power(1).unwrap(), ProductivityDist::uniform());
    }

    #[test]
    fn steps() {
        let e = 0.05;
        let s = ProductivityDist::step(&[0.5], &[2.0 * e, 2.0 * (1.0 - e)]).unwrap();
        assert!((s.mean() - 0.725).abs() < 1e-14);
        let m = ProductivityDist::step(&[0.5], &[2.0 * (1.0 - e), 2.0 * e]).unwrap();
        assert!((m.mean() - 0.275).abs() < 1e-14);
        let u = ProductivityDist::step(&[0.5], &[1.0, 1.0]).unwrap();
        assert!((u.cdf(0.3) - 0.3).abs() < 1e-15);
        match ProductivityDist::step(&[0.5], &[1.0, 1.2]) {
            Err(Error::Normalization { deficit }) => assert!((deficit + 0.1).abs() < 1e-12),
            r => panic!("unexpected {r:?}"),
        }
        let r = ProductivityDist::step(&[0.5], &[0.4, 1.6]).unwrap().regularity();
        assert_eq!(r.f_lower, 0.4);
        assert!(r.strictly_positive);
    }

    #[test]
    fn pooled_density() {
        let a = ProductivityDist::uniform();
        let b = ProductivityDist::power(5).unwrap();
        let f = ProductivityDist::mixture(&[(0.8, &a), (0.2, &b)]).unwrap();
        for v in [0.0, 0.3, 0.77, 1.0] {
            assert!((f.density(v) - (0.8 + v.powi(4))).abs() < 1e-14);
        }
        assert!((f.cdf(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn regularity_warns_for_vanishing_density() {
        let r = ProductivityDist::power(5).unwrap().regularity();
        assert!(!r.strictly_positive);
        assert!(!r.warnings.is_empty());
        assert!(ProductivityDist::power(5).unwrap().require_regular().is_err());
    }

    #[test]
    fn interior_extremum_found() {
        // 6v(1-v) peaks at 1.5 in the middle
        let p = Polynomial::new(vec![0.0, 6.0, -6.0]);
        let d = ProductivityDist::from_pieces(vec![DensityPiece { lo: 0.0, hi: 1.0, poly: p }]).unwrap();
        assert!((d.f_upper() - 1.5).abs() < 1e-12);
        assert_eq!(d.f_lower(), 0.0);
    }
}
