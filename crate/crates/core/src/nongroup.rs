//! Non-group pay equity: one wage per firm, two or more firms.

use serde::{Deserialize, Serialize};

use crate::distributions::ProductivityDist;
use crate::error::{Error, Result};
use crate::market::{FirmBooks, Group, GroupBook, HiringPlan, Market, MultiMarket, Outcome};
use crate::numerics::{bisect_root, bisect_sup, Bracket, Tolerance};
use crate::wages::WageFunction;

const INNER_TOL: f64 = 1e-14;
const OUTER_TOL: f64 = 1e-13;

/// `int_a^b (v - a) f dv` for the pooled density.
pub fn interval_profit(f: &ProductivityDist, a: f64, b: f64) -> f64 {
    if b <= a {
        0.0
    } else {
        f.surplus(a, b, a)
    }
}

/// Surplus of the workers left unemployed below `w1`.
pub fn pi0(f: &ProductivityDist, w1: f64) -> f64 {
    f.partial_moment(1, 0.0, w1)
}

fn w2_pooled(f: &ProductivityDist, w1: f64) -> f64 {
    if w1 >= 1.0 {
        return 1.0;
    }
    let g = |w2: f64| interval_profit(f, w1, w2) - interval_profit(f, w2, 1.0);
    bisect_root(g, Bracket { lo: w1, hi: 1.0 }, Tolerance::with_abs(INNER_TOL)).unwrap_or(1.0)
}

/// Wage of firm 2 that equates both firms' profits given firm 1's `w1`.
pub fn w2_of_w1(m: &Market, w1: f64) -> Result<f64> {
    check_w1(w1)?;
    Ok(w2_pooled(&m.pooled(), w1))
}

fn check_w1(w1: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&w1) {
        return Err(Error::Parameter(format!("w1 = {w1} outside [0, 1]")));
    }
    Ok(())
}

fn pi1_pooled(f: &ProductivityDist, w1: f64) -> f64 {
    interval_profit(f, w1, w2_pooled(f, w1))
}

fn w1_star_pooled(f: &ProductivityDist) -> f64 {
    bisect_sup(|w1| pi1_pooled(f, w1) >= pi0(f, w1), Bracket::unit(), OUTER_TOL)
}

/// Largest low wage that can be part of a core outcome.
pub fn w1_star(m: &Market) -> f64 {
    w1_star_pooled(&m.pooled())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformWageCore {
    pub w1: f64,
    pub w2: f64,
    pub w1_star: f64,
    /// Per-firm profit per unit of total worker measure.
    pub profit: f64,
    /// Per-firm profit in absolute units (`(1 + beta) * profit`).
    pub profit_abs: f64,
    pub unemployed_measure: f64,
    pub aw_a: f64,
    pub aw_b: f64,
    pub gap: f64,
}

impl UniformWageCore {
    pub fn outcome(&self) -> Outcome {
        uniform_wage_outcome(self.w1, self.w2)
    }
}

/// Firm 1 hires `[w1, w2)` at `w1`, firm 2 hires `[w2, 1]` at `w2`, both groups.
pub fn uniform_wage_outcome(w1: f64, w2: f64) -> Outcome {
    let book = |lo: f64, hi: f64, w: f64| {
        if hi > lo {
            GroupBook::new(HiringPlan::on(lo, hi), WageFunction::constant(w))
        } else {
            GroupBook::empty()
        }
    };
    Outcome::new(
        FirmBooks { a: book(w1, w2, w1), b: book(w1, w2, w1) },
        FirmBooks { a: book(w2, 1.0, w2), b: book(w2, 1.0, w2) },
    )
}

fn summarize(m: &Market, f: &ProductivityDist, w1: f64, w2: f64, star: f64) -> UniformWageCore {
    let profit = interval_profit(f, w1, w2);
    let aw = |g: Group| {
        let d = m.dist(g);
        w1 * (d.cdf(w2) - d.cdf(w1)) + w2 * (1.0 - d.cdf(w2))
    };
    let (aw_a, aw_b) = (aw(Group::A), aw(Group::B));
    UniformWageCore {
        w1,
        w2,
        w1_star: star,
        profit,
        profit_abs: (1.0 + m.beta()) * profit,
        unemployed_measure: f.cdf(w1) * (1.0 + m.beta()),
        aw_a,
        aw_b,
        gap: aw_a - aw_b,
    }
}

/// The core outcome with low wage `w1`.
pub fn nongroup_core(m: &Market, w1: f64) -> Result<UniformWageCore> {
    check_w1(w1)?;
    let f = m.pooled();
    let star = w1_star_pooled(&f);
    if w1 > star + OUTER_TOL {
        let w2 = w2_pooled(&f, w1);
        return Err(Error::NotCore(format!(
            "w1 = {w1} exceeds w1* = {star:.12}: hiring the unemployed workers below w1 at wage 0 \
             earns {:.12} > {:.12}, the profit at wages ({w1}, {w2:.12})",
            pi0(&f, w1),
            interval_profit(&f, w1, w2)
        )));
    }
    Ok(summarize(m, &f, w1, w2_pooled(&f, w1), star))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NongroupVerdict {
    pub w1: f64,
    pub w2: f64,
    pub ordered: bool,
    pub equal_profit_residual: f64,
    pub pi1: f64,
    pub pi0: f64,
    pub is_core: bool,
    /// Decisive margin in absolute profit units.
    pub margin: f64,
}

/// Checks a pair of firm wages against the uniform-wage core conditions.
pub fn verify_nongroup_core(m: &Market, w1: f64, w2: f64, tol: f64) -> Result<NongroupVerdict> {
    check_w1(w1)?;
    check_w1(w2)?;
    let f = m.pooled();
    let scale = 1.0 + m.beta();
    let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
    let p1 = interval_profit(&f, lo, hi) * scale;
    let p2 = interval_profit(&f, hi, 1.0) * scale;
    let p0 = pi0(&f, lo) * scale;
    let ordered = w1 < w2;
    let residual = p1 - p2;
    let rent = p1 - p0;
    let is_core = ordered && residual.abs() <= tol && rent >= -tol;
    let margin = if is_core {
        rent.max(0.0)
    } else {
        let mut worst = 0.0f64;
        if residual.abs() > tol {
            worst = worst.max(residual.abs());
        }
        if rent < -tol {
            worst = worst.max(-rent);
        }
        if !ordered {
            worst = worst.max(p1.max(p2));
        }
        worst
    };
    Ok(NongroupVerdict { w1, w2, ordered, equal_profit_residual: residual, pi1: p1, pi0: p0, is_core, margin })
}

/// `n` points of the core family, `w1` evenly spaced on `[0, w1*]`.
pub fn nongroup_sweep(m: &Market, points: usize) -> Result<Vec<UniformWageCore>> {
    if points < 2 {
        return Err(Error::Parameter("sweep needs at least 2 points".into()));
    }
    let f = m.pooled();
    let star = w1_star_pooled(&f);
    Ok((0..points)
        .map(|k| {
            let w1 = star * k as f64 / (points - 1) as f64;
            summarize(m, &f, w1, w2_pooled(&f, w1), star)
        })
        .collect())
}

/// Largest `w` with `interval_profit(prev, w) <= p`.
fn step(f: &ProductivityDist, prev: f64, p: f64) -> f64 {
    bisect_sup(|w| interval_profit(f, prev, w) <= p, Bracket { lo: prev, hi: 1.0 }, INNER_TOL)
}

fn eta_from(f: &ProductivityDist, start: f64, steps: usize, p: f64) -> (f64, Vec<f64>) {
    let mut wages = Vec::with_capacity(steps + 1);
    let mut w = start;
    wages.push(w);
    for _ in 0..steps {
        w = step(f, w, p);
        wages.push(w);
    }
    (interval_profit(f, w, 1.0), wages)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaEval {
    pub eta: f64,
    /// `w^p_1, ..., w^p_n`.
    pub wages: Vec<f64>,
}

/// Residual profit left for firm `n` when every lower interval earns `p`.
pub fn multifirm_eta(mm: &MultiMarket, p: f64) -> Result<EtaEval> {
    if !(p >= 0.0) {
        return Err(Error::Parameter(format!("p = {p} must be non-negative")));
    }
    let f = mm.pooled();
    let (eta, wages) = eta_from(&f, 0.0, mm.n_firms(), p);
    Ok(EtaEval { eta, wages: wages[1..].to_vec() })
}

fn p_star(f: &ProductivityDist, n: usize) -> Result<(f64, Vec<f64>)> {
    let top = f.mean();
    let p = bisect_root(
        |p| eta_from(f, 0.0, n, p).0 - p,
        Bracket { lo: 0.0, hi: top },
        Tolerance::with_abs(1e-15),
    )?;
    let (_, wages) = eta_from(f, 0.0, n, p);
    Ok((p, wages[1..].to_vec()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiFirmCore {
    pub wages: Vec<f64>,
    pub p: f64,
    pub w1_star: f64,
    pub p_star: f64,
    /// Threshold wages `w^{p*}_1..n` at the fixed point.
    pub p_star_wages: Vec<f64>,
}

/// Core of the n-firm market in which the lowest wage is `w1`.
pub fn multifirm_core(mm: &MultiMarket, w1: f64) -> Result<MultiFirmCore> {
    check_w1(w1)?;
    let f = mm.pooled();
    let n = mm.n_firms();
    let (ps, ps_wages) = p_star(&f, n)?;
    let star = ps_wages[0];
    if w1 > star + OUTER_TOL {
        return Err(Error::NotCore(format!(
            "w1 = {w1} exceeds w1* = {star:.12}: the workers below w1 are worth more unemployed-hired \
             at wage 0 than the fixed-point profit {ps:.12}"
        )));
    }
    let top = interval_profit(&f, w1, 1.0);
    let p = bisect_root(
        |p| eta_from(&f, w1, n - 1, p).0 - p,
        Bracket { lo: 0.0, hi: top },
        Tolerance::with_abs(1e-15),
    )?;
    let (_, wages) = eta_from(&f, w1, n - 1, p);
    Ok(MultiFirmCore { wages, p, w1_star: star, p_star: ps, p_star_wages: ps_wages })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnythingGoes {
    pub eps: f64,
    pub beta: f64,
    pub core_o: UniformWageCore,
    pub core_o_prime: UniformWageCore,
    pub benchmark_gap: f64,
}

/// Mirrored step densities: A mass concentrated on the upper half, B on the lower.
pub fn step_market(eps: f64, beta: f64) -> Result<Market> {
    let fa = ProductivityDist::step(&[0.5], &[2.0 * eps, 2.0 * (1.0 - eps)])?;
    let fb = ProductivityDist::step(&[0.5], &[2.0 * (1.0 - eps), 2.0 * eps])?;
    Market::new(beta, fa, fb)
}

/// Group size used for the step scenario: twice the smallest size at which
/// the low wage 1/2 is still supportable.
pub fn step_scenario_beta(eps: f64) -> f64 {
    2.0 * (4.0 - 5.0 * eps) / (1.0 - 5.0 * eps)
}

/// Two core outcomes of one market whose gaps straddle the no-EPSW gap.
pub fn anything_goes_scenarios(eps: f64) -> Result<AnythingGoes> {
    if !(eps > 0.0 && eps < 0.1) {
        return Err(Error::Parameter(format!(
            "eps = {eps}: the step scenario needs 0 < eps < 1/10 (the high-wage core exists if and only if eps < 1/10)"
        )));
    }
    let beta = step_scenario_beta(eps);
    let m = step_market(eps, beta)?;
    let core_o = nongroup_core(&m, 0.5)?;
    let core_o_prime = nongroup_core(&m, 0.0)?;
    Ok(AnythingGoes { eps, beta, core_o, core_o_prime, benchmark_gap: m.mean_gap() })
}

/// Identical step densities for both groups with almost all mass above
/// `1 - eps/2` (`F(1 - eps/2) = eps^2/4`). One admissible construction of a
/// market where the low wage can sit near the top.
pub fn tail_heavy_market(eps: f64, beta: f64) -> Result<Market> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("eps = {eps} outside (0, 1)")));
    }
    let cut = 1.0 - eps / 2.0;
    let low_mass = eps * eps / 4.0;
    let d = ProductivityDist::step(&[cut], &[low_mass / cut, (1.0 - low_mass) / (1.0 - cut)])?;
    Market::new(beta, d.clone(), d)
}
