//! Group-based pay equity: desegregation slack, the phi curve, existence,
//! verification, the delta family and the beta threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::ProductivityDist;
use crate::error::{Error, Result};
use crate::market::{Group, GroupBook, HiringPlan, Market, Outcome};
use crate::numerics::{bisect_root, bisect_sup, golden_min, running_right_infimum, unit_grid, Bracket, Tolerance};
use crate::wages::{IrWitness, WageFunction};

pub const DEFAULT_GRID: usize = 2049;
pub const MIN_GRID: usize = 33;
const RESOLUTION_TOL: f64 = 1e-5;
const ONE_MINUS: f64 = 1.0 - 1e-9;
const ROOT_TOL: f64 = 1e-14;

/// Firm 2's profit from hiring all of B at `w2`.
pub fn firm2_profit(m: &Market, w2: &WageFunction) -> f64 {
    GroupBook::new(HiringPlan::all(), w2.clone()).integrate(m.dist_b(), |v, w| v - w)
}

/// Firm 1's profit from hiring all of A at `w1`.
pub fn firm1_profit(m: &Market, w1: &WageFunction) -> f64 {
    m.beta() * GroupBook::new(HiringPlan::all(), w1.clone()).integrate(m.dist_a(), |v, w| v - w)
}

/// `int_eps^upper (v - eps) f dv`, zero when `upper <= eps`.
fn tail_surplus(d: &ProductivityDist, eps: f64, upper: f64) -> f64 {
    if upper <= eps {
        0.0
    } else {
        d.surplus(eps, upper, eps).max(0.0)
    }
}

/// B-side gain of a desegregating wage `eps`.
pub fn b_term(m: &Market, w2: &WageFunction, eps: f64) -> f64 {
    tail_surplus(m.dist_b(), eps, w2.generalized_inverse(eps))
}

/// A-side gain of hiring A workers in `[eps, upper]` at wage `eps`.
pub fn a_term(m: &Market, eps: f64, upper: f64) -> f64 {
    m.beta() * tail_surplus(m.dist_a(), eps, upper)
}

/// Slack of the no-desegregation condition at `eps` (negative means a
/// profitable desegregating deviation exists).
pub fn ndc_slack(m: &Market, w1: &WageFunction, w2: &WageFunction, eps: f64) -> f64 {
    ndc_slack_with(m, w1, w2, firm2_profit(m, w2), eps)
}

fn ndc_slack_with(m: &Market, w1: &WageFunction, w2: &WageFunction, pi2: f64, eps: f64) -> f64 {
    pi2 - a_term(m, eps, w1.generalized_inverse(eps)) - b_term(m, w2, eps)
}

struct PhiProblem<'a> {
    m: &'a Market,
    w2: &'a WageFunction,
    pi2: f64,
}

impl PhiProblem<'_> {
    fn budget(&self, eps: f64) -> f64 {
        (self.pi2 - b_term(self.m, self.w2, eps)).max(0.0)
    }

    fn phi(&self, eps: f64) -> f64 {
        let eps = eps.clamp(0.0, 1.0);
        let budget = self.budget(eps);
        let d = self.m.dist_a();
        let beta = self.m.beta();
        bisect_sup(
            |vt| beta * tail_surplus(d, eps, vt) <= budget,
            Bracket { lo: eps, hi: 1.0 },
            ROOT_TOL,
        )
    }
}

/// Largest productivity firm 1 can attract at wage `eps` without the
/// deviation beating firm 2's current profit.
pub fn phi(m: &Market, w2: &WageFunction, eps: f64) -> f64 {
    PhiProblem { m, w2, pi2: firm2_profit(m, w2) }.phi(eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatStretch {
    pub left: f64,
    pub right: f64,
    pub level: f64,
}

/// Sampled phi with its monotone minorant and derived statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiCurve {
    pub eps_grid: Vec<f64>,
    pub phi: Vec<f64>,
    pub w1hat_inv: Vec<f64>,
    /// NDC slack of `(w1hat, w2)` at each grid point.
    pub ndc_slack: Vec<f64>,
    pub e_cap: f64,
    pub pi2: f64,
    pub pi1_hat: f64,
    pub eps_star: Option<f64>,
    pub flat_stretches: Vec<FlatStretch>,
    pub w1hat: WageFunction,
    pub beta: f64,
}

impl PhiCurve {
    pub fn len(&self) -> usize {
        self.eps_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps_grid.is_empty()
    }

    /// `beta int_0^x (v - w1hat(v)) f_A dv`.
    pub fn pi1_up_to(&self, m: &Market, x: f64) -> f64 {
        let w = &self.w1hat;
        m.beta() * m.dist_a().integrate_with(0.0, x, &w.breakpoints(), 1, |v| v - w.at(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiOptions {
    pub grid: usize,
    pub check_resolution: bool,
    pub parallel: bool,
}

impl Default for PhiOptions {
    fn default() -> Self {
        PhiOptions { grid: DEFAULT_GRID, check_resolution: true, parallel: true }
    }
}

impl PhiOptions {
    pub fn with_grid(grid: usize) -> Self {
        PhiOptions { grid, ..Default::default() }
    }
}

pub fn build_phi_curve(m: &Market, w2: &WageFunction, grid_size: usize) -> Result<PhiCurve> {
    build_phi_curve_with(m, w2, PhiOptions::with_grid(grid_size))
}

pub fn build_phi_curve_with(m: &Market, w2: &WageFunction, opts: PhiOptions) -> Result<PhiCurve> {
    if opts.grid < MIN_GRID {
        return Err(Error::Parameter(format!("grid size must be at least {MIN_GRID}, got {}", opts.grid)));
    }
    let prob = PhiProblem { m, w2, pi2: firm2_profit(m, w2) };
    let eps = unit_grid(opts.grid);
    let phis = sample_phi(&prob, &eps, opts.parallel);
    let curve = assemble(&prob, eps, phis, opts.parallel)?;
    if !opts.check_resolution {
        return Ok(curve);
    }
    let coarse = if (opts.grid - 1) % 2 == 0 {
        let e: Vec<f64> = curve.eps_grid.iter().step_by(2).copied().collect();
        let p: Vec<f64> = curve.phi.iter().step_by(2).copied().collect();
        assemble(&prob, e, p, opts.parallel)?
    } else {
        let e = unit_grid(opts.grid / 2 + 1);
        let p = sample_phi(&prob, &e, opts.parallel);
        assemble(&prob, e, p, opts.parallel)?
    };
    if (curve.pi1_hat - coarse.pi1_hat).abs() <= RESOLUTION_TOL {
        return Ok(curve);
    }
    let n2 = 2 * opts.grid - 1;
    let e2 = unit_grid(n2);
    let mids: Vec<f64> = e2.iter().skip(1).step_by(2).copied().collect();
    let phi_mid = sample_phi(&prob, &mids, opts.parallel);
    let mut p2 = Vec::with_capacity(n2);
    for (k, p) in curve.phi.iter().enumerate() {
        p2.push(*p);
        if k < phi_mid.len() {
            p2.push(phi_mid[k]);
        }
    }
    let fine = assemble(&prob, e2, p2, opts.parallel)?;
    let shift = (fine.pi1_hat - curve.pi1_hat).abs();
    if shift > RESOLUTION_TOL {
        return Err(Error::Resolution(format!(
            "pi1_hat moved by {shift:.3e} between {} and {n2} grid points; try a grid larger than {n2}",
            opts.grid
        )));
    }
    Ok(fine)
}

fn sample_phi(prob: &PhiProblem<'_>, eps: &[f64], parallel: bool) -> Vec<f64> {
    if parallel {
        eps.par_iter().map(|e| prob.phi(*e)).collect()
    } else {
        eps.iter().map(|e| prob.phi(*e)).collect()
    }
}

/// Per-cell bound on the interpolation error of the profit integral below
/// which a cell is left alone.
const REFINE_TOL: f64 = 1e-10;
const REFINE_DEPTH: usize = 40;

/// Adds sample points inside cells where the linear interpolant of phi is
/// poor (square-root onsets, kinks, jumps). Returns the merged samples and
/// the positions of the original points in them.
fn refine(prob: &PhiProblem<'_>, eps: &[f64], phi: &[f64], parallel: bool) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let n = eps.len();
    let scale = prob.m.beta() * prob.m.dist_a().f_upper().max(1.0);
    let second = |k: usize| -> f64 {
        if k == 0 || k + 1 >= n {
            0.0
        } else {
            (phi[k - 1] - 2.0 * phi[k] + phi[k + 1]).abs()
        }
    };
    let flagged: Vec<usize> = (0..n - 1)
        .filter(|&k| second(k).max(second(k + 1)) * (eps[k + 1] - eps[k]) * scale / 8.0 > REFINE_TOL)
        .collect();
    let split = |k: usize| -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![(eps[k], phi[k], eps[k + 1], phi[k + 1], 0usize)];
        while let Some((lo, plo, hi, phi_hi, depth)) = stack.pop() {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                continue;
            }
            let pm = prob.phi(mid);
            out.push((mid, pm));
            let dev = (pm - 0.5 * (plo + phi_hi)).abs();
            if depth < REFINE_DEPTH && dev * (hi - lo) * scale > REFINE_TOL {
                stack.push((lo, plo, mid, pm, depth + 1));
                stack.push((mid, pm, hi, phi_hi, depth + 1));
            }
        }
        out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        out
    };
    let extra: Vec<Vec<(f64, f64)>> = if parallel {
        flagged.par_iter().map(|&k| split(k)).collect()
    } else {
        flagged.iter().map(|&k| split(k)).collect()
    };
    // (eps, phi, index in the caller's grid)
    let mut pts: Vec<(f64, f64, Option<usize>)> = Vec::with_capacity(n + extra.iter().map(Vec::len).sum::<usize>());
    let mut f = 0;
    for k in 0..n {
        pts.push((eps[k], phi[k], Some(k)));
        if f < flagged.len() && flagged[f] == k {
            pts.extend(extra[f].iter().map(|&(e, p)| (e, p, None)));
            f += 1;
        }
    }

    // The envelope is set by the minima of phi; pin down sampled dips exactly.
    let dips: Vec<usize> = (1..pts.len().saturating_sub(1))
        .filter(|&i| pts[i].1 <= pts[i - 1].1 && pts[i].1 <= pts[i + 1].1 && pts[i].1 < ONE_MINUS)
        .collect();
    let polish = |i: usize| -> Option<(f64, f64, Option<usize>)> {
        let (x, fx) = golden_min(|e| prob.phi(e), pts[i - 1].0, pts[i + 1].0, 80);
        (fx < pts[i].1 && x != pts[i].0).then_some((x, fx, None))
    };
    let found: Vec<Option<(f64, f64, Option<usize>)>> =
        if parallel { dips.par_iter().map(|&i| polish(i)).collect() } else { dips.iter().map(|&i| polish(i)).collect() };
    if found.iter().any(Option::is_some) {
        pts.extend(found.into_iter().flatten());
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pts.dedup_by(|a, b| a.0 == b.0 && a.2.is_none());
    }

    let mut idx = vec![0; n];
    for (i, p) in pts.iter().enumerate() {
        if let Some(k) = p.2 {
            idx[k] = i;
        }
    }
    (pts.iter().map(|p| p.0).collect(), pts.iter().map(|p| p.1).collect(), idx)
}

fn assemble(prob: &PhiProblem<'_>, grid: Vec<f64>, grid_phi: Vec<f64>, parallel: bool) -> Result<PhiCurve> {
    let m = prob.m;
    let (eps, phi, idx) = refine(prob, &grid, &grid_phi, parallel);
    let inv = running_right_infimum(&eps, &phi)?;
    let n = eps.len();

    let e_cap = match phi.iter().rposition(|p| *p < ONE_MINUS) {
        None => 0.0,
        Some(j) if j + 1 >= n => 1.0,
        Some(j) => bisect_sup(|e| prob.phi(e) < ONE_MINUS, Bracket { lo: eps[j], hi: eps[j + 1] }, ROOT_TOL),
    };

    let mut flat_stretches = Vec::new();
    let mut k = 0;
    while k < n {
        let mut r = k;
        while r + 1 < n && inv[r + 1] == inv[k] {
            r += 1;
        }
        let level = inv[k];
        if r > k && level < ONE_MINUS && phi[k..=r].iter().any(|p| *p > level) {
            let left = if k == 0 {
                0.0
            } else {
                bisect_sup(|e| prob.phi(e) < level, Bracket { lo: eps[k - 1], hi: eps[k] }, ROOT_TOL)
            };
            flat_stretches.push(FlatStretch { left, right: eps[r], level });
        }
        k = r + 1;
    }
    let eps_star = flat_stretches.first().map(|s| s.left);

    let w1hat = w1hat_from_inverse(&eps, &inv)?;
    let pi1_hat = firm1_profit(m, &w1hat);
    let beta = m.beta();
    let grid_inv: Vec<f64> = idx.iter().map(|&i| inv[i]).collect();
    let ndc_slack = grid
        .iter()
        .zip(&grid_inv)
        .map(|(e, up)| prob.pi2 - beta * tail_surplus(m.dist_a(), *e, *up) - b_term(m, prob.w2, *e))
        .collect();

    Ok(PhiCurve {
        eps_grid: grid,
        phi: grid_phi,
        w1hat_inv: grid_inv,
        ndc_slack,
        e_cap,
        pi2: prob.pi2,
        pi1_hat,
        eps_star,
        flat_stretches,
        w1hat,
        beta,
    })
}

/// Wage whose value at `v` is `sup { eps : inv(eps) <= v }`, interpolated
/// linearly between grid points; flat runs of `inv` become jumps.
fn w1hat_from_inverse(eps: &[f64], inv: &[f64]) -> Result<WageFunction> {
    let n = eps.len();
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(n + 2);
    if inv[0] > 0.0 {
        knots.push((0.0, 0.0));
        knots.push((inv[0], 0.0));
    }
    let mut k = 0;
    while k < n {
        let mut r = k;
        while r + 1 < n && inv[r + 1] == inv[k] {
            r += 1;
        }
        let v = inv[k].clamp(0.0, 1.0);
        knots.push((v, eps[k]));
        if r > k {
            knots.push((v, eps[r]));
        }
        k = r + 1;
    }
    let last = knots.last().copied().unwrap_or((0.0, 0.0));
    if last.0 < 1.0 {
        knots.push((1.0, last.1));
    }
    WageFunction::from_knots(knots)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupExistence {
    pub exists: bool,
    pub pi2: f64,
    pub pi1_hat: f64,
    pub curve: Option<PhiCurve>,
}

/// Whether some core outcome pays B workers `w2`.
pub fn core_exists_with_w2(m: &Market, w2: &WageFunction, tol: f64) -> Result<GroupExistence> {
    core_exists_with(m, w2, PhiOptions::default(), tol)
}

pub fn core_exists_with(m: &Market, w2: &WageFunction, opts: PhiOptions, tol: f64) -> Result<GroupExistence> {
    if w2.is_identity(1e-15) {
        return Ok(GroupExistence { exists: true, pi2: 0.0, pi1_hat: 0.0, curve: None });
    }
    let curve = build_phi_curve_with(m, w2, opts)?;
    Ok(GroupExistence {
        exists: curve.pi1_hat >= curve.pi2 - tol,
        pi2: curve.pi2,
        pi1_hat: curve.pi1_hat,
        curve: Some(curve),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletedW1 {
    pub w1: WageFunction,
    pub x_star: f64,
    pub pi1: f64,
}

/// `w1hat` below `x*`, identity above, with `x*` equating the two profits.
pub fn complete_w1(m: &Market, w2: &WageFunction, curve: Option<&PhiCurve>, tol: f64) -> Result<CompletedW1> {
    let pi2 = firm2_profit(m, w2);
    if pi2 <= 0.0 || w2.is_identity(1e-15) {
        return Ok(CompletedW1 { w1: WageFunction::identity(), x_star: 0.0, pi1: 0.0 });
    }
    let owned;
    let curve = match curve {
        Some(c) => c,
        None => {
            owned = build_phi_curve(m, w2, DEFAULT_GRID)?;
            &owned
        }
    };
    if curve.pi1_hat < pi2 - tol {
        return Err(Error::NotCore(format!(
            "no core outcome pays these B wages: pi1_hat = {} < pi2 = {pi2}",
            curve.pi1_hat
        )));
    }
    let x_star = if curve.pi1_hat <= pi2 {
        1.0
    } else {
        bisect_root(|x| curve.pi1_up_to(m, x) - pi2, Bracket::unit(), Tolerance::tight())?
    };
    let w1 = curve.w1hat.splice_identity_from(x_star)?;
    let pi1 = firm1_profit(m, &w1);
    Ok(CompletedW1 { w1, x_star, pi1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupCondition {
    IndividualRationality,
    EqualProfit,
    NoDesegregation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NdcPoint {
    pub eps: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCoreReport {
    pub ir_ok: bool,
    /// Worst `w(v) - v` and the firm (0 or 1) it belongs to.
    pub ir_witness: (usize, IrWitness),
    pub equal_profit_residual: f64,
    pub ndc_worst: NdcPoint,
    pub is_core: bool,
    pub profit_1: f64,
    pub profit_2: f64,
    pub gap: f64,
    pub failed: Vec<GroupCondition>,
}

impl GroupCoreReport {
    /// Size of the decisive margin in profit units: the smallest margin for
    /// a core verdict, the largest violation otherwise.
    pub fn margin(&self) -> f64 {
        if self.is_core {
            return self.ndc_worst.slack.max(0.0);
        }
        let mut worst = 0.0f64;
        for c in &self.failed {
            worst = worst.max(match c {
                GroupCondition::IndividualRationality => self.ir_witness.1.violation,
                GroupCondition::EqualProfit => self.equal_profit_residual.abs(),
                GroupCondition::NoDesegregation => -self.ndc_worst.slack,
            });
        }
        worst
    }
}

/// Checks individual rationality, equal profit and no desegregation for the
/// segregated outcome in which firm 1 hires A at `w1` and firm 2 hires B at `w2`.
pub fn verify_group_core(m: &Market, w1: &WageFunction, w2: &WageFunction, tol: f64) -> GroupCoreReport {
    verify_group_core_with(m, w1, w2, DEFAULT_GRID, tol)
}

pub fn verify_group_core_with(
    m: &Market,
    w1: &WageFunction,
    w2: &WageFunction,
    grid: usize,
    tol: f64,
) -> GroupCoreReport {
    let ir1 = w1.individual_rationality(tol);
    let ir2 = w2.individual_rationality(tol);
    let ir_witness = if ir1.witness.violation >= ir2.witness.violation { (0, ir1.witness) } else { (1, ir2.witness) };
    let ir_ok = ir1.ok && ir2.ok;
    let profit_1 = firm1_profit(m, w1);
    let profit_2 = firm2_profit(m, w2);
    let residual = profit_1 - profit_2;

    let slack = |e: f64| ndc_slack_with(m, w1, w2, profit_2, e);
    let mut cands: Vec<f64> = unit_grid(grid.max(MIN_GRID));
    for w in [w1, w2] {
        cands.extend(w.knots().iter().map(|k| k.1));
    }
    cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cands.dedup();
    let vals: Vec<f64> = cands.iter().map(|e| slack(*e)).collect();
    let (imin, _) = vals
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
    let mut worst = NdcPoint { eps: cands[imin], slack: vals[imin] };
    let lo = cands[imin.saturating_sub(1)];
    let hi = cands[(imin + 1).min(cands.len() - 1)];
    if hi > lo {
        let (e, s) = golden_min(slack, lo, hi, 60);
        if s < worst.slack {
            worst = NdcPoint { eps: e, slack: s };
        }
    }

    let mut failed = Vec::new();
    if !ir_ok {
        failed.push(GroupCondition::IndividualRationality);
    }
    if residual.abs() > tol {
        failed.push(GroupCondition::EqualProfit);
    }
    if worst.slack < -tol {
        failed.push(GroupCondition::NoDesegregation);
    }
    let aw_a = GroupBook::new(HiringPlan::all(), w1.clone()).integrate(m.dist_a(), |_, w| w);
    let aw_b = GroupBook::new(HiringPlan::all(), w2.clone()).integrate(m.dist_b(), |_, w| w);
    GroupCoreReport {
        ir_ok,
        ir_witness,
        equal_profit_residual: residual,
        ndc_worst: worst,
        is_core: failed.is_empty(),
        profit_1,
        profit_2,
        gap: aw_a - aw_b,
        failed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaMember {
    pub delta: f64,
    pub delta_prime: f64,
    pub profit: f64,
    pub gap: f64,
    pub is_core_supportable: bool,
    pub w1: WageFunction,
    pub w2: WageFunction,
}

impl DeltaMember {
    pub fn outcome(&self) -> Outcome {
        Outcome::segregated(self.w1.clone(), self.w2.clone())
    }
}

/// Equal-profit pair: A wages capped at `delta`, B workers below
/// `delta_prime` paid nothing.
pub fn delta_family(m: &Market, delta: f64) -> Result<DeltaMember> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Parameter(format!("delta {delta} outside [0, 1]")));
    }
    let lhs = a_term(m, delta, 1.0);
    let total_b = m.dist_b().mean();
    if lhs > total_b + 1e-15 {
        return Err(Error::Infeasible(format!(
            "delta = {delta}: firm 1 profit {lhs} exceeds the whole B surplus {total_b}"
        )));
    }
    let db = m.dist_b();
    let delta_prime = if lhs <= 0.0 {
        0.0
    } else if lhs >= total_b {
        1.0
    } else {
        bisect_root(|d| db.partial_moment(1, 0.0, d) - lhs, Bracket::unit(), Tolerance::tight())?
    };
    let w1 = WageFunction::cap(delta)?;
    let w2 = WageFunction::threshold(delta_prime)?;
    let aw_a = GroupBook::new(HiringPlan::all(), w1.clone()).integrate(m.dist_a(), |_, w| w);
    let aw_b = db.partial_moment(1, delta_prime, 1.0);
    Ok(DeltaMember {
        delta,
        delta_prime,
        profit: lhs,
        gap: aw_a - aw_b,
        is_core_supportable: delta >= delta_prime,
        w1,
        w2,
    })
}

/// Smallest `beta` in `[1, beta_hi]` (on a doubling lattice refined by
/// bisection) at which some core outcome pays B workers `w2`;
/// `f64::INFINITY` when none up to `beta_hi`.
pub fn beta_star(
    dist_a: &ProductivityDist,
    dist_b: &ProductivityDist,
    w2: &WageFunction,
    beta_hi: f64,
    tol: f64,
) -> Result<f64> {
    if !(beta_hi >= 1.0) {
        return Err(Error::Parameter(format!("beta_hi must be >= 1, got {beta_hi}")));
    }
    if w2.is_identity(1e-15) {
        return Ok(1.0);
    }
    let opts = PhiOptions { grid: DEFAULT_GRID, check_resolution: false, parallel: true };
    let ok = |beta: f64| -> Result<bool> {
        let m = Market::new(beta, dist_a.clone(), dist_b.clone())?;
        Ok(core_exists_with(&m, w2, opts, tol)?.exists)
    };
    if ok(1.0)? {
        return Ok(1.0);
    }
    let mut lo = 1.0;
    let mut hi = 2.0f64.min(beta_hi);
    loop {
        if ok(hi)? {
            break;
        }
        if hi >= beta_hi {
            return Ok(f64::INFINITY);
        }
        lo = hi;
        hi = (2.0 * hi).min(beta_hi);
    }
    while hi - lo > 1e-7 * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShortfallBound {
    pub delta: f64,
    pub bound: f64,
    pub pi2: f64,
    pub holds: bool,
}

/// `(beta / 2) delta^2 f_A_lower <= pi2` with `delta = sup (v - w1(v))`.
pub fn prop4_shortfall_bound(m: &Market, w1: &WageFunction, pi2: f64, tol: f64) -> Result<ShortfallBound> {
    let f_lo = m.dist_a().f_lower();
    if f_lo <= 0.0 {
        return Err(Error::Inapplicable("A density is not bounded away from zero".into()));
    }
    let delta = w1.max_shortfall();
    let bound = 0.5 * m.beta() * delta * delta * f_lo;
    Ok(ShortfallBound { delta, bound, pi2, holds: bound <= pi2 + tol })
}

/// Whether the B-side gain is non-increasing in `eps` on a grid.
pub fn b_term_nonincreasing(m: &Market, w2: &WageFunction, grid: usize) -> bool {
    let vals: Vec<f64> = unit_grid(grid).iter().map(|e| b_term(m, w2, *e)).collect();
    vals.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

/// Segregated outcome for the pair, with firm 1 hiring group A.
pub fn segregated_outcome(w1: &WageFunction, w2: &WageFunction) -> Outcome {
    Outcome::segregated(w1.clone(), w2.clone())
}

/// Which group a firm's book belongs to in a segregated outcome.
pub fn hires_only(o: &Outcome, firm: usize, g: Group) -> bool {
    let other = if g == Group::A { Group::B } else { Group::A };
    !o.book(firm, g).hiring.is_empty() && o.book(firm, other).hiring.is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform2() -> Market {
        Market::new(2.0, ProductivityDist::uniform(), ProductivityDist::uniform()).unwrap()
    }

    #[test]
    fn identity_pair_is_zero_profit_core() {
        let m = uniform2();
        let id = WageFunction::identity();
        for e in [0.0, 0.3, 0.9] {
            assert!(ndc_slack(&m, &id, &id, e).abs() < 1e-15);
        }
        let r = verify_group_core(&m, &id, &id, 1e-7);
        assert!(r.is_core);
        assert_eq!((r.profit_1, r.profit_2), (0.0, 0.0));
    }

    #[test]
    fn delta_examples() {
        let m = uniform2();
        let d = delta_family(&m, 1.0).unwrap();
        assert_eq!(d.delta_prime, 0.0);
        let d = delta_family(&m, 0.9).unwrap();
        assert!((d.delta_prime - 0.02f64.sqrt()).abs() < 1e-12);
        assert!(d.is_core_supportable);
        assert!(matches!(delta_family(&m, 0.0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn unequal_profits_fail() {
        let m = uniform2();
        let r = verify_group_core(&m, &WageFunction::cap(0.9).unwrap(), &WageFunction::threshold(0.1).unwrap(), 1e-7);
        assert!(!r.is_core);
        assert!(r.failed.contains(&GroupCondition::EqualProfit));
        assert!((r.equal_profit_residual - 0.005).abs() < 1e-12);
    }

    #[test]
    fn w1hat_from_inverse_handles_flats() {
        let eps = [0.0, 0.25, 0.5, 0.75, 1.0];
        let inv = [0.4, 0.6, 0.6, 0.8, 1.0];
        let w = w1hat_from_inverse(&eps, &inv).unwrap();
        assert_eq!(w.at(0.3), 0.0);
        assert_eq!(w.at(0.4), 0.0);
        assert_eq!(w.at(0.6), 0.5);
        assert!((w.left_limit(0.6) - 0.25).abs() < 1e-15);
        assert!((w.at(0.7) - 0.625).abs() < 1e-15);
        assert_eq!(w.at(1.0), 1.0);
    }

    #[test]
    fn shortfall_bound_inapplicable_without_floor() {
        let m = Market::new(2.0, ProductivityDist::power(2).unwrap(), ProductivityDist::uniform()).unwrap();
        assert!(matches!(
            prop4_shortfall_bound(&m, &WageFunction::identity(), 0.0, 1e-7),
            Err(Error::Inapplicable(_))
        ));
    }
}

