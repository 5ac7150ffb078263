//! Heterogeneous treatment, taste-based bias, and more firms than groups.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{average_wage, FirmBooks, Group, GroupBook, HiringPlan, Market, MultiMarket, Outcome};
use crate::no_epsw::verify_no_epsw_core;
use crate::numerics::{bisect_root, Bracket, Tolerance};
use crate::wages::WageFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroVerdict {
    pub ok: bool,
    pub violations: Vec<String>,
    pub gap: f64,
}

/// Only firm 1 is bound by group pay equity; firm 2 is free.
pub fn hetero_verify(m: &Market, o: &Outcome, tol: f64) -> Result<HeteroVerdict> {
    let base = verify_no_epsw_core(m, o, tol)?;
    let mut violations: Vec<String> = base
        .violations
        .iter()
        .map(|v| {
            format!(
                "{:?} violation in group {:?} on [{:.6}, {:.6}] (magnitude {:.3e})",
                v.condition, v.group, v.lo, v.hi, v.magnitude
            )
        })
        .collect();
    let masses: Vec<f64> = Group::ALL.iter().map(|g| o.book(0, *g).mass(m.dist(*g))).collect();
    if masses.iter().all(|x| *x > tol) {
        violations.push(format!(
            "firm 1 hires from both groups (A mass {:.6}, B mass {:.6})",
            masses[0], masses[1]
        ));
    }
    let gap = average_wage(m, o, Group::A) - average_wage(m, o, Group::B);
    Ok(HeteroVerdict { ok: violations.is_empty(), violations, gap })
}

/// Firm 1's per-worker disutility from hiring B workers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasParams {
    lambda: f64,
}

impl BiasParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Parameter(format!("lambda outside (0,1): {lambda}")));
        }
        Ok(BiasParams { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasGapInterval {
    pub lo: f64,
    pub hi: f64,
}

/// Range of wage gaps over no-EPSW cores under bias.
pub fn bias_gap_interval(m: &Market, bias: BiasParams) -> BiasGapInterval {
    let lo = m.mean_gap();
    let aw_b = m.dist_b().integrate_with(bias.lambda, 1.0, &[], 1, |v| v - bias.lambda);
    BiasGapInterval { lo, hi: m.dist_a().mean() - aw_b }
}

/// `max(0, v - lambda)` up to `vbar`, `v` beyond.
pub fn spliced_b_wage(bias: BiasParams, vbar: f64) -> Result<WageFunction> {
    if !(0.0..=1.0).contains(&vbar) {
        return Err(Error::Parameter(format!("vbar = {vbar} outside [0, 1]")));
    }
    let s = WageFunction::shifted(bias.lambda)?;
    if vbar >= 1.0 {
        return Ok(s);
    }
    let mut knots: Vec<(f64, f64)> = s.knots().iter().copied().filter(|k| k.0 < vbar).collect();
    knots.push((vbar, s.at(vbar)));
    knots.push((vbar, vbar));
    knots.push((1.0, 1.0));
    WageFunction::from_knots(knots)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasNoEpswCore {
    pub vbar: f64,
    pub gap: f64,
    pub outcome: Outcome,
}

/// No-EPSW core under bias: firm 1 hires A at productivity, firm 2 hires B
/// at the spliced wage.
pub fn bias_no_epsw_core(m: &Market, bias: BiasParams, vbar: f64) -> Result<BiasNoEpswCore> {
    let w2 = spliced_b_wage(bias, vbar)?;
    let outcome = Outcome::segregated(WageFunction::identity(), w2);
    let gap = average_wage(m, &outcome, Group::A) - average_wage(m, &outcome, Group::B);
    Ok(BiasNoEpswCore { vbar, gap, outcome })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasFamilyMember {
    pub vbar1: f64,
    pub vbar2: f64,
    pub gap: f64,
    pub g_breve: f64,
    pub w1: WageFunction,
    pub w2: WageFunction,
}

impl BiasFamilyMember {
    pub fn outcome(&self) -> Outcome {
        Outcome::segregated(self.w1.clone(), self.w2.clone())
    }
}

/// Group-EPSW cores under bias obtained by flattening both top wage
/// schedules by equal total amounts.
pub fn bias_group_family(m: &Market, bias: BiasParams, vbar1: f64) -> Result<BiasFamilyMember> {
    if !(0.0..=1.0).contains(&vbar1) {
        return Err(Error::Parameter(format!("vbar1 = {vbar1} outside [0, 1]")));
    }
    let lam = bias.lambda;
    let lhs = m.beta() * m.dist_a().surplus(vbar1, 1.0, vbar1);
    let fb = m.dist_b();
    let rhs = |v2: f64| fb.surplus(v2, 1.0, v2);
    let cap = rhs(lam);
    if lhs > cap + 1e-15 {
        return Err(Error::Infeasible(format!(
            "vbar1 = {vbar1}: the A-side reduction {lhs:.6e} exceeds the largest B-side reduction \
             {cap:.6e} available with vbar2 in [{lam}, 1]"
        )));
    }
    let vbar2 = if lhs <= 0.0 {
        1.0
    } else if lhs >= cap {
        lam
    } else {
        bisect_root(|v2| rhs(v2) - lhs, Bracket { lo: lam, hi: 1.0 }, Tolerance::tight())?
    };
    let w1 = WageFunction::identity().flatten_above(vbar1)?;
    let w2 = WageFunction::shifted(lam)?.flatten_above(vbar2)?;
    let o = Outcome::segregated(w1.clone(), w2.clone());
    let gap = average_wage(m, &o, Group::A) - average_wage(m, &o, Group::B);
    Ok(BiasFamilyMember { vbar1, vbar2, gap, g_breve: bias_gap_interval(m, bias).hi, w1, w2 })
}

/// Whether firm 1 hires all of A and none of B, and firm 2 the reverse.
pub fn group_epsw_bias_segregation_check(m: &Market, _bias: BiasParams, o: &Outcome, tol: f64) -> bool {
    let full = |firm: usize, g: Group| (o.book(firm, g).mass(m.dist(g)) - 1.0).abs() <= tol;
    let none = |firm: usize, g: Group| o.book(firm, g).mass(m.dist(g)) <= tol;
    full(0, Group::A) && none(0, Group::B) && full(1, Group::B) && none(1, Group::A)
}

/// Hiring and wages of `n` firms over `m` groups (`firms[i][g]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiOutcome {
    pub firms: Vec<Vec<GroupBook>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitiveBenchmark {
    pub n_firms: usize,
    pub n_groups: usize,
    /// Group hired by each firm, `None` for idle firms.
    pub assignment: Vec<Option<usize>>,
    pub profits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkVerdict {
    pub ok: bool,
    pub violations: Vec<String>,
    pub profits: Vec<f64>,
}

impl CompetitiveBenchmark {
    /// The benchmark outcome: firm `k < m` employs all of group `k` at productivity.
    pub fn outcome(&self) -> MultiOutcome {
        let firms = self
            .assignment
            .iter()
            .map(|a| {
                (0..self.n_groups)
                    .map(|g| {
                        if *a == Some(g) {
                            GroupBook::new(HiringPlan::all(), WageFunction::identity())
                        } else {
                            GroupBook::empty()
                        }
                    })
                    .collect()
            })
            .collect();
        MultiOutcome { firms }
    }

    /// Checks full employment, wages equal to productivity, one group per
    /// firm and zero profits.
    pub fn verify(&self, mm: &MultiMarket, cand: &MultiOutcome, tol: f64) -> Result<BenchmarkVerdict> {
        if cand.firms.len() != self.n_firms || cand.firms.iter().any(|f| f.len() != self.n_groups) {
            return Err(Error::Parameter("candidate shape does not match the market".into()));
        }
        let mut violations = Vec::new();
        let mut profits = Vec::with_capacity(self.n_firms);
        for (i, books) in cand.firms.iter().enumerate() {
            let mut groups_hired = 0;
            let mut profit = 0.0;
            for (g, book) in books.iter().enumerate() {
                let (size, d) = &mm.groups()[g];
                if book.mass(d) > tol {
                    groups_hired += 1;
                }
                profit += size * book.integrate(d, |v, w| v - w);
                let dev = book.integrate(d, |v, w| (v - w).abs());
                if dev > tol {
                    violations.push(format!("firm {} pays group {g} off productivity (L1 {dev:.3e})", i + 1));
                }
            }
            if groups_hired > 1 {
                violations.push(format!("firm {} hires from {groups_hired} groups", i + 1));
            }
            if profit.abs() > tol {
                violations.push(format!("firm {} earns profit {profit:.6e}", i + 1));
            }
            profits.push(profit);
        }
        for (g, (_, d)) in mm.groups().iter().enumerate() {
            let hired: f64 = cand.firms.iter().map(|f| f[g].mass(d)).sum();
            if hired > 1.0 + tol {
                return Err(Error::Feasibility(format!("group {g} over-hired ({hired})")));
            }
            if hired < 1.0 - tol {
                violations.push(format!("group {g} only {hired:.6} employed"));
            }
        }
        Ok(BenchmarkVerdict { ok: violations.is_empty(), violations, profits })
    }
}

/// Competitive benchmark for group-EPSW markets with more firms than groups.
pub fn n_gt_m_group_benchmark(mm: &MultiMarket) -> Result<CompetitiveBenchmark> {
    let (n, m) = (mm.n_firms(), mm.n_groups());
    if n <= m {
        return Err(Error::Inapplicable(format!("need more firms than groups (n = {n}, m = {m})")));
    }
    Ok(CompetitiveBenchmark {
        n_firms: n,
        n_groups: m,
        assignment: (0..n).map(|k| if k < m { Some(k) } else { None }).collect(),
        profits: vec![0.0; n],
    })
}

/// Heterogeneous-treatment outcome: firm 1 hires A on `[lo, hi)` at
/// productivity, firm 2 everyone else at productivity.
pub fn hetero_outcome(lo: f64, hi: f64) -> Result<Outcome> {
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(Error::Parameter(format!("bad interval [{lo}, {hi}]")));
    }
    let mut rest = Vec::new();
    if lo > 0.0 {
        rest.push(crate::market::HiringInterval { lo: 0.0, hi: lo, share: 1.0 });
    }
    if hi < 1.0 {
        rest.push(crate::market::HiringInterval { lo: hi, hi: 1.0, share: 1.0 });
    }
    let id = WageFunction::identity;
    Ok(Outcome::new(
        FirmBooks { a: GroupBook::new(HiringPlan::on(lo, hi), id()), b: GroupBook::empty() },
        FirmBooks { a: GroupBook::new(HiringPlan::new(rest)?, id()), b: GroupBook::new(HiringPlan::all(), id()) },
    ))
}
