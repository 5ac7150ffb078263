//! Markets, outcomes and outcome accounting.

use serde::{Deserialize, Serialize};

use crate::distributions::ProductivityDist;
use crate::error::{Error, Result};
use crate::wages::WageFunction;

const SHARE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::A, Group::B];

    pub fn index(self) -> usize {
        match self {
            Group::A => 0,
            Group::B => 1,
        }
    }
}

/// Two-group market: group A has measure `beta`, group B measure 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    beta: f64,
    dist_a: ProductivityDist,
    dist_b: ProductivityDist,
}

impl Market {
    pub fn new(beta: f64, dist_a: ProductivityDist, dist_b: ProductivityDist) -> Result<Self> {
        if !(beta.is_finite() && beta >= 1.0) {
            return Err(Error::Parameter(format!("beta must be >= 1, got {beta}")));
        }
        Ok(Market { beta, dist_a, dist_b })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dist(&self, g: Group) -> &ProductivityDist {
        match g {
            Group::A => &self.dist_a,
            Group::B => &self.dist_b,
        }
    }

    pub fn dist_a(&self) -> &ProductivityDist {
        &self.dist_a
    }

    pub fn dist_b(&self) -> &ProductivityDist {
        &self.dist_b
    }

    /// Group measure.
    pub fn size(&self, g: Group) -> f64 {
        match g {
            Group::A => self.beta,
            Group::B => 1.0,
        }
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Market::new(beta, self.dist_a.clone(), self.dist_b.clone())
    }

    /// Normalized pooled distribution `beta/(1+beta) F_A + 1/(1+beta) F_B`.
    pub fn pooled(&self) -> ProductivityDist {
        let wa = self.beta / (1.0 + self.beta);
        ProductivityDist::mixture(&[(wa, &self.dist_a), (1.0 - wa, &self.dist_b)])
            .expect("mixture of valid densities is valid")
    }

    /// `E_A - E_B`.
    pub fn mean_gap(&self) -> f64 {
        self.dist_a.mean() - self.dist_b.mean()
    }
}

/// `n` firms and several groups whose sizes sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiMarket {
    n_firms: usize,
    groups: Vec<(f64, ProductivityDist)>,
}

impl MultiMarket {
    pub fn new(n_firms: usize, groups: Vec<(f64, ProductivityDist)>) -> Result<Self> {
        if n_firms < 2 {
            return Err(Error::Parameter(format!("need at least 2 firms, got {n_firms}")));
        }
        if groups.is_empty() {
            return Err(Error::Parameter("need at least one group".into()));
        }
        if groups.iter().any(|(b, _)| !(*b > 0.0)) {
            return Err(Error::Parameter("group sizes must be positive".into()));
        }
        let total: f64 = groups.iter().map(|(b, _)| b).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Parameter(format!("group sizes must sum to 1, got {total}")));
        }
        Ok(MultiMarket { n_firms, groups })
    }

    /// Two-group market rescaled so that sizes sum to one.
    pub fn from_market(m: &Market, n_firms: usize) -> Result<Self> {
        let wa = m.beta() / (1.0 + m.beta());
        Self::new(n_firms, vec![(wa, m.dist_a().clone()), (1.0 - wa, m.dist_b().clone())])
    }

    pub fn n_firms(&self) -> usize {
        self.n_firms
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[(f64, ProductivityDist)] {
        &self.groups
    }

    pub fn pooled(&self) -> ProductivityDist {
        let parts: Vec<(f64, &ProductivityDist)> = self.groups.iter().map(|(b, d)| (*b, d)).collect();
        ProductivityDist::mixture(&parts).expect("mixture of valid densities is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiringInterval {
    pub lo: f64,
    pub hi: f64,
    pub share: f64,
}

/// Hiring density as shares of the ambient group density on intervals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HiringPlan {
    intervals: Vec<HiringInterval>,
}

impl HiringPlan {
    pub fn new(mut intervals: Vec<HiringInterval>) -> Result<Self> {
        intervals.retain(|i| i.hi > i.lo && i.share > 0.0);
        intervals.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap_or(std::cmp::Ordering::Equal));
        for (k, i) in intervals.iter().enumerate() {
            if !(i.lo >= 0.0 && i.hi <= 1.0) || !i.lo.is_finite() || !i.hi.is_finite() {
                return Err(Error::Hiring(format!("interval [{}, {}] outside [0, 1]", i.lo, i.hi)));
            }
            if !(0.0..=1.0 + SHARE_TOL).contains(&i.share) {
                return Err(Error::Hiring(format!("share {} outside [0, 1]", i.share)));
            }
            if k > 0 && intervals[k - 1].hi > i.lo {
                return Err(Error::Hiring(format!(
                    "intervals [{}, {}] and [{}, {}] overlap",
                    intervals[k - 1].lo,
                    intervals[k - 1].hi,
                    i.lo,
                    i.hi
                )));
            }
        }
        Ok(HiringPlan { intervals })
    }

    pub fn none() -> Self {
        HiringPlan { intervals: vec![] }
    }

    pub fn all() -> Self {
        Self::on(0.0, 1.0)
    }

    pub fn on(lo: f64, hi: f64) -> Self {
        HiringPlan::new(vec![HiringInterval { lo, hi, share: 1.0 }]).expect("valid interval")
    }

    pub fn intervals(&self) -> &[HiringInterval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn share_at(&self, v: f64) -> f64 {
        self.intervals
            .iter()
            .find(|i| i.lo <= v && v < i.hi)
            .map_or(0.0, |i| i.share)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.intervals.iter().flat_map(|i| [i.lo, i.hi]).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        HiringPlan {
            intervals: self
                .intervals
                .iter()
                .map(|i| HiringInterval { share: i.share * s, ..*i })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBook {
    pub hiring: HiringPlan,
    pub wage: WageFunction,
}

impl GroupBook {
    pub fn new(hiring: HiringPlan, wage: WageFunction) -> Self {
        GroupBook { hiring, wage }
    }

    pub fn empty() -> Self {
        GroupBook { hiring: HiringPlan::none(), wage: WageFunction::zero() }
    }

    /// `int share(v) g(v, w(v)) f(v) dv` over the hiring support.
    pub fn integrate<G: Fn(f64, f64) -> f64>(&self, dist: &ProductivityDist, g: G) -> f64 {
        let breaks = self.wage.breakpoints();
        self.hiring
            .intervals()
            .iter()
            .map(|iv| {
                iv.share * dist.integrate_with(iv.lo, iv.hi, &breaks, 2, |v| g(v, self.wage.at(v)))
            })
            .sum()
    }

    /// Hired fraction of the group.
    pub fn mass(&self, dist: &ProductivityDist) -> f64 {
        self.hiring
            .intervals()
            .iter()
            .map(|iv| iv.share * (dist.cdf(iv.hi) - dist.cdf(iv.lo)))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmBooks {
    #[serde(rename = "A")]
    pub a: GroupBook,
    #[serde(rename = "B")]
    pub b: GroupBook,
}

impl FirmBooks {
    pub fn book(&self, g: Group) -> &GroupBook {
        match g {
            Group::A => &self.a,
            Group::B => &self.b,
        }
    }
}

/// Hiring and wages of both firms in both groups. Firm indices are 0 and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub firms: [FirmBooks; 2],
}

impl Outcome {
    pub fn new(firm1: FirmBooks, firm2: FirmBooks) -> Self {
        Outcome { firms: [firm1, firm2] }
    }

    /// Firm 1 hires all of A at `w1`, firm 2 all of B at `w2`.
    pub fn segregated(w1: WageFunction, w2: WageFunction) -> Self {
        Outcome::new(
            FirmBooks { a: GroupBook::new(HiringPlan::all(), w1), b: GroupBook::empty() },
            FirmBooks { a: GroupBook::empty(), b: GroupBook::new(HiringPlan::all(), w2) },
        )
    }

    pub fn book(&self, firm: usize, g: Group) -> &GroupBook {
        self.firms[firm].book(g)
    }

    /// Checks that total shares never exceed one.
    pub fn check_feasible(&self) -> Result<()> {
        for g in Group::ALL {
            let mut cuts: Vec<f64> = vec![0.0, 1.0];
            for f in &self.firms {
                cuts.extend(f.book(g).hiring.breakpoints());
            }
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            cuts.dedup();
            for w in cuts.windows(2) {
                if w[1] <= w[0] {
                    continue;
                }
                let mid = 0.5 * (w[0] + w[1]);
                let total: f64 = self.firms.iter().map(|f| f.book(g).hiring.share_at(mid)).sum();
                if total > 1.0 + SHARE_TOL {
                    return Err(Error::Feasibility(format!(
                        "group {g:?} hired with total share {total} on [{}, {}]",
                        w[0],
                        w[1]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Employed share of group `g` at `v`.
    pub fn employed_share(&self, g: Group, v: f64) -> f64 {
        self.firms.iter().map(|f| f.book(g).hiring.share_at(v)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountingReport {
    pub profit_1: f64,
    pub profit_2: f64,
    pub aw_a: f64,
    pub aw_b: f64,
    pub ts_a: f64,
    pub ts_b: f64,
    pub gap: f64,
    pub employment_a: f64,
    pub employment_b: f64,
}

fn book_profit(m: &Market, book: &GroupBook, g: Group, penalty: f64) -> f64 {
    m.size(g) * book.integrate(m.dist(g), |v, w| v - penalty - w)
}

/// Profit of `firm` (0 or 1).
pub fn profit(m: &Market, o: &Outcome, firm: usize) -> Result<f64> {
    payoff(m, o, firm, 0.0)
}

/// Profit of `firm` when firm 0 values a B worker at `v - bias`.
pub fn payoff(m: &Market, o: &Outcome, firm: usize, bias: f64) -> Result<f64> {
    if firm > 1 {
        return Err(Error::Parameter(format!("firm index {firm} out of range")));
    }
    o.check_feasible()?;
    Ok(Group::ALL
        .iter()
        .map(|&g| {
            let pen = if firm == 0 && g == Group::B { bias } else { 0.0 };
            book_profit(m, o.book(firm, g), g, pen)
        })
        .sum())
}

/// Average wage of group `g`, unemployed counted at zero.
pub fn average_wage(m: &Market, o: &Outcome, g: Group) -> f64 {
    o.firms.iter().map(|f| f.book(g).integrate(m.dist(g), |_, w| w)).sum()
}

pub fn accounting(m: &Market, o: &Outcome) -> Result<AccountingReport> {
    o.check_feasible()?;
    let aw_a = average_wage(m, o, Group::A);
    let aw_b = average_wage(m, o, Group::B);
    let emp = |g: Group| -> f64 { m.size(g) * o.firms.iter().map(|f| f.book(g).mass(m.dist(g))).sum::<f64>() };
    Ok(AccountingReport {
        profit_1: profit(m, o, 0)?,
        profit_2: profit(m, o, 1)?,
        aw_a,
        aw_b,
        ts_a: m.beta() * m.dist_a().mean(),
        ts_b: m.dist_b().mean(),
        gap: aw_a - aw_b,
        employment_a: emp(Group::A),
        employment_b: emp(Group::B),
    })
}

/// `|TS_A - TS_B + (1 - beta) AW_A - (AW_A - AW_B)|`.
pub fn gap_identity_residual(m: &Market, r: &AccountingReport) -> f64 {
    let lhs = r.ts_a - r.ts_b + (1.0 - m.beta()) * r.aw_a;
    (lhs - (r.aw_a - r.aw_b)).abs()
}
