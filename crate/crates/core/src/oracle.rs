//! Brute-force block search on a discretized market.
//!
//! Each productivity cell is split into blocks by owner (firm 1, firm 2,
//! unemployed). Block masses, mean productivities and mean wages are exact
//! integrals, so profits of block-aligned deviations are exact; the only
//! approximation is that deviations act on whole blocks. A block joins a
//! uniform-wage offer only if the offer clears its highest wage.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{payoff, Group, Market, Outcome};

pub const MIN_BINS: usize = 8;
pub const MAX_BINS: usize = 256;
/// Margin by which a poaching wage exceeds the rival's.
pub const POACH_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    None,
    Group,
    Nongroup,
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Regime::None),
            "group" | "group_epsw" => Ok(Regime::Group),
            "nongroup" | "nongroup_epsw" => Ok(Regime::Nongroup),
            _ => Err(Error::Parameter(format!("unknown regime `{s}` (none, group, nongroup)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Owner {
    Firm(usize),
    Unemployed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub group: Group,
    pub cell: usize,
    pub owner: Owner,
    /// Absolute mass (group size times probability).
    pub mass: f64,
    pub mean_v: f64,
    pub mean_w: f64,
    /// Highest wage paid inside the block; a uniform offer must clear it.
    pub max_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMarket {
    pub bins: usize,
    /// Absolute mass per cell, indexed `[group][cell]`.
    pub cell_mass: [Vec<f64>; 2],
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Fire,
    PoachAll,
    DesegregateAtEps,
    UniformWageAtW,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WageRule {
    Keep,
    RivalPlus(f64),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hire {
    pub group: Group,
    pub cell: usize,
    pub from: Owner,
    pub wage: WageRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCertificate {
    pub firm: usize,
    pub kind: BlockKind,
    pub wage: Option<f64>,
    pub hires: Vec<Hire>,
    pub profit_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub bins: usize,
    pub regime: Regime,
    /// `true` means no block was found at this resolution.
    pub core_at_resolution: bool,
    pub certificate: Option<BlockCertificate>,
}

fn check_bins(bins: usize) -> Result<()> {
    if !(MIN_BINS..=MAX_BINS).contains(&bins) {
        return Err(Error::Parameter(format!("bins must be in [{MIN_BINS}, {MAX_BINS}], got {bins}")));
    }
    Ok(())
}

struct Piece {
    lo: f64,
    hi: f64,
    share: f64,
}

/// Parts of `[lo, hi]` held by `owner` with their shares.
fn owner_pieces(o: &Outcome, g: Group, lo: f64, hi: f64, owner: Owner) -> Vec<Piece> {
    let mut cuts = vec![lo, hi];
    for f in &o.firms {
        cuts.extend(f.book(g).hiring.breakpoints().into_iter().filter(|x| *x > lo && *x < hi));
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .filter_map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let share = match owner {
                Owner::Firm(i) => o.book(i, g).hiring.share_at(mid),
                Owner::Unemployed => (1.0 - o.employed_share(g, mid)).max(0.0),
            };
            (share > 0.0).then_some(Piece { lo: w[0], hi: w[1], share })
        })
        .collect()
}

/// `size * int over owner's part of the cell of h(v, w(v)) f(v) dv`.
fn cell_integral<H: Fn(f64, f64) -> f64>(
    m: &Market,
    o: &Outcome,
    g: Group,
    lo: f64,
    hi: f64,
    owner: Owner,
    h: H,
) -> f64 {
    let d = m.dist(g);
    let (wage, breaks) = match owner {
        Owner::Firm(i) => {
            let w = &o.book(i, g).wage;
            (Some(w), w.breakpoints())
        }
        Owner::Unemployed => (None, vec![]),
    };
    let total: f64 = owner_pieces(o, g, lo, hi, owner)
        .iter()
        .map(|p| p.share * d.integrate_with(p.lo, p.hi, &breaks, 2, |v| h(v, wage.map_or(0.0, |w| w.at(v)))))
        .sum();
    m.size(g) * total
}

pub fn discretize(m: &Market, o: &Outcome, bins: usize) -> Result<DiscreteMarket> {
    check_bins(bins)?;
    o.check_feasible()?;
    let mut cell_mass = [Vec::with_capacity(bins), Vec::with_capacity(bins)];
    let mut blocks = Vec::new();
    for g in Group::ALL {
        let d = m.dist(g);
        for k in 0..bins {
            let (lo, hi) = (k as f64 / bins as f64, (k + 1) as f64 / bins as f64);
            cell_mass[g.index()].push(m.size(g) * (d.cdf(hi) - d.cdf(lo)));
            for owner in [Owner::Firm(0), Owner::Firm(1), Owner::Unemployed] {
                let mass = cell_integral(m, o, g, lo, hi, owner, |_, _| 1.0);
                if mass <= 1e-15 {
                    continue;
                }
                let sv = cell_integral(m, o, g, lo, hi, owner, |v, _| v);
                let sw = cell_integral(m, o, g, lo, hi, owner, |_, w| w);
                let max_w = match owner {
                    Owner::Firm(i) => {
                        let w = &o.book(i, g).wage;
                        owner_pieces(o, g, lo, hi, owner)
                            .iter()
                            .map(|p| w.at(p.lo).max(w.left_limit(p.hi)))
                            .fold(0.0, f64::max)
                    }
                    Owner::Unemployed => 0.0,
                };
                blocks.push(Block { group: g, cell: k, owner, mass, mean_v: sv / mass, mean_w: sw / mass, max_w });
            }
        }
    }
    Ok(DiscreteMarket { bins, cell_mass, blocks })
}

fn value(firm: usize, b: &Block, bias: Option<f64>) -> f64 {
    match (firm, b.group, bias) {
        (0, Group::B, Some(l)) => b.mean_v - l,
        _ => b.mean_v,
    }
}

fn margin(firm: usize, b: &Block, bias: Option<f64>) -> f64 {
    b.mass * (value(firm, b, bias) - b.mean_w)
}

struct Candidate {
    kind: BlockKind,
    wage: Option<f64>,
    hires: Vec<Hire>,
    gain: f64,
}

fn hire(b: &Block, wage: WageRule) -> Hire {
    Hire { group: b.group, cell: b.cell, from: b.owner, wage }
}

fn firm_candidates(dm: &DiscreteMarket, regime: Regime, bias: Option<f64>, j: usize) -> Vec<Candidate> {
    let r = 1 - j;
    let own: Vec<&Block> = dm.blocks.iter().filter(|b| b.owner == Owner::Firm(j)).collect();
    let rival: Vec<&Block> = dm.blocks.iter().filter(|b| b.owner == Owner::Firm(r)).collect();
    let base: f64 = own.iter().map(|b| margin(j, b, bias)).sum();
    let mut out = Vec::new();

    // drop loss-making blocks
    let fired: Vec<&&Block> = own.iter().filter(|b| margin(j, b, bias) < 0.0).collect();
    if !fired.is_empty() {
        out.push(Candidate {
            kind: BlockKind::Fire,
            wage: None,
            hires: own
                .iter()
                .filter(|b| margin(j, b, bias) >= 0.0)
                .map(|b| hire(b, WageRule::Keep))
                .collect(),
            gain: -fired.iter().map(|b| margin(j, b, bias)).sum::<f64>(),
        });
    }

    // take over the rival's book one step above its wages
    let poach_margin = |b: &Block| b.mass * (value(j, b, bias) - b.mean_w - POACH_STEP);
    let mut hires = Vec::new();
    let mut total = 0.0;
    let mixable = regime == Regime::None;
    for g in Group::ALL {
        let own_g: f64 = own.iter().filter(|b| b.group == g).map(|b| margin(j, b, bias).max(0.0)).sum();
        let poach_g: f64 = rival.iter().filter(|b| b.group == g).map(|b| poach_margin(b).max(0.0)).sum();
        if mixable && own_g >= poach_g {
            hires.extend(own.iter().filter(|b| b.group == g && margin(j, b, bias) >= 0.0).map(|b| hire(b, WageRule::Keep)));
            total += own_g;
        } else {
            hires.extend(
                rival
                    .iter()
                    .filter(|b| b.group == g && poach_margin(b) > 0.0)
                    .map(|b| hire(b, WageRule::RivalPlus(POACH_STEP))),
            );
            total += poach_g;
        }
    }
    if hires.iter().any(|h| matches!(h.wage, WageRule::RivalPlus(_))) {
        out.push(Candidate { kind: BlockKind::PoachAll, wage: None, hires, gain: total - base });
    }

    // one common wage for every hire
    let mut wages: Vec<f64> = (0..=dm.bins).map(|k| k as f64 / dm.bins as f64).collect();
    wages.extend(rival.iter().map(|b| (b.max_w + POACH_STEP).min(1.0)));
    wages.extend(own.iter().map(|b| b.max_w));
    wages.sort_by(|a, b| a.partial_cmp(b).unwrap());
    wages.dedup();
    for c in wages {
        let take = |b: &&Block| -> bool {
            let available = match b.owner {
                Owner::Unemployed => true,
                Owner::Firm(i) if i == j => b.max_w <= c,
                Owner::Firm(_) => b.max_w < c,
            };
            available && value(j, b, bias) > c
        };
        let chosen: Vec<&Block> = dm.blocks.iter().filter(|b| take(b)).collect();
        if chosen.is_empty() {
            continue;
        }
        let gain = chosen.iter().map(|b| b.mass * (value(j, b, bias) - c)).sum::<f64>() - base;
        let both = chosen.iter().any(|b| b.group == Group::A) && chosen.iter().any(|b| b.group == Group::B);
        let kind = if regime == Regime::Group && both { BlockKind::DesegregateAtEps } else { BlockKind::UniformWageAtW };
        out.push(Candidate {
            kind,
            wage: Some(c),
            hires: chosen.iter().map(|b| hire(b, WageRule::Fixed(c))).collect(),
            gain,
        });
    }
    out
}

/// Best strictly profitable deviation, if any.
pub fn find_block(dm: &DiscreteMarket, regime: Regime, bias: Option<f64>, tol: f64) -> Option<BlockCertificate> {
    let per_firm: Vec<Vec<Candidate>> = (0..2usize)
        .into_par_iter()
        .map(|j| firm_candidates(dm, regime, bias, j))
        .collect();
    let mut best: Option<BlockCertificate> = None;
    for (j, cands) in per_firm.into_iter().enumerate() {
        for c in cands {
            if c.gain <= tol {
                continue;
            }
            if best.as_ref().map_or(true, |b| c.gain > b.profit_gain) {
                best = Some(BlockCertificate { firm: j, kind: c.kind, wage: c.wage, hires: c.hires, profit_gain: c.gain });
            }
        }
    }
    best
}

pub fn oracle_is_core(
    m: &Market,
    o: &Outcome,
    regime: Regime,
    bins: usize,
    bias: Option<f64>,
    tol: f64,
) -> Result<OracleVerdict> {
    let dm = discretize(m, o, bins)?;
    let certificate = find_block(&dm, regime, bias, tol);
    Ok(OracleVerdict { bins, regime, core_at_resolution: certificate.is_none(), certificate })
}

/// Gain of the certificate's deviation evaluated on the continuum outcome.
pub fn recompute_gain(m: &Market, o: &Outcome, cert: &BlockCertificate, bins: usize, bias: Option<f64>) -> Result<f64> {
    check_bins(bins)?;
    let j = cert.firm;
    let lam = bias.unwrap_or(0.0);
    let mut new_profit = 0.0;
    for h in &cert.hires {
        let lo = h.cell as f64 / bins as f64;
        let hi = (h.cell + 1) as f64 / bins as f64;
        let pen = if j == 0 && h.group == Group::B { lam } else { 0.0 };
        new_profit += match h.wage {
            WageRule::Keep => cell_integral(m, o, h.group, lo, hi, h.from, |v, w| v - pen - w),
            WageRule::RivalPlus(s) => cell_integral(m, o, h.group, lo, hi, h.from, |v, w| v - pen - w - s),
            WageRule::Fixed(c) => cell_integral(m, o, h.group, lo, hi, h.from, |v, _| v - pen - c),
        };
    }
    Ok(new_profit - payoff(m, o, j, lam)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ProductivityDist;
    use crate::market::{FirmBooks, GroupBook, HiringPlan};
    use crate::no_epsw::make_bertrand;
    use crate::wages::WageFunction;

    #[test]
    fn cell_masses() {
        let m = Market::new(4.0, ProductivityDist::uniform(), ProductivityDist::power(5).unwrap()).unwrap();
        let e = FirmBooks { a: GroupBook::empty(), b: GroupBook::empty() };
        let o = Outcome::new(e.clone(), e);
        let dm = discretize(&m, &o, 8).unwrap();
        assert!(dm.cell_mass[0].iter().all(|x| (x - 0.5).abs() < 1e-14));
        let lower_half: f64 = dm.cell_mass[1][..4].iter().sum();
        assert!((lower_half - 1.0 / 32.0).abs() < 1e-14);
        assert!(discretize(&m, &o, 4).is_err());
        assert!(discretize(&m, &o, 512).is_err());
    }

    #[test]
    fn bertrand_has_no_block() {
        let m = Market::new(2.0, ProductivityDist::uniform(), ProductivityDist::power(2).unwrap()).unwrap();
        let o = make_bertrand(&m, 0.4).unwrap();
        let v = oracle_is_core(&m, &o, Regime::None, 64, None, 1e-7).unwrap();
        assert!(v.core_at_resolution, "{:?}", v.certificate);
    }

    #[test]
    fn equal_wages_are_blocked() {
        let m = Market::new(2.0, ProductivityDist::uniform(), ProductivityDist::uniform()).unwrap();
        let o = crate::nongroup::uniform_wage_outcome(0.4, 0.4);
        let v = oracle_is_core(&m, &o, Regime::Nongroup, 64, None, 1e-7).unwrap();
        let c = v.certificate.expect("block");
        assert_eq!(c.firm, 0);
        let again = recompute_gain(&m, &o, &c, 64, None).unwrap();
        assert!((again - c.profit_gain).abs() < 1e-12);
    }

    #[test]
    fn unemployment_is_blocked_without_epsw() {
        let m = Market::new(1.0, ProductivityDist::uniform(), ProductivityDist::uniform()).unwrap();
        let b = GroupBook::new(HiringPlan::on(0.2, 1.0), WageFunction::identity());
        let o = Outcome::new(FirmBooks { a: b.clone(), b }, FirmBooks { a: GroupBook::empty(), b: GroupBook::empty() });
        let v = oracle_is_core(&m, &o, Regime::None, 32, None, 1e-7).unwrap();
        assert_eq!(v.certificate.unwrap().kind, BlockKind::UniformWageAtW);
    }
}
