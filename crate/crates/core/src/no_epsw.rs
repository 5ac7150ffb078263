//! Core outcomes without pay-equity constraints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{FirmBooks, Group, GroupBook, HiringPlan, Market, Outcome};
use crate::wages::WageFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoEpswCondition {
    Employment,
    Wage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoEpswViolation {
    pub condition: NoEpswCondition,
    pub group: Group,
    /// Firm index for wage violations.
    pub firm: Option<usize>,
    pub lo: f64,
    pub hi: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoEpswVerdict {
    pub is_core: bool,
    pub violations: Vec<NoEpswViolation>,
}

/// Firm 1 employs everyone below `v_star`, firm 2 everyone above, at
/// wages equal to productivity.
pub fn make_bertrand(_m: &Market, v_star: f64) -> Result<Outcome> {
    if !(0.0..=1.0).contains(&v_star) {
        return Err(Error::Parameter(format!("split {v_star} outside [0, 1]")));
    }
    let book = |lo: f64, hi: f64| {
        if hi > lo {
            GroupBook::new(HiringPlan::on(lo, hi), WageFunction::identity())
        } else {
            GroupBook::empty()
        }
    };
    Ok(Outcome::new(
        FirmBooks { a: book(0.0, v_star), b: book(0.0, v_star) },
        FirmBooks { a: book(v_star, 1.0), b: book(v_star, 1.0) },
    ))
}

pub fn verify_no_epsw_core(_m: &Market, o: &Outcome, tol: f64) -> Result<NoEpswVerdict> {
    o.check_feasible()?;
    let mut violations = Vec::new();
    for g in Group::ALL {
        let mut cuts = vec![0.0, 1.0];
        for f in &o.firms {
            cuts.extend(f.book(g).hiring.breakpoints());
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        for w in cuts.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let share = o.employed_share(g, 0.5 * (w[0] + w[1]));
            if share < 1.0 - tol {
                push_merged(
                    &mut violations,
                    NoEpswViolation {
                        condition: NoEpswCondition::Employment,
                        group: g,
                        firm: None,
                        lo: w[0],
                        hi: w[1],
                        magnitude: 1.0 - share,
                    },
                );
            }
        }
        for (i, f) in o.firms.iter().enumerate() {
            let book = f.book(g);
            for iv in book.hiring.intervals() {
                if let Some(v) = wage_gap_on(&book.wage, iv.lo, iv.hi, tol) {
                    violations.push(NoEpswViolation {
                        condition: NoEpswCondition::Wage,
                        group: g,
                        firm: Some(i),
                        lo: v.0,
                        hi: v.1,
                        magnitude: v.2,
                    });
                }
            }
        }
    }
    Ok(NoEpswVerdict { is_core: violations.is_empty(), violations })
}

fn push_merged(out: &mut Vec<NoEpswViolation>, v: NoEpswViolation) {
    if let Some(last) = out.last_mut() {
        if last.condition == v.condition && last.group == v.group && last.firm == v.firm && last.hi == v.lo {
            last.hi = v.hi;
            last.magnitude = last.magnitude.max(v.magnitude);
            return;
        }
    }
    out.push(v);
}

/// Sub-interval of [lo, hi] on which `|w(v) - v| > tol`, with the largest gap.
fn wage_gap_on(w: &WageFunction, lo: f64, hi: f64, tol: f64) -> Option<(f64, f64, f64)> {
    let mut pts: Vec<f64> = w.breakpoints().into_iter().filter(|x| *x > lo && *x < hi).collect();
    pts.insert(0, lo);
    pts.push(hi);
    let mut first: Option<f64> = None;
    let mut last = lo;
    let mut worst = 0.0f64;
    for s in pts.windows(2) {
        // the wage is linear on the open piece; check both ends from inside
        let a = w.at(s[0]) - s[0];
        let b = w.left_limit(s[1]) - s[1];
        let m = a.abs().max(b.abs());
        if m > tol {
            first.get_or_insert(s[0]);
            last = s[1];
            worst = worst.max(m);
        }
    }
    first.map(|f| (f, last, worst))
}
