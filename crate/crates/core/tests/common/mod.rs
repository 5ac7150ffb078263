//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use epsw_core::distributions::ProductivityDist;
use epsw_core::group_epsw::{a_term, complete_w1, delta_family, verify_group_core};
use epsw_core::market::{FirmBooks, GroupBook, HiringPlan, Market, Outcome};
use epsw_core::no_epsw::{make_bertrand, verify_no_epsw_core};
use epsw_core::nongroup::{nongroup_core, uniform_wage_outcome, verify_nongroup_core, w1_star, w2_of_w1};
use epsw_core::numerics::{bisect_root, Bracket, Tolerance};
use epsw_core::oracle::Regime;
use epsw_core::wages::WageFunction;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 0x5eed_2024;

pub fn uniform_market(beta: f64) -> Market {
    Market::new(beta, ProductivityDist::uniform(), ProductivityDist::uniform()).unwrap()
}

pub fn random_dist(rng: &mut ChaCha8Rng) -> ProductivityDist {
    match rng.gen_range(0..3) {
        0 => ProductivityDist::uniform(),
        1 => ProductivityDist::power(rng.gen_range(1..=4)).unwrap(),
        _ => {
            let br: f64 = rng.gen_range(0.3..0.7);
            let a: f64 = rng.gen_range(0.3..(1.0 / br).min(1.7));
            let b = (1.0 - a * br) / (1.0 - br);
            ProductivityDist::step(&[br], &[a, b]).unwrap()
        }
    }
}

pub fn random_market(rng: &mut ChaCha8Rng) -> Market {
    let beta = rng.gen_range(1.0..4.0);
    Market::new(beta, random_dist(rng), random_dist(rng)).unwrap()
}

/// Shifts every knot of `w` by `c`, clamped to `[0, 1]`.
pub fn shift(w: &WageFunction, c: f64) -> WageFunction {
    let knots = w.knots().iter().map(|&(v, x)| (v, (x + c).clamp(0.0, 1.0))).collect();
    WageFunction::from_knots(knots).unwrap()
}

/// Lowest delta at which the cap/threshold pair satisfies `delta >= delta'`.
pub fn delta_core_floor(m: &Market) -> f64 {
    let g = |d: f64| {
        let mem = delta_family(m, d).ok();
        mem.map_or(-1.0, |x| x.delta - x.delta_prime)
    };
    let lo = if a_term(m, 0.0, 1.0) <= m.dist_b().mean() {
        0.0
    } else {
        bisect_root(|d| a_term(m, d, 1.0) - m.dist_b().mean(), Bracket::unit(), Tolerance::tight()).unwrap() + 1e-12
    };
    if g(lo) >= 0.0 {
        return lo;
    }
    bisect_root(g, Bracket { lo, hi: 1.0 }, Tolerance::tight()).unwrap()
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub label: String,
    pub market: Market,
    pub outcome: Outcome,
    pub regime: Regime,
    pub analytic_core: bool,
    /// Size of the decisive analytic margin (profit or wage units).
    pub slack: f64,
}

fn group_instance(label: String, m: Market, w1: WageFunction, w2: WageFunction) -> Instance {
    let r = verify_group_core(&m, &w1, &w2, 1e-7);
    Instance {
        label,
        outcome: Outcome::segregated(w1, w2),
        market: m,
        regime: Regime::Group,
        analytic_core: r.is_core,
        slack: r.margin(),
    }
}

/// One randomized instance; the mix covers all three regimes and both verdicts.
pub fn random_instance(rng: &mut ChaCha8Rng, idx: usize) -> Instance {
    let m = random_market(rng);
    match idx % 6 {
        0 => {
            let lo = delta_core_floor(&m);
            let d = rng.gen_range(lo..1.0);
            let mem = delta_family(&m, d).unwrap();
            group_instance(format!("delta core {d:.4}"), m, mem.w1, mem.w2)
        }
        1 => {
            let lo = delta_core_floor(&m);
            let floor = if a_term(&m, 0.0, 1.0) <= m.dist_b().mean() { 0.0 } else { bisect_root(|d| a_term(&m, d, 1.0) - m.dist_b().mean(), Bracket::unit(), Tolerance::tight()).unwrap() + 1e-9 };
            let d = if lo > floor + 1e-6 { rng.gen_range(floor..lo) } else { lo };
            let mem = delta_family(&m, d).unwrap();
            group_instance(format!("delta below floor {d:.4}"), m, mem.w1, mem.w2)
        }
        2 => {
            let w2 = WageFunction::linear(rng.gen_range(0.0..0.9)).unwrap();
            match complete_w1(&m, &w2, None, 1e-7) {
                Ok(c) => {
                    let (w1, w2) = if rng.gen_bool(0.5) {
                        (c.w1, w2)
                    } else {
                        let s = rng.gen_range(0.02..0.2) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                        if rng.gen_bool(0.5) { (shift(&c.w1, s), w2) } else { (c.w1, shift(&w2, s)) }
                    };
                    group_instance("completed pair".into(), m, w1, w2)
                }
                Err(_) => {
                    let mem = delta_family(&m, 0.999).unwrap();
                    group_instance("delta core 0.999".into(), m, mem.w1, mem.w2)
                }
            }
        }
        3 => {
            let split = rng.gen_range(0.1..0.9);
            let mut o = make_bertrand(&m, split).unwrap();
            if rng.gen_bool(0.5) {
                let c = rng.gen_range(0.02..0.3);
                let firm = rng.gen_range(0..2);
                let (lo, hi) = if firm == 0 { (0.0, split) } else { (split, 1.0) };
                let w = shift(&WageFunction::identity(), -c);
                let book = GroupBook::new(HiringPlan::on(lo, hi), w);
                let keep = o.firms[1 - firm].clone();
                let mine = FirmBooks { a: book.clone(), b: book };
                o = if firm == 0 { Outcome::new(mine, keep) } else { Outcome::new(keep, mine) };
            }
            let v = verify_no_epsw_core(&m, &o, 1e-7).unwrap();
            let slack = v.violations.iter().map(|x| x.magnitude).fold(0.0, f64::max);
            Instance { label: format!("bertrand {split:.3}"), market: m, outcome: o, regime: Regime::None, analytic_core: v.is_core, slack }
        }
        _ => {
            let star = w1_star(&m);
            let (w1, w2) = match rng.gen_range(0..3) {
                0 => {
                    let w1 = rng.gen_range(0.0..star);
                    (w1, nongroup_core(&m, w1).unwrap().w2)
                }
                1 => {
                    let w1 = rng.gen_range(star..(star + 0.3).min(0.95));
                    (w1, w2_of_w1(&m, w1).unwrap())
                }
                _ => {
                    let w1 = rng.gen_range(0.0..star);
                    let w2 = w2_of_w1(&m, w1).unwrap();
                    (w1, (w2 + rng.gen_range(-0.15..0.15)).clamp(w1 + 0.01, 1.0))
                }
            };
            let v = verify_nongroup_core(&m, w1, w2, 1e-7).unwrap();
            Instance {
                label: format!("uniform wages {w1:.3}/{w2:.3}"),
                market: m,
                outcome: uniform_wage_outcome(w1, w2),
                regime: Regime::Nongroup,
                analytic_core: v.is_core,
                slack: v.margin,
            }
        }
    }
}
