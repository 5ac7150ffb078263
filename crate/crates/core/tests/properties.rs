mod common;

use epsw_core::distributions::ProductivityDist;
use epsw_core::extensions::{bias_group_family, bias_no_epsw_core, BiasParams};
use epsw_core::group_epsw::{
    b_term_nonincreasing, build_phi_curve, delta_family, phi, verify_group_core, PhiCurve,
};
use epsw_core::market::{accounting, FirmBooks, GroupBook, HiringInterval, HiringPlan, Market, Outcome};
use epsw_core::no_epsw::{make_bertrand, verify_no_epsw_core};
use epsw_core::nongroup::{nongroup_core, w1_star};
use epsw_core::numerics::{bisect_root, integrate_piecewise, running_right_infimum, Bracket, Polynomial, Segment, Tolerance};
use epsw_core::oracle::{oracle_is_core, Regime};
use epsw_core::wages::WageFunction;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn market(seed: u64) -> Market {
    common::random_market(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn monotone_wage(raw: &[(f64, f64)]) -> WageFunction {
    let mut vs: Vec<f64> = raw.iter().map(|p| p.0).collect();
    let mut ws: Vec<f64> = raw.iter().map(|p| p.1).collect();
    vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut knots = vec![(0.0, 0.0)];
    knots.extend(vs.into_iter().zip(ws));
    knots.push((1.0, knots.last().unwrap().1));
    WageFunction::from_knots(knots).unwrap()
}

/// Monotone and below the identity.
fn ir_wage(raw: &[(f64, f64)]) -> WageFunction {
    let w = monotone_wage(raw);
    let knots = w.knots().iter().map(|&(v, x)| (v, x * v)).collect();
    WageFunction::from_knots(knots).unwrap()
}

fn knots_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integration_is_additive(coeffs in prop::collection::vec(-3.0..3.0f64, 1..6), a in 0.0..0.3f64, b in 0.3..0.6f64, c in 0.6..1.0f64) {
        let p = Polynomial::new(coeffs);
        let i = |lo: f64, hi: f64| integrate_piecewise(&[Segment::new(lo, hi, p.clone())]).unwrap();
        prop_assert!((i(a, c) - i(a, b) - i(b, c)).abs() < 1e-12);
    }

    #[test]
    fn bisection_finds_monotone_roots(root in 0.01..0.99f64, k in 1i32..6) {
        let x = bisect_root(|x| x.powi(k) - root.powi(k), Bracket::unit(), Tolerance::with_abs(1e-12)).unwrap();
        prop_assert!((x - root).abs() <= 1e-11);
    }

    #[test]
    fn running_infimum_is_the_largest_monotone_minorant(ys in prop::collection::vec(-5.0..5.0f64, 1..40)) {
        let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
        let z = running_right_infimum(&xs, &ys).unwrap();
        prop_assert!(z.iter().zip(&ys).all(|(a, b)| a <= b));
        prop_assert!(z.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(running_right_infimum(&xs, &z).unwrap(), z);
    }

    #[test]
    fn cdf_and_pooled_mean(seed in any::<u64>()) {
        let m = market(seed);
        for d in [m.dist_a(), m.dist_b()] {
            prop_assert!(d.cdf(0.0).abs() < 1e-12 && (d.cdf(1.0) - 1.0).abs() < 1e-12);
            let mut prev = 0.0;
            for i in 0..=1000 {
                let c = d.cdf(i as f64 / 1000.0);
                prop_assert!(c >= prev - 1e-12);
                prev = c;
            }
        }
        let b = m.beta();
        let want = (b * m.dist_a().mean() + m.dist_b().mean()) / (1.0 + b);
        prop_assert!((m.pooled().mean() - want).abs() < 1e-12);
    }

    #[test]
    fn step_moment_is_weighted_sum(cuts in prop::collection::vec(0.05..0.95f64, 1..4), raw in prop::collection::vec(0.1..3.0f64, 4)) {
        let mut br = cuts.clone();
        br.sort_by(|a, b| a.partial_cmp(b).unwrap());
        br.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let edges: Vec<f64> = std::iter::once(0.0).chain(br.iter().copied()).chain(std::iter::once(1.0)).collect();
        let widths: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
        let mass: f64 = widths.iter().zip(&raw).map(|(w, l)| w * l).sum();
        let levels: Vec<f64> = raw[..widths.len()].iter().map(|l| l / mass).collect();
        let d = ProductivityDist::step(&br, &levels).unwrap();
        let want: f64 = edges.windows(2).zip(&levels).map(|(e, l)| l * (e[1] * e[1] - e[0] * e[0]) / 2.0).sum();
        prop_assert!((d.moment(1) - want).abs() < 1e-12);
    }

    #[test]
    fn generalized_inverse_properties(raw in knots_strategy()) {
        let w = monotone_wage(&raw);
        let ir = ir_wage(&raw);
        let mut prev = 0.0;
        for i in 0..=200 {
            let e = i as f64 / 200.0;
            let x = w.generalized_inverse(e);
            prop_assert!(x >= prev);
            prev = x;
            prop_assert!(ir.generalized_inverse(e) >= e - 1e-12);
        }
    }

    #[test]
    fn inverse_of_increasing_wage(slope in 0.1..1.0f64, e in 0.01..0.09f64) {
        let w = WageFunction::linear(slope).unwrap();
        let x = w.generalized_inverse(e);
        prop_assert!((w.at(x) - e).abs() < 1e-9);
    }

    #[test]
    fn flatten_keeps_shape(raw in knots_strategy(), vbar in 0.0..1.0f64) {
        let w = ir_wage(&raw).flatten_above(vbar).unwrap();
        prop_assert!(w.individual_rationality(1e-12).ok);
        prop_assert!(w.knots().windows(2).all(|k| k[0].1 <= k[1].1 + 1e-15));
    }

    #[test]
    fn segregated_accounting(seed in any::<u64>(), r1 in knots_strategy(), r2 in knots_strategy()) {
        let m = market(seed);
        let o = Outcome::segregated(ir_wage(&r1), ir_wage(&r2));
        let r = accounting(&m, &o).unwrap();
        prop_assert!((r.profit_1 - (r.ts_a - m.beta() * r.aw_a)).abs() < 1e-9);
        prop_assert!((r.profit_2 - (r.ts_b - r.aw_b)).abs() < 1e-9);
        prop_assert!((r.gap - (r.aw_a - r.aw_b)).abs() < 1e-12);
    }

    #[test]
    fn accounting_is_linear_in_shares(seed in any::<u64>(), s in 0.0..1.0f64) {
        let m = market(seed);
        let book = |share: f64| GroupBook::new(
            HiringPlan::new(vec![HiringInterval { lo: 0.0, hi: 1.0, share }]).unwrap(),
            WageFunction::linear(0.5).unwrap(),
        );
        let o = |share: f64| Outcome::new(FirmBooks { a: book(share), b: book(share) }, FirmBooks { a: GroupBook::empty(), b: GroupBook::empty() });
        let full = accounting(&m, &o(1.0)).unwrap().profit_1;
        let part = accounting(&m, &o(s)).unwrap().profit_1;
        prop_assert!((part - s * full).abs() < 1e-12);
    }

    #[test]
    fn overhiring_is_detected(lo in 0.0..0.5f64, len in 0.01..0.5f64, s1 in 0.2..1.0f64, extra in 0.01..0.8f64) {
        let hi = lo + len;
        let s2 = (1.0 - s1 + extra).min(1.0);
        prop_assume!(s1 + s2 > 1.0 + 1e-6);
        let book = |share: f64| GroupBook::new(
            HiringPlan::new(vec![HiringInterval { lo, hi, share }]).unwrap(),
            WageFunction::identity(),
        );
        let o = Outcome::new(FirmBooks { a: book(s1), b: GroupBook::empty() }, FirmBooks { a: book(s2), b: GroupBook::empty() });
        prop_assert!(o.check_feasible().is_err());
    }

    #[test]
    fn bertrand_is_always_core(seed in any::<u64>(), split in 0.0..1.0f64) {
        let m = market(seed);
        let o = make_bertrand(&m, split).unwrap();
        prop_assert!(verify_no_epsw_core(&m, &o, 1e-9).unwrap().is_core);
        prop_assert!((accounting(&m, &o).unwrap().gap - m.mean_gap()).abs() < 1e-9);
    }

    #[test]
    fn delta_family_comonotone(d1 in 0.6..1.0f64, d2 in 0.6..1.0f64, beta in 1.1..4.0f64) {
        let m = common::uniform_market(beta);
        let (a, b) = (delta_family(&m, d1).unwrap(), delta_family(&m, d2).unwrap());
        prop_assume!(a.is_core_supportable && b.is_core_supportable && (d1 - d2).abs() > 1e-6);
        let dg = a.gap - b.gap;
        let dp = a.profit - b.profit;
        prop_assert!(dg * dp > 0.0, "gap diff {dg} profit diff {dp}");
        for mem in [&a, &b] {
            prop_assert!(mem.gap >= m.mean_gap() - 1e-7);
        }
    }

    #[test]
    fn nongroup_sweeps_are_ordered(seed in any::<u64>(), t1 in 0.0..1.0f64, t2 in 0.0..1.0f64) {
        let m = market(seed);
        let star = w1_star(&m);
        let (lo, hi) = (t1.min(t2) * star, t1.max(t2) * star);
        prop_assume!(hi - lo > 1e-4);
        let (a, b) = (nongroup_core(&m, lo).unwrap(), nongroup_core(&m, hi).unwrap());
        prop_assert!(b.unemployed_measure > a.unemployed_measure);
        prop_assert!(b.profit < a.profit);
        for c in [&a, &b] {
            prop_assert!(c.w1 < c.w2 && c.w2 < 1.0);
        }
    }

    #[test]
    fn bias_wages_within_bounds(lambda in 0.01..0.99f64, vbar in 0.0..1.0f64) {
        let m = common::uniform_market(2.0);
        let c = bias_no_epsw_core(&m, BiasParams::new(lambda).unwrap(), vbar).unwrap();
        let w2 = &c.outcome.book(1, epsw_core::market::Group::B).wage;
        for i in 0..=200 {
            let v = i as f64 / 200.0;
            let w = w2.at(v);
            prop_assert!(w >= (v - lambda).max(0.0) - 1e-12 && w <= v + 1e-12);
        }
    }
}

fn curve(seed: u64) -> (Market, WageFunction, PhiCurve) {
    let m = market(seed);
    let w2 = WageFunction::linear(0.3 + (seed % 5) as f64 * 0.1).unwrap();
    let c = build_phi_curve(&m, &w2, 257).unwrap();
    (m, w2, c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn phi_curve_shape(seed in any::<u64>()) {
        let (m, w2, c) = curve(seed);
        for (i, e) in c.eps_grid.iter().enumerate() {
            prop_assert!(c.phi[i] >= e - 1e-12);
            prop_assert!(c.w1hat_inv[i] <= c.phi[i] + 1e-12);
            if *e >= c.e_cap + 1e-9 {
                prop_assert!((c.phi[i] - 1.0).abs() < 1e-12);
            }
        }
        prop_assert!(c.w1hat_inv.windows(2).all(|w| w[0] <= w[1]));
        if b_term_nonincreasing(&m, &w2, 257) {
            for (i, e) in c.eps_grid.iter().enumerate() {
                if *e < c.e_cap {
                    prop_assert!((c.phi[i] - c.w1hat_inv[i]).abs() < 1e-6);
                }
            }
        }
    }

    // The minorant agrees with `inf_{e' >= e} phi(e')` at off-grid points.
    #[test]
    fn inverse_is_right_infimum_of_phi(seed in any::<u64>(), picks in prop::collection::vec(0.0..1.0f64, 100)) {
        let (m, w2, c) = curve(seed);
        let n = c.len() - 1;
        for t in picks {
            let i = (t * n as f64).floor() as usize;
            let e = c.eps_grid[i];
            let later = e + t.fract() * (1.0 - e);
            prop_assert!(c.w1hat_inv[i] <= phi(&m, &w2, later) + 1e-9);
        }
    }

    #[test]
    fn threshold_profit_grows_with_beta(seed in any::<u64>()) {
        let m = market(seed);
        let w2 = WageFunction::linear(0.5).unwrap();
        let mut prev = 0.0;
        for k in 0..10 {
            let beta = 1.0 + k as f64 * 0.5;
            let c = build_phi_curve(&m.with_beta(beta).unwrap(), &w2, 257).unwrap();
            prop_assert!(c.pi1_hat >= prev - 1e-9, "beta {beta}: {} < {prev}", c.pi1_hat);
            prev = c.pi1_hat;
        }
    }

    #[test]
    fn bias_family_gap_falls_toward_floor(beta in 1.0..3.0f64, lambda in 0.2..0.8f64) {
        let m = common::uniform_market(beta);
        let b = BiasParams::new(lambda).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let v1 = 0.99 + 0.001 * k as f64;
            let f = bias_group_family(&m, b, v1).unwrap();
            prop_assert!(f.gap < prev);
            prop_assert!(f.gap > f.g_breve);
            prev = f.gap;
        }
    }

    #[test]
    fn oracle_refinement_keeps_blocks(seed in any::<u64>(), idx in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = common::random_instance(&mut rng, idx);
        let coarse = oracle_is_core(&inst.market, &inst.outcome, inst.regime, 32, None, 1e-7).unwrap();
        if !coarse.core_at_resolution {
            let fine = oracle_is_core(&inst.market, &inst.outcome, inst.regime, 64, None, 1e-7).unwrap();
            prop_assert!(!fine.core_at_resolution, "{}", inst.label);
        }
    }

    #[test]
    fn verified_delta_members_pass_the_oracle(beta in 1.0..4.0f64, t in 0.0..1.0f64) {
        let m = common::uniform_market(beta);
        let floor = common::delta_core_floor(&m);
        let d = delta_family(&m, floor + 0.05 + t * (0.95 - floor)).unwrap();
        prop_assert!(verify_group_core(&m, &d.w1, &d.w2, 1e-7).is_core);
        let o = oracle_is_core(&m, &d.outcome(), Regime::Group, 64, None, 1e-7).unwrap();
        prop_assert!(o.core_at_resolution);
    }

    #[test]
    fn uniform_wage_cores_pass_the_oracle(seed in any::<u64>(), t in 0.0..1.0f64) {
        let m = market(seed);
        let c = nongroup_core(&m, t * w1_star(&m)).unwrap();
        let o = oracle_is_core(&m, &c.outcome(), Regime::Nongroup, 64, None, 1e-7).unwrap();
        prop_assert!(o.core_at_resolution, "{:?}", o.certificate);
    }
}
