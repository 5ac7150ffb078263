//! Monotone piecewise-linear wage schedules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const KNOT_TOL: f64 = 1e-12;

/// Non-decreasing piecewise-linear map [0, 1] -> [0, 1].
///
/// Repeated abscissae encode jumps; evaluation is right-continuous, so the
/// last knot at a repeated `v` is the value taken there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WageKnots", into = "WageKnots")]
pub struct WageFunction {
    knots: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct WageKnots {
    knots: Vec<[f64; 2]>,
}

impl TryFrom<WageKnots> for WageFunction {
    type Error = Error;
    fn try_from(k: WageKnots) -> Result<Self> {
        WageFunction::from_knots(k.knots.into_iter().map(|[v, w]| (v, w)).collect())
    }
}

impl From<WageFunction> for WageKnots {
    fn from(w: WageFunction) -> Self {
        WageKnots { knots: w.knots.iter().map(|&(v, w)| [v, w]).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrWitness {
    pub v: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrCheck {
    pub ok: bool,
    pub witness: IrWitness,
}

impl WageFunction {
    pub fn from_knots(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Wage("need at least two knots".into()));
        }
        for &(v, w) in &knots {
            if !(v.is_finite() && w.is_finite()) {
                return Err(Error::Wage("non-finite knot".into()));
            }
            if !(-KNOT_TOL..=1.0 + KNOT_TOL).contains(&v) || !(-KNOT_TOL..=1.0 + KNOT_TOL).contains(&w) {
                return Err(Error::Wage(format!("knot ({v}, {w}) outside [0,1]^2")));
            }
        }
        if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return Err(Error::Wage("knots must span v = 0 to v = 1".into()));
        }
        for (i, k) in knots.windows(2).enumerate() {
            if k[1].0 < k[0].0 {
                return Err(Error::Wage(format!("abscissae decrease at knot {}", i + 1)));
            }
            if k[1].1 < k[0].1 - KNOT_TOL {
                return Err(Error::Wage(format!(
                    "wage decreases between v = {} and v = {} (not monotone)",
                    k[0].0,
                    k[1].0
                )));
            }
        }
        let knots = knots
            .into_iter()
            .map(|(v, w)| (v.clamp(0.0, 1.0), w.clamp(0.0, 1.0)))
            .collect::<Vec<_>>();
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(knots.len());
        for (v, w) in knots {
            let w = out.last().map_or(w, |p| w.max(p.1));
            // drop redundant triples at the same abscissa
            if out.len() >= 2 && out[out.len() - 1].0 == v && out[out.len() - 2].0 == v {
                out.last_mut().unwrap().1 = w;
            } else {
                out.push((v, w));
            }
        }
        Ok(WageFunction { knots: out })
    }

    pub fn identity() -> Self {
        WageFunction { knots: vec![(0.0, 0.0), (1.0, 1.0)] }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        let c = c.clamp(0.0, 1.0);
        WageFunction { knots: vec![(0.0, c), (1.0, c)] }
    }

    pub fn linear(slope: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&slope) {
            return Err(Error::Wage(format!("slope {slope} outside [0, 1]")));
        }
        Ok(WageFunction { knots: vec![(0.0, 0.0), (1.0, slope)] })
    }

    /// `min(v, delta)`.
    pub fn cap(delta: f64) -> Result<Self> {
        check_unit("cap", delta)?;
        Self::from_knots(vec![(0.0, 0.0), (delta, delta), (1.0, delta)])
    }

    /// `v * 1[v >= delta]`.
    pub fn threshold(delta: f64) -> Result<Self> {
        check_unit("threshold", delta)?;
        Self::from_knots(vec![(0.0, 0.0), (delta, 0.0), (delta, delta), (1.0, 1.0)])
    }

    /// `max(0, v - lambda)`.
    pub fn shifted(lambda: f64) -> Result<Self> {
        check_unit("shift", lambda)?;
        Self::from_knots(vec![(0.0, 0.0), (lambda, 0.0), (1.0, 1.0 - lambda)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.knots.iter().all(|(v, w)| (v - w).abs() <= tol)
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, v: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain { v });
        }
        Ok(self.at(v))
    }

    /// Evaluation with `v` clamped into [0, 1].
    pub fn at(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, 1.0);
        let k = &self.knots;
        let i = k.partition_point(|p| p.0 <= v);
        if i == 0 {
            return k[0].1;
        }
        if i >= k.len() {
            return k[k.len() - 1].1;
        }
        let (v0, w0) = k[i - 1];
        let (v1, w1) = k[i];
        w0 + (w1 - w0) * (v - v0) / (v1 - v0)
    }

    /// Left limit at `v` (the value itself at `v = 0`).
    pub fn left_limit(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, 1.0);
        let k = &self.knots;
        let i = k.partition_point(|p| p.0 < v);
        if i == 0 {
            return k[0].1;
        }
        if i >= k.len() {
            return k[k.len() - 1].1;
        }
        let (v0, w0) = k[i - 1];
        let (v1, w1) = k[i];
        w0 + (w1 - w0) * (v - v0) / (v1 - v0)
    }

    /// Abscissae where the slope or value may change.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.knots.iter().map(|k| k.0).collect();
        b.dedup();
        b
    }

    /// `sup { v : w(v) <= eps }`, or 0 if the set is empty.
    pub fn generalized_inverse(&self, eps: f64) -> f64 {
        let k = &self.knots;
        if self.at(0.0) > eps {
            return 0.0;
        }
        if self.at(1.0) <= eps {
            return 1.0;
        }
        let j = k.partition_point(|p| p.1 <= eps);
        let (v0, w0) = k[j - 1];
        let (v1, w1) = k[j];
        if v1 == v0 {
            return v1;
        }
        (v0 + (eps - w0) / (w1 - w0) * (v1 - v0)).clamp(v0, v1)
    }

    /// Checks `w(v) <= v + tol`; the witness is the worst point.
    pub fn individual_rationality(&self, tol: f64) -> IrCheck {
        let mut worst = IrWitness { v: 0.0, violation: f64::NEG_INFINITY };
        for &(v, w) in &self.knots {
            if w - v > worst.violation {
                worst = IrWitness { v, violation: w - v };
            }
        }
        IrCheck { ok: worst.violation <= tol, witness: worst }
    }

    /// `sup_v (v - w(v))`, the largest shortfall below productivity.
    pub fn max_shortfall(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, &(v, w)) in self.knots.iter().enumerate() {
            best = best.max(v - w);
            if i > 0 {
                best = best.max(v - self.knots[i - 1].1.max(self.left_limit(v)));
            }
        }
        best
    }

    /// `w` up to `vbar`, constant at `w(vbar)` beyond.
    pub fn flatten_above(&self, vbar: f64) -> Result<Self> {
        check_unit("vbar", vbar)?;
        if vbar >= 1.0 {
            return Ok(self.clone());
        }
        let c = self.at(vbar);
        let mut knots: Vec<(f64, f64)> = self.knots.iter().copied().filter(|k| k.0 < vbar).collect();
        if knots.is_empty() {
            knots.push((0.0, c));
        } else {
            knots.push((vbar, self.left_limit(vbar)));
            knots.push((vbar, c));
        }
        knots.push((1.0, c));
        Self::from_knots(knots)
    }

    /// `w` below `x`, identity from `x` on.
    pub fn splice_identity_from(&self, x: f64) -> Result<Self> {
        check_unit("splice point", x)?;
        if x <= 0.0 {
            return Ok(Self::identity());
        }
        let mut knots: Vec<(f64, f64)> = self.knots.iter().copied().filter(|k| k.0 < x).collect();
        knots.push((x, self.left_limit(x).min(x)));
        knots.push((x, x));
        if x < 1.0 {
            knots.push((1.0, 1.0));
        }
        Self::from_knots(knots)
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Wage(format!("{name} parameter {x} outside [0, 1]")));
    }
    Ok(())
}

/// Textual wage descriptor used by configs and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WageSpec {
    Identity,
    Zero,
    Linear { slope: f64 },
    Cap { delta: f64 },
    Threshold { delta: f64 },
    Shifted { lambda: f64 },
    Knots { knots: Vec<[f64; 2]> },
}

impl WageSpec {
    pub fn build(&self) -> Result<WageFunction> {
        match self {
            WageSpec::Identity => Ok(WageFunction::identity()),
            WageSpec::Zero => Ok(WageFunction::zero()),
            WageSpec::Linear { slope } => WageFunction::linear(*slope),
            WageSpec::Cap { delta } => WageFunction::cap(*delta),
            WageSpec::Threshold { delta } => WageFunction::threshold(*delta),
            WageSpec::Shifted { lambda } => WageFunction::shifted(*lambda),
            WageSpec::Knots { knots } => {
                WageFunction::from_knots(knots.iter().map(|k| (k[0], k[1])).collect())
            }
        }
    }
}

impl FromStr for WageSpec {
    type Err = Error;

    /// `identity`, `zero`, `linear:0.5`, `cap:0.9`, `threshold:0.1`,
    /// `shifted:0.2`, `knots:0,0;0.5,0.1;1,1`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::Wage(format!("`{kind}` needs a numeric argument")))?
                .parse::<f64>()
                .map_err(|e| Error::Wage(format!("bad number in `{s}`: {e}")))
        };
        match kind {
            "identity" => Ok(WageSpec::Identity),
            "zero" => Ok(WageSpec::Zero),
            "linear" => Ok(WageSpec::Linear { slope: num(arg)? }),
            "cap" => Ok(WageSpec::Cap { delta: num(arg)? }),
            "threshold" => Ok(WageSpec::Threshold { delta: num(arg)? }),
            "shifted" => Ok(WageSpec::Shifted { lambda: num(arg)? }),
            "knots" => {
                let body = arg.ok_or_else(|| Error::Wage("knots need a list".into()))?;
                let knots = body
                    .split(';')
                    .map(|pair| {
                        let (a, b) = pair
                            .split_once(',')
                            .ok_or_else(|| Error::Wage(format!("bad knot `{pair}`")))?;
                        let a = a.trim().parse::<f64>().map_err(|e| Error::Wage(e.to_string()))?;
                        let b = b.trim().parse::<f64>().map_err(|e| Error::Wage(e.to_string()))?;
                        Ok([a, b])
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(WageSpec::Knots { knots })
            }
            _ => Err(Error::Wage(format!("unknown wage kind `{kind}`"))),
        }
    }
}

impl fmt::Display for WageSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WageSpec::Identity => write!(f, "identity"),
            WageSpec::Zero => write!(f, "zero"),
            WageSpec::Linear { slope } => write!(f, "linear:{slope}"),
            WageSpec::Cap { delta } => write!(f, "cap:{delta}"),
            WageSpec::Threshold { delta } => write!(f, "threshold:{delta}"),
            WageSpec::Shifted { lambda } => write!(f, "shifted:{lambda}"),
            WageSpec::Knots { knots } => {
                let parts: Vec<String> = knots.iter().map(|k| format!("{},{}", k[0], k[1])).collect();
                write!(f, "knots:{}", parts.join(";"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let half = WageFunction::linear(0.5).unwrap();
        assert!((half.eval(0.8).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(WageFunction::zero().eval(0.7).unwrap(), 0.0);
        assert_eq!(WageFunction::identity().eval(0.37).unwrap(), 0.37);
        assert!(matches!(half.eval(1.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn jumps_take_upper_value() {
        let t = WageFunction::threshold(0.4).unwrap();
        assert_eq!(t.at(0.4), 0.4);
        assert_eq!(t.left_limit(0.4), 0.0);
        assert_eq!(t.at(0.39), 0.0);
    }

    #[test]
    fn inverse_examples() {
        let half = WageFunction::linear(0.5).unwrap();
        assert!((half.generalized_inverse(0.25) - 0.5).abs() < 1e-15);
        assert_eq!(half.generalized_inverse(0.6), 1.0);
        assert_eq!(WageFunction::zero().generalized_inverse(0.0), 1.0);
        // closed sublevel set at a plateau
        let c = WageFunction::cap(0.3).unwrap();
        assert_eq!(c.generalized_inverse(0.3), 1.0);
        assert!((c.generalized_inverse(0.2) - 0.2).abs() < 1e-15);
        // jump: sublevel set is [0, 0.4)
        let t = WageFunction::threshold(0.4).unwrap();
        assert_eq!(t.generalized_inverse(0.1), 0.4);
        // empty sublevel set
        assert_eq!(WageFunction::constant(0.5).generalized_inverse(0.2), 0.0);
    }

    #[test]
    fn ir_examples() {
        assert!(WageFunction::linear(0.5).unwrap().individual_rationality(1e-7).ok);
        assert!(WageFunction::identity().individual_rationality(1e-7).ok);
        let bad = WageFunction::from_knots(vec![(0.0, 0.1), (0.9, 1.0), (1.0, 1.0)]).unwrap();
        let r = bad.individual_rationality(1e-7);
        assert!(!r.ok);
        assert!((r.witness.violation - 0.1).abs() < 1e-12);
    }

    #[test]
    fn flatten_examples() {
        let id = WageFunction::identity();
        assert!((id.flatten_above(0.6).unwrap().at(0.9) - 0.6).abs() < 1e-15);
        assert_eq!(id.flatten_above(1.0).unwrap(), id);
        let s = WageFunction::shifted(0.5).unwrap().flatten_above(0.8).unwrap();
        for v in [0.8, 0.9, 1.0] {
            assert!((s.at(v) - 0.3).abs() < 1e-15);
        }
        assert!((s.at(0.7) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn non_monotone_rejected() {
        assert!(WageFunction::from_knots(vec![(0.0, 0.5), (0.5, 0.2), (1.0, 1.0)]).is_err());
        assert!(WageFunction::from_knots(vec![(0.0, 0.0), (0.8, 0.5)]).is_err());
    }

    #[test]
    fn shortfall_sees_jumps() {
        assert!((WageFunction::threshold(0.4).unwrap().max_shortfall() - 0.4).abs() < 1e-15);
        assert!((WageFunction::cap(0.7).unwrap().max_shortfall() - 0.3).abs() < 1e-15);
        assert_eq!(WageFunction::identity().max_shortfall(), 0.0);
    }

    #[test]
    fn spec_round_trip() {
        for s in ["identity", "zero", "linear:0.5", "cap:0.9", "threshold:0.1", "shifted:0.2", "knots:0,0;0.5,0.1;1,1"] {
            let spec: WageSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
            spec.build().unwrap();
        }
        assert!("bogus".parse::<WageSpec>().is_err());
    }
}
