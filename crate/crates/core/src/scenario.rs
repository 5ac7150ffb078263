//! Scenario files (TOML) and built-in presets.

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::distributions::{DensityPiece, ProductivityDist};
use crate::error::{Error, Result};
use crate::extensions::BiasParams;
use crate::market::{Market, MultiMarket};
use crate::numerics::{econ_tol, Polynomial};
use crate::wages::WageSpec;

pub const PRESETS: [&str; 4] = ["fig2", "uniform2", "remark7", "bias-uniform"];

const FIG2: &str = r#"name = "fig2"
regime = "group"

[market]
beta = 4.0
dist_a = { kind = "uniform" }
dist_b = { kind = "power", k = 5 }

[wages]
w1 = "completed"
w2 = "linear:0.5"
"#;

const UNIFORM2: &str = r#"name = "uniform2"
regime = "group"

[market]
beta = 2.0
dist_a = { kind = "uniform" }
dist_b = { kind = "uniform" }

[wages]
w1 = "cap:0.9"
w2 = "threshold:0.1414213562373095"
"#;

const REMARK7: &str = r#"name = "remark7"
regime = "nongroup"
eps = 0.05

[market]
beta = 10.0
dist_a = { kind = "step", breaks = [0.5], levels = [0.1, 1.9] }
dist_b = { kind = "step", breaks = [0.5], levels = [1.9, 0.1] }
"#;

const BIAS_UNIFORM: &str = r#"name = "bias-uniform"
regime = "bias"
lambda = 0.5

[market]
beta = 2.0
dist_a = { kind = "uniform" }
dist_b = { kind = "uniform" }
"#;

pub fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "fig2" => Some(FIG2),
        "uniform2" => Some(UNIFORM2),
        "remark7" => Some(REMARK7),
        "bias-uniform" => Some(BIAS_UNIFORM),
        _ => None,
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Uniform,
    Power { k: u32 },
    Step { breaks: Vec<f64>, levels: Vec<f64> },
    Poly { pieces: Vec<PolyPiece> },
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PolyPiece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<f64>,
}

impl DistSpec {
    pub fn build(&self) -> Result<ProductivityDist> {
        match self {
            DistSpec::Uniform => Ok(ProductivityDist::uniform()),
            DistSpec::Power { k } => ProductivityDist::power(*k),
            DistSpec::Step { breaks, levels } => ProductivityDist::step(breaks, levels),
            DistSpec::Poly { pieces } => ProductivityDist::from_pieces(
                pieces
                    .iter()
                    .map(|p| DensityPiece { lo: p.lo, hi: p.hi, poly: Polynomial::new(p.coeffs.clone()) })
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarket {
    beta: f64,
    dist_a: DistSpec,
    dist_b: DistSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroup {
    size: f64,
    dist: DistSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMultiMarket {
    n_firms: usize,
    groups: Vec<RawGroup>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWages {
    w1: Option<String>,
    w2: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    grid: Option<usize>,
    bins: Option<usize>,
    econ_tol: Option<f64>,
    strict_regularity: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    regime: Option<String>,
    lambda: Option<f64>,
    eps: Option<f64>,
    market: Option<RawMarket>,
    mmarket: Option<RawMultiMarket>,
    #[serde(default)]
    wages: RawWages,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioRegime {
    None,
    Group,
    Nongroup,
    Hetero,
    Bias,
}

/// Firm 1 wage: a fixed schedule or the profit-equating completion.
#[derive(Debug, Clone, PartialEq)]
pub enum W1Choice {
    Spec(WageSpec),
    Completed,
}

impl std::str::FromStr for W1Choice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "completed" {
            Ok(W1Choice::Completed)
        } else {
            Ok(W1Choice::Spec(s.parse()?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub grid: usize,
    pub bins: usize,
    pub econ_tol: f64,
    pub strict_regularity: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { grid: 2049, bins: 64, econ_tol: econ_tol(), strict_regularity: false }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub regime: ScenarioRegime,
    pub market: Option<Market>,
    pub mmarket: Option<MultiMarket>,
    pub bias: Option<BiasParams>,
    pub eps: Option<f64>,
    pub w1: Option<W1Choice>,
    pub w2: Option<WageSpec>,
    pub solver: SolverSettings,
    /// SHA-256 of the source text.
    pub hash: String,
}

impl Scenario {
    pub fn market(&self) -> Result<&Market> {
        self.market
            .as_ref()
            .ok_or_else(|| Error::Config(format!("scenario `{}` has no [market] table", self.name)))
    }
}

/// Loads a preset by name, or a TOML file by path.
pub fn load(name_or_path: &str) -> Result<Scenario> {
    if let Some(text) = preset_text(name_or_path) {
        return parse_scenario_str(text, name_or_path);
    }
    let text = std::fs::read_to_string(name_or_path).map_err(|e| {
        Error::Config(format!(
            "`{name_or_path}` is neither a preset ({}) nor a readable file: {e}",
            PRESETS.join(", ")
        ))
    })?;
    parse_scenario_str(&text, name_or_path)
}

pub fn parse_scenario(path: &std::path::Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario_str(&text, &path.display().to_string())
}

fn locate(text: &str, key: &str) -> String {
    text.lines()
        .position(|l| {
            let t = l.trim_start();
            t.starts_with(key) && t[key.len()..].trim_start().starts_with('=')
        })
        .map_or_else(String::new, |i| format!(":{}", i + 1))
}

/// Parses and validates a scenario, reporting every violation at once.
pub fn parse_scenario_str(text: &str, origin: &str) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    let mut errs: Vec<String> = Vec::new();
    let at = |key: &str| format!("{origin}{}", locate(text, key));

    let regime = match raw.regime.as_deref().unwrap_or("none") {
        "none" => ScenarioRegime::None,
        "group" => ScenarioRegime::Group,
        "nongroup" => ScenarioRegime::Nongroup,
        "hetero" => ScenarioRegime::Hetero,
        "bias" => ScenarioRegime::Bias,
        other => {
            errs.push(format!("{}: unknown regime `{other}` (none, group, nongroup, hetero, bias)", at("regime")));
            ScenarioRegime::None
        }
    };

    let mut market = None;
    if let Some(rm) = &raw.market {
        if !(rm.beta >= 1.0) {
            errs.push(format!("{}: beta must be >= 1 (got {})", at("beta"), rm.beta));
        }
        let da = rm.dist_a.build().map_err(|e| errs.push(format!("{}: dist_a: {e}", at("dist_a")))).ok();
        let db = rm.dist_b.build().map_err(|e| errs.push(format!("{}: dist_b: {e}", at("dist_b")))).ok();
        if let (Some(a), Some(b)) = (da, db) {
            if rm.beta >= 1.0 {
                market = Market::new(rm.beta, a, b).map_err(|e| errs.push(e.to_string())).ok();
            }
        }
    }
    let mut mmarket = None;
    if let Some(rm) = &raw.mmarket {
        let mut groups = Vec::new();
        for (i, g) in rm.groups.iter().enumerate() {
            match g.dist.build() {
                Ok(d) => groups.push((g.size, d)),
                Err(e) => errs.push(format!("{}: group {i}: {e}", at("groups"))),
            }
        }
        if groups.len() == rm.groups.len() {
            mmarket = MultiMarket::new(rm.n_firms, groups)
                .map_err(|e| errs.push(format!("{}: {e}", at("n_firms"))))
                .ok();
        }
    }
    if market.is_none() && mmarket.is_none() && errs.is_empty() {
        errs.push(format!("{origin}: scenario needs a [market] or [mmarket] table"));
    }

    let bias = match raw.lambda {
        Some(l) => BiasParams::new(l).map_err(|_| errs.push(format!("{}: lambda outside (0,1): {l}", at("lambda")))).ok(),
        None => None,
    };
    if regime == ScenarioRegime::Bias && raw.lambda.is_none() {
        errs.push(format!("{origin}: regime `bias` requires `lambda`"));
    }
    if let Some(e) = raw.eps {
        if !(e > 0.0 && e < 0.1) {
            errs.push(format!("{}: eps must lie in (0, 0.1), got {e}", at("eps")));
        }
    }
    let w1 = raw
        .wages
        .w1
        .as_deref()
        .and_then(|s| s.parse::<W1Choice>().map_err(|e| errs.push(format!("{}: {e}", at("w1")))).ok());
    let w2 = raw
        .wages
        .w2
        .as_deref()
        .and_then(|s| s.parse::<WageSpec>().map_err(|e| errs.push(format!("{}: {e}", at("w2")))).ok());
    if let Some(s) = &w2 {
        if let Err(e) = s.build() {
            errs.push(format!("{}: {e}", at("w2")));
        }
    }
    if let Some(W1Choice::Spec(s)) = &w1 {
        if let Err(e) = s.build() {
            errs.push(format!("{}: {e}", at("w1")));
        }
    }

    let mut solver = SolverSettings::default();
    if let Some(g) = raw.solver.grid {
        if g < 33 {
            errs.push(format!("{}: grid must be at least 33", at("grid")));
        }
        solver.grid = g;
    }
    if let Some(b) = raw.solver.bins {
        if !(8..=256).contains(&b) {
            errs.push(format!("{}: bins must be in [8, 256]", at("bins")));
        }
        solver.bins = b;
    }
    if let Some(t) = raw.solver.econ_tol {
        if !(t > 0.0) {
            errs.push(format!("{}: econ_tol must be positive", at("econ_tol")));
        }
        solver.econ_tol = t;
    }
    if let Some(s) = raw.solver.strict_regularity {
        solver.strict_regularity = s;
    }
    if solver.strict_regularity {
        if let Some(m) = &market {
            for (label, d) in [("dist_a", m.dist_a()), ("dist_b", m.dist_b())] {
                if let Err(e) = d.require_regular() {
                    errs.push(format!("{}: {label}: {e}", at(label)));
                }
            }
        }
    }

    if !errs.is_empty() {
        return Err(Error::Config(errs.join("\n")));
    }
    let hash = format!("{:x}", Sha256::digest(text.as_bytes()));
    Ok(Scenario {
        name: raw.name.unwrap_or_else(|| origin.to_string()),
        regime,
        market,
        mmarket,
        bias,
        eps: raw.eps,
        w1,
        w2,
        solver,
        hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for p in PRESETS {
            let s = load(p).unwrap();
            assert_eq!(s.name, p);
            assert_eq!(s.hash.len(), 64);
        }
        let f = load("fig2").unwrap();
        let m = f.market().unwrap();
        assert_eq!(m.beta(), 4.0);
        assert_eq!(m.dist_b(), &ProductivityDist::power(5).unwrap());
        let u = load("uniform2").unwrap();
        assert_eq!(u.market().unwrap().beta(), 2.0);
    }

    #[test]
    fn all_violations_reported() {
        let text = "regime = \"bias\"\nlambda = 1.5\n[market]\nbeta = 0.5\ndist_a = { kind = \"uniform\" }\ndist_b = { kind = \"step\", breaks = [0.5], levels = [1.0, 1.2] }\n";
        let e = parse_scenario_str(text, "bad.toml").unwrap_err().to_string();
        assert!(e.contains("lambda outside (0,1)"), "{e}");
        assert!(e.contains("bad.toml:2"), "{e}");
        assert!(e.contains("beta must be >= 1"), "{e}");
        assert!(e.contains("dist_b"), "{e}");
    }

    #[test]
    fn unknown_distribution_kind() {
        let text = "[market]\nbeta = 1.0\ndist_a = { kind = \"lognormal\" }\ndist_b = { kind = \"uniform\" }\n";
        let e = parse_scenario_str(text, "x.toml").unwrap_err().to_string();
        assert!(e.contains("lognormal"), "{e}");
    }
}
