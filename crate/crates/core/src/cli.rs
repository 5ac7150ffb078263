//! Command-line front end for the `epsw` binary.
//!
//! JSON results go to stdout (or `--out`) wrapped as `{"manifest", "result"}`.
//! CSV results go to `--out` with a `<out>.manifest.json` sidecar, or to
//! stdout with the manifest on stderr. Exit codes: 0 success, 2 negative
//! verdict, 1 error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::extensions::{bias_gap_interval, bias_group_family, hetero_outcome, hetero_verify, BiasParams};
use crate::group_epsw::{
    a_term, beta_star, build_phi_curve_with, complete_w1, core_exists_with, delta_family, segregated_outcome,
    verify_group_core_with, PhiOptions,
};
use crate::market::{accounting, Market, MultiMarket, Outcome};
use crate::no_epsw::{make_bertrand, verify_no_epsw_core};
use crate::nongroup::{anything_goes_scenarios, multifirm_core, nongroup_core, nongroup_sweep, w1_star};
use crate::numerics::{bisect_root, Bracket, Tolerance};
use crate::oracle::{oracle_is_core, Regime};
use crate::scenario::{self, Scenario, ScenarioRegime, W1Choice};
use crate::wages::{WageFunction, WageSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;

pub const PHI_HEADER: &str = "epsilon,phi,w1hat_inv,ndc_slack";
pub const SWEEP_HEADER: &str = "w1,w2,profit,unemployment,gap";
pub const DELTA_HEADER: &str = "delta,delta_prime,profit,gap,is_core";

#[derive(Debug, Parser)]
#[command(name = "epsw", version, about = "Core outcomes of a two-firm labor market under equal-pay rules")]
pub struct Cli {
    /// Preset name (fig2, uniform2, remark7, bias-uniform) or path to a TOML scenario.
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    /// Output file; CSV outputs also get `<out>.manifest.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Override the phi grid size.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Override the oracle resolution.
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    /// Record wall time in the manifest (makes output non-reproducible).
    #[arg(long, global = true)]
    pub record_time: bool,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Bertrand outcome with identity wages, split at `--split`.
    Bertrand {
        #[arg(long, default_value_t = 0.5)]
        split: f64,
    },
    /// Sample phi, its monotone minorant and the NDC slack (CSV).
    PhiCurve {
        #[arg(long)]
        w2: Option<String>,
    },
    /// Whether a core outcome supports the B wage schedule.
    GroupExists {
        #[arg(long)]
        w2: Option<String>,
    },
    /// Check IR, equal profit and no desegregation for a segregated pair.
    GroupVerify {
        /// Wage descriptor or `completed`.
        #[arg(long)]
        w1: Option<String>,
        #[arg(long)]
        w2: Option<String>,
    },
    /// Cap/threshold family: one member (JSON) or a sweep (CSV).
    DeltaFamily {
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 20)]
        points: usize,
    },
    /// Smallest A-group size at which the B wage schedule is supportable.
    BetaStar {
        #[arg(long)]
        w2: Option<String>,
        #[arg(long, default_value_t = 1024.0)]
        beta_hi: f64,
    },
    /// Uniform-wage core with low wage `--w1`.
    Nongroup {
        #[arg(long, default_value_t = 0.0)]
        w1: f64,
    },
    /// Sweep of uniform-wage cores over `[0, w1*]` (CSV).
    NongroupSweep {
        #[arg(long, default_value_t = 20)]
        points: usize,
    },
    /// n-firm uniform-wage core.
    Multifirm {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        w1: f64,
    },
    /// Two uniform-wage cores of the step market straddling the benchmark gap.
    Remark7 {
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Gap interval over no-EPSW cores under bias.
    BiasInterval {
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Group-EPSW core family under bias.
    BiasFamily {
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0.95)]
        vbar1: f64,
    },
    /// Verify a core under heterogeneous treatment.
    HeteroVerify {
        /// Outcome JSON; defaults to firm 1 hiring A on `[lo, hi)`.
        #[arg(long)]
        outcome: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        lo: f64,
        #[arg(long, default_value_t = 1.0)]
        hi: f64,
    },
    /// Brute-force blocking search on a discretized market.
    Oracle {
        #[arg(long)]
        outcome: Option<PathBuf>,
        /// none, group or nongroup; defaults to the scenario's regime.
        #[arg(long)]
        regime: Option<String>,
    },
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Bertrand { .. } => "bertrand",
            Cmd::PhiCurve { .. } => "phi-curve",
            Cmd::GroupExists { .. } => "group-exists",
            Cmd::GroupVerify { .. } => "group-verify",
            Cmd::DeltaFamily { .. } => "delta-family",
            Cmd::BetaStar { .. } => "beta-star",
            Cmd::Nongroup { .. } => "nongroup",
            Cmd::NongroupSweep { .. } => "nongroup-sweep",
            Cmd::Multifirm { .. } => "multifirm",
            Cmd::Remark7 { .. } => "remark7",
            Cmd::BiasInterval { .. } => "bias-interval",
            Cmd::BiasFamily { .. } => "bias-family",
            Cmd::HeteroVerify { .. } => "hetero-verify",
            Cmd::Oracle { .. } => "oracle",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToleranceSet {
    pub econ_tol: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub grid: usize,
    pub bins: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub scenario: String,
    pub scenario_hash: String,
    pub tool_version: &'static str,
    pub tolerances: ToleranceSet,
    /// Seconds; `null` unless `--record-time` was given.
    pub wall_time: Option<f64>,
}

/// A command result before serialization.
pub enum Artifact {
    Json(Value),
    Csv { header: &'static str, rows: Vec<Vec<Cell>>, summary: Value },
}

pub enum Cell {
    Num(f64),
    Bool(bool),
}

struct CmdResult {
    artifact: Artifact,
    negative: bool,
}

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// 12 significant digits, shortest round-trip representation.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        let r = round12(x);
        if r == 0.0 { "0".into() } else { format!("{r:?}") }
    }
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round12(n.as_f64().unwrap_or(0.0));
            serde_json::Number::from_f64(if x == 0.0 { 0.0 } else { x }).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| Error::Io(e.to_string()))
}

fn render_csv(header: &str, rows: &[Vec<Cell>]) -> String {
    let mut s = String::with_capacity(32 * (rows.len() + 1));
    s.push_str(header);
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r
            .iter()
            .map(|c| match c {
                Cell::Num(x) => fmt_num(*x),
                Cell::Bool(b) => b.to_string(),
            })
            .collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn pretty(v: &Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

struct Ctx<'a> {
    sc: &'a Scenario,
    grid: usize,
    bins: usize,
    tol: f64,
}

impl Ctx<'_> {
    fn market(&self) -> Result<&Market> {
        self.sc.market()
    }

    fn w2(&self, flag: &Option<String>) -> Result<WageFunction> {
        match flag {
            Some(s) => s.parse::<WageSpec>()?.build(),
            None => self.sc.w2.as_ref().map_or(Ok(WageFunction::zero()), |s| s.build()),
        }
    }

    fn w1(&self, flag: &Option<String>, w2: &WageFunction) -> Result<(WageFunction, Option<f64>)> {
        let choice = match flag {
            Some(s) => s.parse::<W1Choice>()?,
            None => self.sc.w1.clone().unwrap_or(W1Choice::Completed),
        };
        match choice {
            W1Choice::Spec(s) => Ok((s.build()?, None)),
            W1Choice::Completed => {
                let m = self.market()?;
                let curve = build_phi_curve_with(m, w2, self.phi_opts())?;
                let c = complete_w1(m, w2, Some(&curve), self.tol)?;
                Ok((c.w1, Some(c.x_star)))
            }
        }
    }

    fn phi_opts(&self) -> PhiOptions {
        PhiOptions { grid: self.grid, ..PhiOptions::default() }
    }

    fn bias(&self, flag: Option<f64>) -> Result<BiasParams> {
        match flag {
            Some(l) => BiasParams::new(l),
            None => Ok(self.sc.bias.unwrap_or(BiasParams::new(0.5)?)),
        }
    }

    fn multi(&self, n: Option<usize>) -> Result<MultiMarket> {
        match (&self.sc.mmarket, n) {
            (Some(mm), None) => Ok(mm.clone()),
            (Some(mm), Some(n)) => MultiMarket::new(n, mm.groups().to_vec()),
            (None, n) => MultiMarket::from_market(self.market()?, n.unwrap_or(3)),
        }
    }

    fn default_outcome(&self) -> Result<(Outcome, Regime, Option<f64>)> {
        let m = self.market()?;
        Ok(match self.sc.regime {
            ScenarioRegime::Group => {
                let w2 = self.w2(&None)?;
                let (w1, _) = self.w1(&None, &w2)?;
                (segregated_outcome(&w1, &w2), Regime::Group, None)
            }
            ScenarioRegime::Nongroup => (nongroup_core(m, 0.0)?.outcome(), Regime::Nongroup, None),
            ScenarioRegime::Bias => {
                let b = self.bias(None)?;
                (bias_group_family(m, b, 0.95)?.outcome(), Regime::Group, Some(b.lambda()))
            }
            ScenarioRegime::None | ScenarioRegime::Hetero => (make_bertrand(m, 0.5)?, Regime::None, None),
        })
    }
}

fn read_outcome(path: &Path) -> Result<Outcome> {
    let text = std::fs::read_to_string(path)?;
    let o: Outcome = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: invalid outcome: {e}", path.display())))?;
    o.check_feasible()?;
    Ok(o)
}

fn json(v: Value, negative: bool) -> Result<CmdResult> {
    Ok(CmdResult { artifact: Artifact::Json(v), negative })
}

/// Lowest delta at which the cap/threshold family is feasible.
fn delta_floor(m: &Market) -> Result<f64> {
    let eb = m.dist_b().mean();
    if a_term(m, 0.0, 1.0) <= eb {
        return Ok(0.0);
    }
    bisect_root(|d| a_term(m, d, 1.0) - eb, Bracket::unit(), Tolerance::tight())
}

fn dispatch(cmd: &Cmd, cx: &Ctx) -> Result<CmdResult> {
    match cmd {
        Cmd::Bertrand { split } => {
            let m = cx.market()?;
            let o = make_bertrand(m, *split)?;
            let verdict = verify_no_epsw_core(m, &o, cx.tol)?;
            let neg = !verdict.is_core;
            json(json!({ "split": split, "accounting": to_value(&accounting(m, &o)?)?, "verdict": to_value(&verdict)? }), neg)
        }
        Cmd::PhiCurve { w2 } => {
            let m = cx.market()?;
            let w2 = cx.w2(w2)?;
            let c = build_phi_curve_with(m, &w2, cx.phi_opts())?;
            let rows = (0..c.len())
                .map(|i| vec![Cell::Num(c.eps_grid[i]), Cell::Num(c.phi[i]), Cell::Num(c.w1hat_inv[i]), Cell::Num(c.ndc_slack[i])])
                .collect();
            let summary = json!({
                "e_cap": c.e_cap, "eps_star": c.eps_star, "pi1_hat": c.pi1_hat, "pi2": c.pi2,
                "core_exists": c.pi1_hat >= c.pi2 - cx.tol,
                "flat_stretches": to_value(&c.flat_stretches)?,
            });
            Ok(CmdResult { artifact: Artifact::Csv { header: PHI_HEADER, rows, summary }, negative: false })
        }
        Cmd::GroupExists { w2 } => {
            let m = cx.market()?;
            let w2 = cx.w2(w2)?;
            let ex = core_exists_with(m, &w2, cx.phi_opts(), cx.tol)?;
            let (e_cap, eps_star) = ex.curve.as_ref().map_or((None, None), |c| (Some(c.e_cap), c.eps_star));
            let warnings: Vec<String> =
                [m.dist_a(), m.dist_b()].iter().flat_map(|d| d.regularity().warnings).collect();
            json(
                json!({ "exists": ex.exists, "pi2": ex.pi2, "pi1_hat": ex.pi1_hat, "e_cap": e_cap,
                        "eps_star": eps_star, "regularity_warnings": warnings }),
                !ex.exists,
            )
        }
        Cmd::GroupVerify { w1, w2 } => {
            let m = cx.market()?;
            let w2 = cx.w2(w2)?;
            let (w1, x_star) = cx.w1(w1, &w2)?;
            let r = verify_group_core_with(m, &w1, &w2, cx.grid, cx.tol);
            let neg = !r.is_core;
            json(
                json!({ "w1": to_value(&w1)?, "w2": to_value(&w2)?, "x_star": x_star, "margin": r.margin(),
                        "report": to_value(&r)? }),
                neg,
            )
        }
        Cmd::DeltaFamily { delta, points } => {
            let m = cx.market()?;
            if let Some(d) = delta {
                let mem = delta_family(m, *d)?;
                let r = verify_group_core_with(m, &mem.w1, &mem.w2, cx.grid, cx.tol);
                let neg = !r.is_core;
                return json(json!({ "member": to_value(&mem)?, "report": to_value(&r)? }), neg);
            }
            if *points < 2 {
                return Err(Error::Parameter("--points must be at least 2".into()));
            }
            let lo = (delta_floor(m)? + 1e-12).min(1.0);
            let mut rows = Vec::with_capacity(*points);
            for i in 0..*points {
                let d = lo + (1.0 - lo) * i as f64 / (*points - 1) as f64;
                let mem = delta_family(m, d)?;
                let r = verify_group_core_with(m, &mem.w1, &mem.w2, cx.grid, cx.tol);
                rows.push(vec![
                    Cell::Num(mem.delta),
                    Cell::Num(mem.delta_prime),
                    Cell::Num(mem.profit),
                    Cell::Num(mem.gap),
                    Cell::Bool(r.is_core),
                ]);
            }
            let summary = json!({ "delta_floor": lo, "points": points });
            Ok(CmdResult { artifact: Artifact::Csv { header: DELTA_HEADER, rows, summary }, negative: false })
        }
        Cmd::BetaStar { w2, beta_hi } => {
            let m = cx.market()?;
            let w2 = cx.w2(w2)?;
            let b = beta_star(m.dist_a(), m.dist_b(), &w2, *beta_hi, cx.tol)?;
            let found = b.is_finite();
            json(json!({ "beta_star": if found { Some(b) } else { None }, "found": found, "beta_hi": beta_hi }), !found)
        }
        Cmd::Nongroup { w1 } => {
            let m = cx.market()?;
            match nongroup_core(m, *w1) {
                Ok(c) => json(json!({ "is_core": true, "core": to_value(&c)? }), false),
                Err(Error::NotCore(msg)) => {
                    json(json!({ "is_core": false, "w1": w1, "w1_star": w1_star(m), "explanation": msg }), true)
                }
                Err(e) => Err(e),
            }
        }
        Cmd::NongroupSweep { points } => {
            let m = cx.market()?;
            let sweep = nongroup_sweep(m, *points)?;
            let rows = sweep
                .iter()
                .map(|c| {
                    vec![Cell::Num(c.w1), Cell::Num(c.w2), Cell::Num(c.profit), Cell::Num(c.unemployed_measure), Cell::Num(c.gap)]
                })
                .collect();
            let summary = json!({ "w1_star": w1_star(m), "points": points, "profit_units": "per unit of total worker measure" });
            Ok(CmdResult { artifact: Artifact::Csv { header: SWEEP_HEADER, rows, summary }, negative: false })
        }
        Cmd::Multifirm { n, w1 } => {
            let mm = cx.multi(*n)?;
            match multifirm_core(&mm, *w1) {
                Ok(c) => json(json!({ "is_core": true, "n_firms": mm.n_firms(), "core": to_value(&c)? }), false),
                Err(Error::NotCore(msg)) => json(json!({ "is_core": false, "w1": w1, "explanation": msg }), true),
                Err(e) => Err(e),
            }
        }
        Cmd::Remark7 { eps } => {
            let eps = eps.or(cx.sc.eps).unwrap_or(0.05);
            json(to_value(&anything_goes_scenarios(eps)?)?, false)
        }
        Cmd::BiasInterval { lambda } => {
            let m = cx.market()?;
            let b = cx.bias(*lambda)?;
            let iv = bias_gap_interval(m, b);
            json(json!({ "lambda": b.lambda(), "lo": iv.lo, "hi": iv.hi }), false)
        }
        Cmd::BiasFamily { lambda, vbar1 } => {
            let m = cx.market()?;
            let b = cx.bias(*lambda)?;
            let mem = bias_group_family(m, b, *vbar1)?;
            json(json!({ "lambda": b.lambda(), "member": to_value(&mem)? }), false)
        }
        Cmd::HeteroVerify { outcome, lo, hi } => {
            let m = cx.market()?;
            let o = match outcome {
                Some(p) => read_outcome(p)?,
                None => hetero_outcome(*lo, *hi)?,
            };
            let v = hetero_verify(m, &o, cx.tol)?;
            let neg = !v.ok;
            json(to_value(&v)?, neg)
        }
        Cmd::Oracle { outcome, regime } => {
            let m = cx.market()?;
            let (default_o, default_regime, bias) = cx.default_outcome()?;
            let o = match outcome {
                Some(p) => read_outcome(p)?,
                None => default_o,
            };
            let regime = match regime {
                Some(r) => r.parse()?,
                None => default_regime,
            };
            let v = oracle_is_core(m, &o, regime, cx.bins, bias, cx.tol)?;
            let neg = !v.core_at_resolution;
            json(to_value(&v)?, neg)
        }
    }
}

fn write_out(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, body).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(body.as_bytes()).map_err(Error::from),
    }
}

/// Runs one command and writes its artifacts; returns the exit code.
pub fn execute(cli: &Cli, args: Vec<String>) -> Result<i32> {
    let start = Instant::now();
    let name = cli
        .scenario
        .as_deref()
        .ok_or_else(|| Error::Config(format!("--scenario is required ({} or a TOML path)", scenario::PRESETS.join(", "))))?;
    let sc = scenario::load(name)?;
    let grid = cli.grid.unwrap_or(sc.solver.grid);
    let bins = cli.bins.unwrap_or(sc.solver.bins);
    let cx = Ctx { sc: &sc, grid, bins, tol: sc.solver.econ_tol };
    let res = dispatch(&cli.cmd, &cx).map_err(|e| Error::Config(format!("scenario `{}`: {e}", sc.name)))?;
    let t = Tolerance::default();
    let manifest = RunManifest {
        command: cli.cmd.name().to_string(),
        args,
        scenario: sc.name.clone(),
        scenario_hash: sc.hash.clone(),
        tool_version: env!("CARGO_PKG_VERSION"),
        tolerances: ToleranceSet {
            econ_tol: cx.tol,
            abs_tol: t.abs_tol,
            rel_tol: t.rel_tol,
            max_iter: t.max_iter,
            grid,
            bins,
        },
        wall_time: cli.record_time.then(|| start.elapsed().as_secs_f64()),
    };
    let mv = to_value(&manifest)?;
    match res.artifact {
        Artifact::Json(v) => {
            let doc = json!({ "manifest": mv, "result": round_value(v) });
            write_out(cli.out.as_deref(), &pretty(&doc)?)?;
        }
        Artifact::Csv { header, rows, summary } => {
            let body = render_csv(header, &rows);
            let side = pretty(&json!({ "manifest": mv, "summary": round_value(summary) }))?;
            match &cli.out {
                Some(p) => {
                    write_out(Some(p), &body)?;
                    let sp = sidecar_path(p);
                    std::fs::write(&sp, side).map_err(|e| Error::Io(format!("{}: {e}", sp.display())))?;
                }
                None => {
                    write_out(None, &body)?;
                    eprint!("{side}");
                }
            }
        }
    }
    Ok(if res.negative { EXIT_NEGATIVE } else { EXIT_OK })
}

/// Parses `argv` (including the program name) and runs it.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let args = argv.iter().skip(1).map(|s| s.to_string_lossy().into_owned()).collect();
    match execute(&cli, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
