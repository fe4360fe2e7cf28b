//! The `lip-rr` command line.
//!
//! Every command is a pure function of its flags and input files. Output goes
//! to stdout, or to `--out` through an atomic rename so failed runs never
//! leave partial files behind.
//!
//! Exit codes: 0 ok, 1 infeasible or failed verdict, 2 parse failure,
//! 3 domain violation.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use crate::auditor::{
    audit_channel, audit_mechanism, audit_plan, min_epsilon_empirical, AuditReport,
};
use crate::error::LipError;
use crate::feasibility::{
    delta_bound, epsilon_range, infeasible_region_boundary, min_epsilon_pure, pmin_threshold,
    tradeoff_curve, EpsilonRegion,
};
use crate::grouping::{group_plan, min_ell, GroupingPlan};
use crate::io::{self, fmt_num, json_num, FormatError};
use crate::mechanism::{build_channel, check_delta, check_epsilon, release_index, Channel};
use crate::pmf::{Pmf, ZeroPolicy};
use crate::rng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

/// Slack used by the `feasible` verdict, matching the grouping search.
const VERDICT_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(
    name = "lip-rr",
    version,
    about = "Context-aware randomized response under (epsilon, delta) local information privacy"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Write output here (atomically) instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimum prior mass, pure-privacy threshold, and an optional verdict for (epsilon, delta).
    Feasible(FeasibleArgs),
    /// Valid epsilon region for a minimum prior mass and delta, as JSON.
    Region(RegionArgs),
    /// Tradeoff samples as CSV: minimal delta along an epsilon grid, or infeasible-gap boundaries.
    Tradeoff(TradeoffArgs),
    /// Emit the randomized-response channel (optionally grouped).
    Mechanize(MechanizeArgs),
    /// Draw (input, output) pairs with input ~ prior and output ~ channel row.
    Sample(SampleArgs),
    /// Build a grouping plan; without --ell, the smallest feasible one.
    Group(GroupArgs),
    /// Audit a channel (or the mechanism built from the prior) at (epsilon, delta).
    Audit(AuditArgs),
}

#[derive(Debug, Args)]
pub struct PriorArgs {
    /// Prior file: CSV `label,prob` or JSON object.
    #[arg(long)]
    pub prior: PathBuf,
    /// Drop zero-probability atoms instead of rejecting them.
    #[arg(long)]
    pub drop_zeros: bool,
}

#[derive(Debug, Args)]
pub struct FeasibleArgs {
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[arg(long, conflicts_with = "prior")]
    pub p_min: Option<f64>,
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TradeoffMode {
    /// `epsilon,delta_min,p_min` over an epsilon grid.
    Curve,
    /// `delta,p_min,eps_low_branch_hi,eps_high_branch_lo` over a p_min grid.
    Gap,
}

#[derive(Debug, Args)]
pub struct TradeoffArgs {
    #[arg(long, value_enum, default_value_t = TradeoffMode::Curve)]
    pub mode: TradeoffMode,
    /// `lo:hi:step`, inclusive of `hi`.
    #[arg(long)]
    pub grid: String,
    /// Curve mode: comma-separated minimum prior masses.
    #[arg(long, value_delimiter = ',')]
    pub p_min: Vec<f64>,
    /// Curve mode: take the minimum prior mass from a prior file.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Gap mode: comma-separated delta values.
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct MechanizeArgs {
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long)]
    pub epsilon: f64,
    /// Merge the `ell` smallest-prior symbols first.
    #[arg(long)]
    pub ell: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub ell: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n: u64,
}

#[derive(Debug, Args)]
pub struct GroupArgs {
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long)]
    pub ell: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Channel file (CSV matrix or JSON); defaults to the mechanism built from the prior.
    #[arg(long, conflicts_with = "ell")]
    pub channel: Option<PathBuf>,
    /// Audit the grouped mechanism over its reduced alphabet.
    #[arg(long)]
    pub ell: Option<usize>,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Parse(#[from] FormatError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Domain(#[from] LipError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Usage(_) => EXIT_PARSE,
            CliError::Domain(_) => EXIT_DOMAIN,
        }
    }
}

/// Rendered command output and the exit code it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub code: i32,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome {
            text,
            code: EXIT_OK,
        }
    }

    fn verdict(text: String, pass: bool) -> Self {
        Outcome {
            text,
            code: if pass { EXIT_OK } else { EXIT_INFEASIBLE },
        }
    }
}

/// Parses arguments, runs the command, writes output, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.exit_code() {
                0 => EXIT_OK,
                _ => EXIT_PARSE,
            };
        }
    };
    match execute(&config.command) {
        Ok(outcome) => {
            if let Err(e) = emit(config.out.as_deref(), &outcome.text) {
                eprintln!("error: {e}");
                return EXIT_PARSE;
            }
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> std::io::Result<()> {
    match out {
        Some(path) => io::write_atomic(path, text.as_bytes()),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

/// Runs one command without touching stdout or the filesystem (except reads).
pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Feasible(a) => cmd_feasible(a),
        Command::Region(a) => cmd_region(a),
        Command::Tradeoff(a) => cmd_tradeoff(a),
        Command::Mechanize(a) => cmd_mechanize(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Group(a) => cmd_group(a),
        Command::Audit(a) => cmd_audit(a),
    }
}

fn load_prior(args: &PriorArgs) -> Result<Pmf, CliError> {
    let policy = if args.drop_zeros {
        ZeroPolicy::Drop
    } else {
        ZeroPolicy::Reject
    };
    Ok(io::parse_pmf(&io::read_text(&args.prior)?, policy)?)
}

/// Parses `lo:hi:step` into `lo, lo + step, ...` up to `hi` inclusive.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "grid `{spec}` must be lo:hi:step with step > 0 and hi >= lo"
        ))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    let (lo, hi, step) = (nums[0], nums[1], nums[2]);
    if !(lo.is_finite() && hi.is_finite() && step.is_finite() && step > 0.0 && hi >= lo) {
        return Err(bad());
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| lo + i as f64 * step).collect())
}

fn region_json(region: &EpsilonRegion) -> Value {
    let intervals: Vec<Value> = region
        .intervals
        .iter()
        .map(|i| {
            json!({
                "lo": json_num(i.lo),
                "hi": json_num(i.hi),
                "lo_closed": i.lo_closed,
                "hi_closed": i.hi_closed,
            })
        })
        .collect();
    json!({
        "case": region.case.number(),
        "intervals": intervals,
        "includes_zero": region.includes_zero,
    })
}

fn audit_json(report: &AuditReport) -> Value {
    json!({
        "epsilon": json_num(report.epsilon),
        "delta": json_num(report.delta),
        "exact_min_delta": json_num(report.exact_min_delta),
        "pass": report.pass,
        "worst_input": report.worst_input,
        "worst_event": report.worst_event,
        "worst_side": report.worst_side,
    })
}

pub fn cmd_feasible(args: &FeasibleArgs) -> Result<Outcome, CliError> {
    let prior = load_prior(&args.prior)?;
    let p_min = prior.p_min();
    let mut report = json!({
        "support_size": prior.len(),
        "p_min": json_num(p_min),
        "pure_threshold": json_num(min_epsilon_pure(p_min)?),
    });
    let Some(epsilon) = args.epsilon else {
        if args.delta.is_some() {
            return Err(CliError::Usage("--delta requires --epsilon".into()));
        }
        return Ok(Outcome::ok(io::to_json_text(&report)));
    };
    let delta = args.delta.unwrap_or(0.0);
    check_epsilon(epsilon)?;
    check_delta(delta)?;
    let threshold = pmin_threshold(epsilon, delta)?;
    let feasible = p_min >= threshold - VERDICT_TOL;
    let fields = report.as_object_mut().expect("object");
    fields.insert("epsilon".into(), json_num(epsilon));
    fields.insert("delta".into(), json_num(delta));
    fields.insert("pmin_threshold".into(), json_num(threshold));
    fields.insert("delta_min".into(), json_num(delta_bound(p_min, epsilon)?));
    fields.insert("region".into(), region_json(&epsilon_range(p_min, delta)?));
    fields.insert("feasible".into(), Value::Bool(feasible));
    if !feasible {
        let suggestion = match min_ell(&prior, epsilon, delta)? {
            Some(ell) => {
                fields.insert("min_ell".into(), json!(ell));
                format!("min_ell = {ell}")
            }
            None => {
                fields.insert("min_ell".into(), Value::Null);
                "no non-degenerate grouping reaches the threshold".to_owned()
            }
        };
        eprintln!("infeasible: {suggestion}");
        fields.insert("suggestion".into(), Value::String(suggestion));
    }
    Ok(Outcome::verdict(io::to_json_text(&report), feasible))
}

pub fn cmd_region(args: &RegionArgs) -> Result<Outcome, CliError> {
    let p_min = match (&args.prior, args.p_min) {
        (Some(path), None) => io::parse_pmf(&io::read_text(path)?, ZeroPolicy::Reject)?.p_min(),
        (None, Some(p)) => p,
        _ => {
            return Err(CliError::Usage(
                "exactly one of --p-min or --prior is required".into(),
            ))
        }
    };
    let region = epsilon_range(p_min, args.delta)?;
    Ok(Outcome::ok(io::to_json_text(&region_json(&region))))
}

pub fn cmd_tradeoff(args: &TradeoffArgs) -> Result<Outcome, CliError> {
    let grid = parse_grid(&args.grid)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    match args.mode {
        TradeoffMode::Curve => {
            let mut p_mins = args.p_min.clone();
            if let Some(path) = &args.prior {
                p_mins.push(io::parse_pmf(&io::read_text(path)?, ZeroPolicy::Reject)?.p_min());
            }
            if p_mins.is_empty() {
                return Err(CliError::Usage(
                    "curve mode needs --p-min or --prior".into(),
                ));
            }
            writer
                .write_record(["epsilon", "delta_min", "p_min"])
                .map_err(FormatError::from)?;
            for p in p_mins {
                for pt in tradeoff_curve(p, &grid)? {
                    writer
                        .write_record([
                            fmt_num(pt.epsilon),
                            fmt_num(pt.delta_min),
                            fmt_num(pt.p_min),
                        ])
                        .map_err(FormatError::from)?;
                }
            }
        }
        TradeoffMode::Gap => {
            if args.delta.is_empty() {
                return Err(CliError::Usage("gap mode needs --delta".into()));
            }
            writer
                .write_record(["delta", "p_min", "eps_low_branch_hi", "eps_high_branch_lo"])
                .map_err(FormatError::from)?;
            for &delta in &args.delta {
                for b in infeasible_region_boundary(delta, &grid)? {
                    let (lo, hi) = match b.gap {
                        Some((lo, hi)) => (fmt_num(lo), fmt_num(hi)),
                        None => (String::new(), String::new()),
                    };
                    writer
                        .write_record([fmt_num(delta), fmt_num(b.p_min), lo, hi])
                        .map_err(FormatError::from)?;
                }
            }
        }
    }
    Ok(Outcome::ok(io::into_string(writer)))
}

fn plan_for(prior: &Pmf, ell: Option<usize>) -> Result<Option<GroupingPlan>, CliError> {
    ell.map(|ell| group_plan(prior, ell))
        .transpose()
        .map_err(CliError::from)
}

fn mechanism_channel(
    prior: &Pmf,
    epsilon: f64,
    plan: Option<&GroupingPlan>,
) -> Result<Channel, CliError> {
    Ok(match plan {
        Some(plan) => plan.grouped_channel(epsilon)?,
        None => build_channel(prior, epsilon)?,
    })
}

pub fn cmd_mechanize(args: &MechanizeArgs) -> Result<Outcome, CliError> {
    let prior = load_prior(&args.prior)?;
    let plan = plan_for(&prior, args.ell)?;
    let channel = mechanism_channel(&prior, args.epsilon, plan.as_ref())?;
    Ok(Outcome::ok(match args.format {
        Format::Csv => io::channel_to_csv(&channel),
        Format::Json => io::to_json_text(&io::channel_to_json(&channel)),
    }))
}

/// Draw `2i` picks the input of record `i`; draw `2i + 1` picks its output.
pub fn cmd_sample(args: &SampleArgs) -> Result<Outcome, CliError> {
    let prior = load_prior(&args.prior)?;
    let plan = plan_for(&prior, args.ell)?;
    let channel = mechanism_channel(&prior, args.epsilon, plan.as_ref())?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["input", "output"])
        .map_err(FormatError::from)?;
    for i in 0..args.n {
        let x = rng::inverse_cdf(prior.probs(), rng::draw_uniform(args.seed, 2 * i));
        let y = release_index(&channel, x, args.seed, 2 * i + 1);
        writer
            .write_record([channel.inputs()[x].as_str(), channel.outputs()[y].as_str()])
            .map_err(FormatError::from)?;
    }
    Ok(Outcome::ok(io::into_string(writer)))
}

pub fn cmd_group(args: &GroupArgs) -> Result<Outcome, CliError> {
    let prior = load_prior(&args.prior)?;
    let ell = match (args.ell, args.epsilon) {
        (Some(ell), _) => ell,
        (None, Some(epsilon)) => match min_ell(&prior, epsilon, args.delta)? {
            Some(ell) => ell,
            None => {
                let report = json!({
                    "epsilon": json_num(epsilon),
                    "delta": json_num(args.delta),
                    "pmin_threshold": json_num(pmin_threshold(epsilon, args.delta)?),
                    "ell": Value::Null,
                    "feasible": false,
                });
                return Ok(Outcome::verdict(io::to_json_text(&report), false));
            }
        },
        (None, None) => return Err(CliError::Usage("group needs --ell or --epsilon".into())),
    };
    let plan = group_plan(&prior, ell)?;
    let mut report = io::plan_to_json(&plan);
    let fields = report.as_object_mut().expect("object");
    fields.insert("degenerate".into(), Value::Bool(plan.is_degenerate()));
    if !plan.is_degenerate() {
        let p_min = plan.p_min_grouped()?;
        fields.insert("p_min_grouped".into(), json_num(p_min));
        fields.insert("pure_threshold".into(), json_num(min_epsilon_pure(p_min)?));
        if let Some(epsilon) = args.epsilon {
            check_delta(args.delta)?;
            let needed = plan.delta_bound_grouped(epsilon)?;
            fields.insert("epsilon".into(), json_num(epsilon));
            fields.insert("delta".into(), json_num(args.delta));
            fields.insert("delta_min".into(), json_num(needed));
            fields.insert("truthfulness".into(), json_num(plan.truthfulness(epsilon)?));
            fields.insert(
                "feasible".into(),
                Value::Bool(needed <= args.delta + crate::auditor::AUDIT_TOL),
            );
        }
    }
    Ok(Outcome::ok(io::to_json_text(&report)))
}

pub fn cmd_audit(args: &AuditArgs) -> Result<Outcome, CliError> {
    let prior = load_prior(&args.prior)?;
    let (report, empirical) = match (&args.channel, args.ell) {
        (Some(path), _) => {
            let channel = io::parse_channel(&io::read_text(path)?)?;
            let report = audit_channel(&channel, &prior, args.epsilon, args.delta)?;
            (report, min_epsilon_empirical(&channel, &prior)?)
        }
        (None, Some(ell)) => {
            let plan = group_plan(&prior, ell)?;
            let report = audit_plan(&plan, args.epsilon, args.delta)?;
            let channel = plan.reduced_channel(args.epsilon)?;
            (report, min_epsilon_empirical(&channel, plan.reduced())?)
        }
        (None, None) => {
            let report = audit_mechanism(&prior, args.epsilon, args.delta)?;
            let channel = build_channel(&prior, args.epsilon)?;
            (report, min_epsilon_empirical(&channel, &prior)?)
        }
    };
    let mut value = audit_json(&report);
    value
        .as_object_mut()
        .expect("object")
        .insert("min_epsilon_empirical".into(), json_num(empirical));
    Ok(Outcome::verdict(io::to_json_text(&value), report.pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0:0:1").unwrap(), vec![0.0]);
        assert_eq!(parse_grid("0:6:0.001").unwrap().len(), 6001);
        assert!((parse_grid("0:6:0.001").unwrap()[6000] - 6.0).abs() < 1e-12);
        for bad in ["0:1", "1:0:0.1", "0:1:0", "a:1:0.1", "0:1:-1"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_PARSE);
        assert_eq!(
            CliError::Domain(LipError::domain("epsilon", -1.0, "[0, inf)")).exit_code(),
            EXIT_DOMAIN
        );
        assert_eq!(run(["lip-rr", "bogus"]), EXIT_PARSE);
        assert_eq!(run(["lip-rr", "region", "--p-min", "0.7"]), EXIT_DOMAIN);
    }
}
