//! Command-line interface.
//!
//! The binary is a thin shell around the library: each subcommand loads
//! data, calls the corresponding library functions, prints a human-readable
//! report to stdout (prefixed by `#` config-echo lines stating exactly what
//! was run), and optionally appends machine-readable JSON-lines records to a
//! file given with `--records`. Evidence records written that way can be fed
//! back to `--data`, which reproduces the original analysis bit for bit.
//!
//! Exit codes: 0 on success, 2 for usage problems, 3 for data problems,
//! 4 for numerical failures.

use crate::case_study;
use crate::distributions::{
    heterogeneity_ratio, marginal_rr_ratio, marginal_rr_ratio_mc, HalfNormal,
};
use crate::error::{Error, Result};
use crate::evidence::{load_dataset, Evidence, LoadedData, NiMargin, Phase};
use crate::nnhm::{
    effective_sample_size, fit, marginal_summary, tail_probability, Summary, Target,
};
use crate::ocsim::{
    format_oc_table, load_grid_config, run_scenario, DecisionRule, IntervalKind, OcCell,
    OcCellOutcome, OcRuleResult,
};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Entry point used by the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap reports help/version on stdout (code 0) and usage errors
            // on stderr (code 2)
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "bayesborrow",
    version,
    about = "Meta-analytic borrowing for non-inferiority trials on the risk-ratio scale"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the hierarchical model to a dataset and summarise its marginals
    Analyze(AnalyzeArgs),
    /// Predictive (MAP) distribution of the effect in a new study
    Predict(PredictArgs),
    /// Effective sample size carried by the predictive distribution
    Ess(EssArgs),
    /// Operating characteristics of a borrowing design over a scenario grid
    Oc(OcArgs),
    /// Reproduce the bundled case study end to end
    CaseStudy(CaseStudyArgs),
    /// What a heterogeneity prior implies before any data are seen
    PriorSummary(PriorSummaryArgs),
}

// --- shared argument blocks -----------------------------------------------------

#[derive(Args, Debug)]
struct DataArgs {
    /// Dataset: CSV counts (study_id,r_t,n_t,r_c,n_c,phase) or a JSON
    /// records file produced by --records
    #[arg(long)]
    data: PathBuf,

    /// Keep only studies of one phase (2 or 3), or all
    #[arg(long, default_value = "all", value_parser = parse_phase_filter)]
    phase: PhaseFilter,

    /// Keep only these study ids (comma-separated)
    #[arg(long, value_delimiter = ',')]
    include: Vec<String>,
}

impl DataArgs {
    fn load(&self) -> Result<LoadedData> {
        let mut data = load_dataset(&self.data)?;
        data.retain(|id, phase| {
            let phase_ok = match self.phase {
                PhaseFilter::All => true,
                PhaseFilter::Two => phase == Phase::Two,
                PhaseFilter::Three => phase == Phase::Three,
            };
            phase_ok && (self.include.is_empty() || self.include.iter().any(|i| i == id))
        });
        if data.is_empty() {
            return Err(Error::Data(format!(
                "no studies left in {} after filters (phase {}, include {:?})",
                self.data.display(),
                self.phase.label(),
                self.include
            )));
        }
        Ok(data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PhaseFilter {
    Two,
    Three,
    All,
}

impl PhaseFilter {
    fn label(&self) -> &'static str {
        match self {
            PhaseFilter::Two => "2",
            PhaseFilter::Three => "3",
            PhaseFilter::All => "all",
        }
    }
}

fn parse_phase_filter(s: &str) -> std::result::Result<PhaseFilter, String> {
    match s {
        "2" => Ok(PhaseFilter::Two),
        "3" => Ok(PhaseFilter::Three),
        "all" => Ok(PhaseFilter::All),
        other => Err(format!("expected 2, 3 or all, got {other:?}")),
    }
}

fn parse_prior(s: &str) -> std::result::Result<HalfNormal, String> {
    let scale = s
        .strip_prefix("hn:")
        .or_else(|| s.strip_prefix("half-normal:"))
        .ok_or_else(|| format!("expected hn:<scale>, got {s:?}"))?;
    let scale: f64 = scale
        .parse()
        .map_err(|e| format!("bad half-normal scale {scale:?}: {e}"))?;
    HalfNormal::new(scale).map_err(|e| e.to_string())
}

fn parse_margin(s: &str) -> std::result::Result<NiMargin, String> {
    let (p, m) = s
        .split_once(':')
        .ok_or_else(|| format!("expected <p_control>:<margin>, got {s:?}"))?;
    let p: f64 = p.parse().map_err(|e| format!("bad control rate {p:?}: {e}"))?;
    let m: f64 = m.parse().map_err(|e| format!("bad margin {m:?}: {e}"))?;
    NiMargin::new(p, m).map_err(|e| e.to_string())
}

fn parse_target(s: &str) -> std::result::Result<Target, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone)]
struct ProbList(Vec<f64>);

fn parse_probs(s: &str) -> std::result::Result<ProbList, String> {
    let mut probs = Vec::new();
    for part in s.split(',') {
        let p: f64 = part
            .trim()
            .parse()
            .map_err(|e| format!("bad probability {part:?}: {e}"))?;
        if !(p > 0.0 && p < 1.0) {
            return Err(format!("probability {p} not in (0, 1)"));
        }
        probs.push(p);
    }
    if probs.is_empty() {
        return Err("need at least one probability".into());
    }
    Ok(ProbList(probs))
}

#[derive(Debug, Clone, Copy)]
enum RuleChoice {
    Meta,
    MetaCentral,
    Standalone,
    Both,
}

impl RuleChoice {
    fn rules(&self) -> Vec<DecisionRule> {
        match self {
            RuleChoice::Meta => vec![DecisionRule::MetaAnalytic(IntervalKind::Shortest)],
            RuleChoice::MetaCentral => vec![DecisionRule::MetaAnalytic(IntervalKind::Central)],
            RuleChoice::Standalone => vec![DecisionRule::Standalone],
            RuleChoice::Both => vec![
                DecisionRule::MetaAnalytic(IntervalKind::Shortest),
                DecisionRule::Standalone,
            ],
        }
    }
}

fn parse_rule(s: &str) -> std::result::Result<RuleChoice, String> {
    match s {
        "meta" | "meta-analytic" => Ok(RuleChoice::Meta),
        "meta-central" => Ok(RuleChoice::MetaCentral),
        "standalone" => Ok(RuleChoice::Standalone),
        "both" => Ok(RuleChoice::Both),
        other => Err(format!(
            "expected meta, meta-central, standalone or both, got {other:?}"
        )),
    }
}

// --- subcommand arguments --------------------------------------------------------

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Prior on the between-study standard deviation, e.g. hn:0.5
    #[arg(long, default_value = "hn:0.5", value_parser = parse_prior)]
    tau_prior: HalfNormal,

    /// Non-inferiority margin as <p_control>:<absolute margin>, e.g. 0.9:0.12
    #[arg(long, value_parser = parse_margin)]
    margin: Option<NiMargin>,

    /// Marginal(s) to summarise: mu, theta:<id>, theta-star or tau
    /// (repeatable; default: all of them)
    #[arg(long = "target", value_parser = parse_target)]
    targets: Vec<Target>,

    /// Quantile probabilities, comma-separated
    #[arg(long, default_value = "0.025,0.5,0.975", value_parser = parse_probs)]
    probs: ProbList,

    /// Append machine-readable JSON-lines records to this file
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Prior on the between-study standard deviation, e.g. hn:0.5
    #[arg(long, default_value = "hn:0.5", value_parser = parse_prior)]
    tau_prior: HalfNormal,

    /// Non-inferiority margin as <p_control>:<absolute margin>
    #[arg(long, value_parser = parse_margin)]
    margin: Option<NiMargin>,

    /// Quantile probabilities, comma-separated
    #[arg(long, default_value = "0.025,0.5,0.975", value_parser = parse_probs)]
    probs: ProbList,

    /// Append machine-readable JSON-lines records to this file
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EssArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Prior on the between-study standard deviation, e.g. hn:0.5
    #[arg(long, default_value = "hn:0.5", value_parser = parse_prior)]
    tau_prior: HalfNormal,

    /// Historical patient count the ESS is calibrated against
    /// (default: the dataset's patient total, available with count data)
    #[arg(long)]
    reference: Option<f64>,

    /// Append machine-readable JSON-lines records to this file
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OcArgs {
    /// TOML grid configuration (design block plus scenario lists)
    #[arg(long)]
    grid: PathBuf,

    /// Historical dataset; its phase 2 studies form the borrowing basis
    /// (default: the bundled case-study studies)
    #[arg(long)]
    data: Option<PathBuf>,

    /// Simulated trials per scenario cell
    #[arg(long, default_value_t = 1000)]
    nsim: usize,

    /// Seed; a fixed seed gives bit-identical results on any thread count
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Decision rule(s): meta, meta-central, standalone or both
    #[arg(long, default_value = "both", value_parser = parse_rule)]
    rule: RuleChoice,

    /// Append machine-readable JSON-lines records to this file
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CaseStudyArgs {
    /// Which part to report: eop2, interim, final or all
    #[arg(long, default_value = "all", value_parser = parse_stage)]
    stage: StageChoice,

    /// Also run the end-of-phase-II analysis under the wider hn:1.0 prior
    #[arg(long)]
    sensitivity: bool,

    /// Append machine-readable JSON-lines records to this file
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StageChoice {
    Eop2,
    Interim,
    Final,
    All,
}

fn parse_stage(s: &str) -> std::result::Result<StageChoice, String> {
    match s {
        "eop2" => Ok(StageChoice::Eop2),
        "interim" => Ok(StageChoice::Interim),
        "final" => Ok(StageChoice::Final),
        "all" => Ok(StageChoice::All),
        other => Err(format!("expected eop2, interim, final or all, got {other:?}")),
    }
}

#[derive(Args, Debug)]
struct PriorSummaryArgs {
    /// Prior on the between-study standard deviation, e.g. hn:0.5
    #[arg(long, default_value = "hn:0.5", value_parser = parse_prior)]
    tau_prior: HalfNormal,

    /// Monte Carlo draws for the marginal risk-ratio spread
    #[arg(long, default_value_t = 1_000_000)]
    draws: usize,

    /// Seed for the Monte Carlo draws
    #[arg(long, default_value_t = 314)]
    seed: u64,

    /// Append machine-readable JSON-lines records to this file
    #[arg(long)]
    records: Option<PathBuf>,
}

// --- records writer ----------------------------------------------------------------

struct Recorder {
    out: Option<BufWriter<File>>,
}

impl Recorder {
    fn new(path: Option<&Path>) -> Result<Self> {
        let out = match path {
            Some(p) => Some(BufWriter::new(File::create(p).map_err(|e| {
                Error::Data(format!("cannot create records file {}: {e}", p.display()))
            })?)),
            None => None,
        };
        Ok(Recorder { out })
    }

    fn emit(&mut self, value: Value) -> Result<()> {
        if let Some(out) = &mut self.out {
            writeln!(out, "{value}")?;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        if let Some(out) = &mut self.out {
            out.flush()?;
        }
        Ok(())
    }
}

fn prior_json(prior: &HalfNormal) -> Value {
    json!({"family": "half-normal", "scale": prior.scale()})
}

fn margin_json(margin: &NiMargin) -> Value {
    json!({
        "p_control": margin.p_control(),
        "margin_abs": margin.margin_abs(),
        "rr_threshold": margin.rr_threshold(),
    })
}

fn evidence_record(e: &Evidence) -> Value {
    json!({
        "record": "evidence",
        "study_id": e.study_id,
        "phase": match e.phase { Phase::Two => 2, Phase::Three => 3 },
        "y": e.y,
        "s": e.s,
        "rr": e.rr(),
    })
}

fn summary_record(s: &Summary) -> Value {
    let on_log_scale = !matches!(s.target, Target::Tau);
    let quantiles: Vec<Value> = s
        .quantiles
        .iter()
        .map(|&(p, v)| {
            if on_log_scale {
                json!({"p": p, "log_rr": v, "rr": v.exp()})
            } else {
                json!({"p": p, "value": v})
            }
        })
        .collect();
    let shortest = if on_log_scale {
        json!({
            "lower": s.shortest95.0,
            "upper": s.shortest95.1,
            "rr_lower": s.shortest95.0.exp(),
            "rr_upper": s.shortest95.1.exp(),
        })
    } else {
        json!({"lower": s.shortest95.0, "upper": s.shortest95.1})
    };
    json!({
        "record": "summary",
        "target": s.target.to_string(),
        "scale": if on_log_scale { "log-rr" } else { "sd" },
        "mean": s.mean,
        "sd": s.sd,
        "quantiles": quantiles,
        "shortest95": shortest,
    })
}

fn tail_record(target: &Target, margin: &NiMargin, probability: f64) -> Value {
    json!({
        "record": "tail",
        "target": target.to_string(),
        "threshold_rr": margin.rr_threshold(),
        "threshold_log_rr": margin.log_rr_threshold(),
        "probability": probability,
    })
}

// --- shared printing ----------------------------------------------------------------

fn print_summary(s: &Summary) {
    match s.target {
        Target::Tau => {
            println!("{}: mean {:.4}, sd {:.4}", s.target, s.mean, s.sd);
            let qs: Vec<String> = s
                .quantiles
                .iter()
                .map(|(p, v)| format!("p={p}: {v:.4}"))
                .collect();
            println!("  quantiles: {}", qs.join(" | "));
            println!(
                "  shortest 95%: ({:.4}, {:.4})",
                s.shortest95.0, s.shortest95.1
            );
        }
        _ => {
            println!(
                "{}: log-RR mean {:.4}, sd {:.4}",
                s.target, s.mean, s.sd
            );
            let qs: Vec<String> = s
                .quantiles
                .iter()
                .map(|(p, v)| format!("p={p}: {:.4}", v.exp()))
                .collect();
            println!("  quantiles (RR): {}", qs.join(" | "));
            println!(
                "  shortest 95% (RR): ({:.4}, {:.4})",
                s.shortest95.0.exp(),
                s.shortest95.1.exp()
            );
        }
    }
}

fn echo_margin(margin: &NiMargin) {
    println!(
        "# margin: p_control {:.3}, absolute {:.3} -> RR threshold {:.4}",
        margin.p_control(),
        margin.margin_abs(),
        margin.rr_threshold()
    );
}

fn echo_studies(evidence: &[Evidence]) {
    let ids: Vec<&str> = evidence.iter().map(|e| e.study_id.as_str()).collect();
    println!("# studies ({}): {}", ids.len(), ids.join(", "));
}

// --- dispatch ------------------------------------------------------------------------

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(args) => run_analyze(args),
        Command::Predict(args) => run_predict(args),
        Command::Ess(args) => run_ess(args),
        Command::Oc(args) => run_oc_cmd(args),
        Command::CaseStudy(args) => run_case_study(args),
        Command::PriorSummary(args) => run_prior_summary(args),
    }
}

fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    let evidence = args.data.load()?.evidence()?;
    let mut rec = Recorder::new(args.records.as_deref())?;

    println!("# analyze: {}", args.data.data.display());
    echo_studies(&evidence);
    println!("# tau prior: half-normal, scale {}", args.tau_prior.scale());
    if let Some(m) = &args.margin {
        echo_margin(m);
    }
    rec.emit(json!({
        "record": "config",
        "command": "analyze",
        "data": args.data.data.display().to_string(),
        "tau_prior": prior_json(&args.tau_prior),
        "margin": args.margin.as_ref().map(margin_json),
        "probs": args.probs.0,
    }))?;
    for e in &evidence {
        rec.emit(evidence_record(e))?;
    }

    let f = fit(&evidence, args.tau_prior)?;
    let targets: Vec<Target> = if args.targets.is_empty() {
        let mut t = vec![Target::Mu, Target::ThetaStar];
        t.extend(evidence.iter().map(|e| Target::Theta(e.study_id.clone())));
        t.push(Target::Tau);
        t
    } else {
        args.targets.clone()
    };

    println!();
    for target in &targets {
        let summary = marginal_summary(&f, target, &args.probs.0)?;
        print_summary(&summary);
        rec.emit(summary_record(&summary))?;
        if let Some(margin) = &args.margin {
            if !matches!(target, Target::Tau) {
                let p = tail_probability(&f, target, margin.log_rr_threshold())?;
                println!("  P({target} > threshold) = {p:.4}");
                rec.emit(tail_record(target, margin, p))?;
            }
        }
        println!();
    }
    rec.finish()
}

fn run_predict(args: PredictArgs) -> Result<()> {
    let evidence = args.data.load()?.evidence()?;
    let mut rec = Recorder::new(args.records.as_deref())?;

    println!("# predict: {}", args.data.data.display());
    echo_studies(&evidence);
    println!("# tau prior: half-normal, scale {}", args.tau_prior.scale());
    if let Some(m) = &args.margin {
        echo_margin(m);
    }
    rec.emit(json!({
        "record": "config",
        "command": "predict",
        "data": args.data.data.display().to_string(),
        "tau_prior": prior_json(&args.tau_prior),
        "margin": args.margin.as_ref().map(margin_json),
        "probs": args.probs.0,
    }))?;
    for e in &evidence {
        rec.emit(evidence_record(e))?;
    }

    let f = fit(&evidence, args.tau_prior)?;
    let summary = marginal_summary(&f, &Target::ThetaStar, &args.probs.0)?;
    println!();
    println!("predictive distribution of the effect in a new exchangeable study");
    print_summary(&summary);
    rec.emit(summary_record(&summary))?;
    if let Some(margin) = &args.margin {
        let p = tail_probability(&f, &Target::ThetaStar, margin.log_rr_threshold())?;
        println!("  P(theta-star > threshold) = {p:.4}");
        rec.emit(tail_record(&Target::ThetaStar, margin, p))?;
    }
    rec.finish()
}

fn run_ess(args: EssArgs) -> Result<()> {
    let data = args.data.load()?;
    let evidence = data.evidence()?;
    let reference = match args.reference {
        Some(n) => n,
        None => data.total_patients().ok_or_else(|| {
            Error::Usage(
                "--reference is required when the dataset carries no patient counts".into(),
            )
        })?,
    };
    let mut rec = Recorder::new(args.records.as_deref())?;

    println!("# ess: {}", args.data.data.display());
    echo_studies(&evidence);
    println!("# tau prior: half-normal, scale {}", args.tau_prior.scale());
    println!("# reference patients: {reference}");

    let f = fit(&evidence, args.tau_prior)?;
    let ess = effective_sample_size(&f, reference)?;
    println!();
    println!(
        "effective sample size of the predictive (MAP) distribution: {:.1}",
        ess.ess
    );
    println!(
        "  pooled-estimate variance {:.6}, predictive variance {:.6}, reference {:.0} patients",
        ess.v0, ess.v_star, ess.reference_n
    );
    rec.emit(json!({
        "record": "config",
        "command": "ess",
        "data": args.data.data.display().to_string(),
        "tau_prior": prior_json(&args.tau_prior),
        "reference": reference,
    }))?;
    for e in &evidence {
        rec.emit(evidence_record(e))?;
    }
    rec.emit(json!({
        "record": "ess",
        "ess": ess.ess,
        "reference_n": ess.reference_n,
        "v0": ess.v0,
        "v_star": ess.v_star,
    }))?;
    rec.finish()
}

fn oc_cell_record(cell: &OcCell) -> Value {
    match &cell.outcome {
        OcCellOutcome::Rejected { reason } => json!({
            "record": "oc_cell",
            "p_control": cell.scenario.p_control,
            "delta": cell.scenario.delta,
            "rejected": reason,
        }),
        OcCellOutcome::Evaluated { true_rr, results } => {
            let results: Vec<Value> = results
                .iter()
                .map(|r| {
                    json!({
                        "rule": r.rule.label(),
                        "n_sim": r.n_sim,
                        "p_interim": r.p_interim,
                        "p_final": r.p_final,
                        "p_both": r.p_both,
                        "se_final": OcRuleResult::mc_se(r.p_final, r.n_sim),
                        "se_both": OcRuleResult::mc_se(r.p_both, r.n_sim),
                    })
                })
                .collect();
            json!({
                "record": "oc_cell",
                "p_control": cell.scenario.p_control,
                "delta": cell.scenario.delta,
                "true_rr": true_rr,
                "results": results,
            })
        }
    }
}

fn run_oc_cmd(args: OcArgs) -> Result<()> {
    let cfg = load_grid_config(&args.grid)?;
    let historical = match &args.data {
        Some(path) => {
            let mut data = load_dataset(path)?;
            data.retain(|_, phase| phase == Phase::Two);
            if data.is_empty() {
                return Err(Error::Data(format!(
                    "{} has no phase 2 studies to borrow from",
                    path.display()
                )));
            }
            data.evidence()?
        }
        None => case_study::historical_evidence()?,
    };
    let rules = args.rule.rules();
    let mut rec = Recorder::new(args.records.as_deref())?;

    println!("# oc: grid {}", args.grid.display());
    println!(
        "# design: {} per arm, interim at {}, margin threshold RR {:.4}, tau prior hn:{}, credibility {}",
        cfg.design.n_per_arm(),
        cfg.design.interim_n(),
        cfg.design.margin().rr_threshold(),
        cfg.design.tau_prior().scale(),
        cfg.design.credibility()
    );
    echo_studies(&historical);
    println!(
        "# nsim {} per cell, seed {}, rules: {}",
        args.nsim,
        args.seed,
        rules
            .iter()
            .map(|r| r.label())
            .collect::<Vec<_>>()
            .join(", ")
    );
    rec.emit(json!({
        "record": "config",
        "command": "oc",
        "grid": args.grid.display().to_string(),
        "n_per_arm": cfg.design.n_per_arm(),
        "interim_n": cfg.design.interim_n(),
        "margin": margin_json(&cfg.design.margin()),
        "tau_prior": prior_json(&cfg.design.tau_prior()),
        "credibility": cfg.design.credibility(),
        "nsim": args.nsim,
        "seed": args.seed,
        "rules": rules.iter().map(|r| r.label()).collect::<Vec<_>>(),
    }))?;
    for e in &historical {
        rec.emit(evidence_record(e))?;
    }

    let mut cells = Vec::with_capacity(cfg.scenarios.len());
    for &scenario in &cfg.scenarios {
        let outcome = match scenario.validate() {
            Err(Error::ScenarioRejected(reason)) => {
                eprintln!(
                    "  p_C {:.2} delta {:+.2}: infeasible ({reason})",
                    scenario.p_control, scenario.delta
                );
                OcCellOutcome::Rejected { reason }
            }
            Err(other) => return Err(other),
            Ok(()) => {
                let results = run_scenario(
                    &cfg.design,
                    &scenario,
                    &historical,
                    &rules,
                    args.nsim,
                    args.seed,
                )?;
                let shown: Vec<String> = results
                    .iter()
                    .map(|r| {
                        format!(
                            "{} {:.1}% ({:.1}%)",
                            r.rule.label(),
                            100.0 * r.p_final,
                            100.0 * r.p_both
                        )
                    })
                    .collect();
                eprintln!(
                    "  p_C {:.2} delta {:+.2}: {}",
                    scenario.p_control,
                    scenario.delta,
                    shown.join(" | ")
                );
                OcCellOutcome::Evaluated {
                    true_rr: scenario.true_rr(),
                    results,
                }
            }
        };
        let cell = OcCell { scenario, outcome };
        rec.emit(oc_cell_record(&cell))?;
        cells.push(cell);
    }

    println!();
    print!("{}", format_oc_table(&cells, &rules));
    rec.finish()
}

fn run_case_study(args: CaseStudyArgs) -> Result<()> {
    let mut rec = Recorder::new(args.records.as_deref())?;
    let want_eop2 = matches!(args.stage, StageChoice::Eop2 | StageChoice::All);
    let want_interim = matches!(args.stage, StageChoice::Interim | StageChoice::All);
    let want_final = matches!(args.stage, StageChoice::Final | StageChoice::All);

    println!(
        "# case-study: stage {}",
        format!("{:?}", args.stage).to_lowercase()
    );
    rec.emit(json!({
        "record": "config",
        "command": "case-study",
        "stage": format!("{:?}", args.stage).to_lowercase(),
        "sensitivity": args.sensitivity,
        "tau_prior": prior_json(&HalfNormal::new(case_study::PRIMARY_TAU_SCALE)?),
        "margin": margin_json(&case_study::margin()),
    }))?;

    if want_eop2 {
        let report = case_study::run_eop2(case_study::PRIMARY_TAU_SCALE)?;
        println!();
        println!("{report}");
        for e in &report.evidence {
            rec.emit(evidence_record(e))?;
        }
        for s in [&report.mu, &report.theta_star, &report.tau]
            .into_iter()
            .chain(report.studies.iter())
        {
            rec.emit(summary_record(s))?;
        }
        rec.emit(tail_record(&Target::Mu, &report.margin, report.p_mu))?;
        rec.emit(tail_record(
            &Target::ThetaStar,
            &report.margin,
            report.p_theta_star,
        ))?;
        rec.emit(json!({
            "record": "ess",
            "ess": report.ess.ess,
            "reference_n": report.ess.reference_n,
            "v0": report.ess.v0,
            "v_star": report.ess.v_star,
        }))?;

        if args.sensitivity {
            let wide = case_study::run_eop2(case_study::SENSITIVITY_TAU_SCALE)?;
            println!();
            println!(
                "sensitivity: half-normal scale {} gives ESS {:.1} (was {:.1}) and tau shortest 95% ({:.2}, {:.2})",
                wide.prior.scale(),
                wide.ess.ess,
                report.ess.ess,
                wide.tau.shortest95.0,
                wide.tau.shortest95.1
            );
            rec.emit(json!({
                "record": "ess",
                "sensitivity": true,
                "tau_prior": prior_json(&wide.prior),
                "ess": wide.ess.ess,
                "reference_n": wide.ess.reference_n,
                "v0": wide.ess.v0,
                "v_star": wide.ess.v_star,
            }))?;
        }
    }

    if want_interim || want_final {
        let report = case_study::run_phase3(case_study::PRIMARY_TAU_SCALE)?;
        let looks: Vec<&case_study::LookReport> = match (want_interim, want_final) {
            (true, true) => vec![&report.interim, &report.final_look],
            (true, false) => vec![&report.interim],
            (false, true) => vec![&report.final_look],
            (false, false) => unreachable!(),
        };
        println!();
        println!(
            "phase III analyses (margin threshold RR {:.4}, tau prior hn:{})",
            report.margin.rr_threshold(),
            report.prior.scale()
        );
        for look in looks {
            println!();
            println!("{look}");
            rec.emit(evidence_record(&look.new_evidence))?;
            rec.emit(summary_record(&look.theta_new))?;
            rec.emit(summary_record(&look.tau))?;
            rec.emit(json!({
                "record": "decision",
                "stage": look.stage.to_string(),
                "rule": "meta-analytic",
                "success": look.meta_success,
                "threshold_rr": report.margin.rr_threshold(),
                "p_exceed": look.p_theta_new,
            }))?;
            rec.emit(json!({
                "record": "decision",
                "stage": look.stage.to_string(),
                "rule": "standalone",
                "success": look.standalone_success,
                "threshold_rr": report.margin.rr_threshold(),
                "wald_lower_rr": look.wald_low.exp(),
                "wald_upper_rr": look.wald_high.exp(),
            }))?;
        }
        println!();
        let verdict = |b: bool| if b { "success" } else { "failure" };
        println!(
            "summary: interim borrowing {}, interim standalone {}; final borrowing {}, final standalone {}",
            verdict(report.interim.meta_success),
            verdict(report.interim.standalone_success),
            verdict(report.final_look.meta_success),
            verdict(report.final_look.standalone_success),
        );
    }
    rec.finish()
}

fn run_prior_summary(args: PriorSummaryArgs) -> Result<()> {
    let prior = args.tau_prior;
    let mut rec = Recorder::new(args.records.as_deref())?;

    println!("# prior-summary: half-normal, scale {}", prior.scale());
    println!("# marginal spread: {} draws, seed {}", args.draws, args.seed);

    let median = prior.median();
    let (lo, hi) = prior.central_interval(0.95)?;
    println!();
    println!("tau prior: median {median:.4}, central 95% ({lo:.4}, {hi:.4})");
    println!(
        "  heterogeneity ratio exp(z tau) at the median: {:.2}",
        heterogeneity_ratio(median)?
    );
    println!();
    println!("reference ladder: multiplicative 95% spread of study effects");
    let ladder: Vec<(f64, f64)> = [0.125, 0.25, 0.5, 1.0]
        .iter()
        .map(|&t| Ok((t, heterogeneity_ratio(t)?)))
        .collect::<Result<_>>()?;
    for (tau, ratio) in &ladder {
        println!("  tau = {tau:<5}: ratio {ratio:.2}");
    }
    let mc = marginal_rr_ratio_mc(prior.scale(), args.draws, args.seed)?;
    let exact = marginal_rr_ratio(prior.scale())?;
    println!();
    println!(
        "marginal risk-ratio spread of a new study effect under this prior: {mc:.3}"
    );
    println!("  (Monte Carlo with {} draws; deterministic quadrature gives {exact:.3})", args.draws);

    rec.emit(json!({
        "record": "config",
        "command": "prior-summary",
        "tau_prior": prior_json(&prior),
        "draws": args.draws,
        "seed": args.seed,
    }))?;
    rec.emit(json!({
        "record": "prior_summary",
        "family": "half-normal",
        "scale": prior.scale(),
        "median": median,
        "central95": {"lower": lo, "upper": hi},
        "heterogeneity_ratio_at_median": heterogeneity_ratio(median)?,
        "ladder": ladder.iter().map(|(t, r)| json!({"tau": t, "ratio": r})).collect::<Vec<_>>(),
        "marginal_rr_ratio_mc": mc,
        "marginal_rr_ratio_quadrature": exact,
        "draws": args.draws,
        "seed": args.seed,
    }))?;
    rec.finish()
}

// -----------------------------------------------------------------------------
