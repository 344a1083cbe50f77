//! Monte Carlo operating characteristics of a borrowing phase III design.
//!
//! A design fixes the phase III sample size, the interim timing, the
//! non-inferiority margin and the heterogeneity prior. A scenario picks the
//! true response rates. For each simulated trial, responder counts are drawn
//! binomially, reduced to log risk-ratio evidence, and each decision rule is
//! asked whether it declares non-inferiority at the interim look and at the
//! final analysis. Because the margin is part of the design, its risk-ratio
//! threshold is computed once from the design's anchor control rate and used
//! unchanged in every scenario; scenario response rates affect only the data
//! generation.
//!
//! Replicates are independent ChaCha streams keyed by replicate index, so
//! results are bit-identical for a given seed no matter how many threads
//! rayon decides to use (and whether parallelism is enabled at all).

use crate::distributions::{norm_quantile, HalfNormal, Z_95};
use crate::error::{Error, Result};
use crate::evidence::{Evidence, NiMargin, Phase, StudyCounts};
use crate::nnhm::fit;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Deserialize;
use std::fmt;

/// Study id given to the simulated phase III trial inside each replicate's
/// analysis dataset.
pub const NEW_STUDY_ID: &str = "new";

// --- design and scenarios ------------------------------------------------------

/// Everything about the phase III trial that is fixed before data exist.
#[derive(Debug, Clone)]
pub struct OcDesign {
    n_per_arm: u64,
    interim_fraction: f64,
    margin: NiMargin,
    tau_prior: HalfNormal,
    credibility: f64,
}

impl OcDesign {
    pub fn new(
        n_per_arm: u64,
        interim_fraction: f64,
        margin: NiMargin,
        tau_prior: HalfNormal,
        credibility: f64,
    ) -> Result<Self> {
        if n_per_arm == 0 {
            return Err(Error::Domain("n_per_arm must be positive".into()));
        }
        if !(interim_fraction > 0.0 && interim_fraction <= 1.0) {
            return Err(Error::Domain(format!(
                "interim fraction must be in (0, 1], got {interim_fraction}"
            )));
        }
        if !(credibility > 0.0 && credibility < 1.0) {
            return Err(Error::Domain(format!(
                "credibility must be in (0, 1), got {credibility}"
            )));
        }
        let design = OcDesign {
            n_per_arm,
            interim_fraction,
            margin,
            tau_prior,
            credibility,
        };
        if design.interim_n() == 0 {
            return Err(Error::Domain(format!(
                "interim fraction {interim_fraction} leaves no patients at the interim look"
            )));
        }
        Ok(design)
    }

    pub fn n_per_arm(&self) -> u64 {
        self.n_per_arm
    }

    /// Patients per arm at the interim look.
    pub fn interim_n(&self) -> u64 {
        (self.interim_fraction * self.n_per_arm as f64).round() as u64
    }

    pub fn interim_fraction(&self) -> f64 {
        self.interim_fraction
    }

    pub fn margin(&self) -> NiMargin {
        self.margin
    }

    pub fn tau_prior(&self) -> HalfNormal {
        self.tau_prior
    }

    pub fn credibility(&self) -> f64 {
        self.credibility
    }
}

/// True state of nature for one simulation cell. The treatment response
/// rate is `p_control + delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcScenario {
    pub p_control: f64,
    pub delta: f64,
}

impl OcScenario {
    pub fn p_treatment(&self) -> f64 {
        self.p_control + self.delta
    }

    /// True risk ratio implied by the scenario.
    pub fn true_rr(&self) -> f64 {
        self.p_treatment() / self.p_control
    }

    /// A scenario is usable only when both arms have response probabilities
    /// strictly inside (0, 1).
    pub fn validate(&self) -> Result<()> {
        if !(self.p_control > 0.0 && self.p_control < 1.0) {
            return Err(Error::ScenarioRejected(format!(
                "control rate {} outside (0, 1)",
                self.p_control
            )));
        }
        let p_t = self.p_treatment();
        if !(p_t > 0.0 && p_t < 1.0) {
            return Err(Error::ScenarioRejected(format!(
                "treatment rate {:.3} = {} + {} outside (0, 1)",
                p_t, self.p_control, self.delta
            )));
        }
        Ok(())
    }
}

// --- decision rules --------------------------------------------------------------

/// How a credible interval is read off a posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalKind {
    /// Highest-density (minimum-width) interval. The default: it matches
    /// how the borrowing analyses report intervals, and for skewed
    /// posteriors it is the tighter statement.
    Shortest,
    /// Equal-tailed interval from the 2.5% and 97.5% quantiles.
    Central,
}

/// Non-inferiority decision rule applied at each analysis look.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionRule {
    /// Fit the hierarchical model to historical plus current data and
    /// require the credible interval for the current trial's effect to lie
    /// entirely above the margin threshold.
    MetaAnalytic(IntervalKind),
    /// Ignore the historical studies: require the Wald confidence interval
    /// of the current trial's log risk ratio to clear the threshold.
    Standalone,
}

impl DecisionRule {
    pub fn label(&self) -> &'static str {
        match self {
            DecisionRule::MetaAnalytic(IntervalKind::Shortest) => "meta-analytic",
            DecisionRule::MetaAnalytic(IntervalKind::Central) => "meta-analytic-central",
            DecisionRule::Standalone => "standalone",
        }
    }
}

impl fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for DecisionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "meta" | "meta-analytic" => Ok(DecisionRule::MetaAnalytic(IntervalKind::Shortest)),
            "meta-central" | "meta-analytic-central" => {
                Ok(DecisionRule::MetaAnalytic(IntervalKind::Central))
            }
            "standalone" => Ok(DecisionRule::Standalone),
            other => Err(Error::Domain(format!(
                "unknown decision rule {other:?}; expected meta, meta-central or standalone"
            ))),
        }
    }
}

/// Two-sided normal quantile for a given interval mass, pinned to the
/// conventional constant at 95% so Wald limits reproduce published values
/// digit for digit.
fn z_for(mass: f64) -> Result<f64> {
    if (mass - 0.95).abs() < 1e-12 {
        Ok(Z_95)
    } else {
        norm_quantile(0.5 * (1.0 + mass))
    }
}

/// Lower limit of the standalone Wald interval on the log risk-ratio scale.
pub fn wald_lower(evidence: &Evidence, mass: f64) -> Result<f64> {
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::Domain(format!(
            "interval mass must be in (0, 1), got {mass}"
        )));
    }
    Ok(evidence.y - z_for(mass)? * evidence.s)
}

/// Upper limit of the standalone Wald interval on the log risk-ratio scale.
pub fn wald_upper(evidence: &Evidence, mass: f64) -> Result<f64> {
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::Domain(format!(
            "interval mass must be in (0, 1), got {mass}"
        )));
    }
    Ok(evidence.y + z_for(mass)? * evidence.s)
}

// --- one simulated trial -----------------------------------------------------------

/// Decisions one rule reached in one simulated trial.
#[derive(Debug, Clone, Copy)]
pub struct RuleOutcome {
    pub rule: DecisionRule,
    pub at_interim: bool,
    pub at_final: bool,
}

/// All requested rules applied to the same simulated data.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub outcomes: Vec<RuleOutcome>,
}

/// Simulate one phase III trial under the scenario and evaluate every rule
/// on the same data at the interim and final looks. Final-look counts extend
/// the interim counts, as they would in a real group-sequential trial, so
/// the two looks are properly correlated.
pub fn simulate_trial<R: Rng + ?Sized>(
    design: &OcDesign,
    scenario: &OcScenario,
    historical: &[Evidence],
    rules: &[DecisionRule],
    rng: &mut R,
) -> Result<TrialOutcome> {
    scenario.validate()?;
    if rules.is_empty() {
        return Err(Error::Domain("no decision rules requested".into()));
    }
    if historical.iter().any(|e| e.study_id == NEW_STUDY_ID) {
        return Err(Error::Data(format!(
            "historical study id {NEW_STUDY_ID:?} collides with the simulated trial"
        )));
    }
    let p_t = scenario.p_treatment();
    let p_c = scenario.p_control;
    let n_int = design.interim_n();
    let n_fin = design.n_per_arm;
    let draw = |n: u64, p: f64, rng: &mut R| -> u64 {
        if n == 0 {
            0
        } else {
            Binomial::new(n, p).expect("validated scenario").sample(rng)
        }
    };
    let rt_int = draw(n_int, p_t, rng);
    let rc_int = draw(n_int, p_c, rng);
    let rt_fin = rt_int + draw(n_fin - n_int, p_t, rng);
    let rc_fin = rc_int + draw(n_fin - n_int, p_c, rng);

    let ev_interim = StudyCounts::new(NEW_STUDY_ID, rt_int, n_int, rc_int, n_int, Phase::Three)?
        .to_evidence()?;
    let ev_final = StudyCounts::new(NEW_STUDY_ID, rt_fin, n_fin, rc_fin, n_fin, Phase::Three)?
        .to_evidence()?;

    let log_thr = design.margin.log_rr_threshold();
    let mass = design.credibility;

    // The hierarchical fits are shared between rules that need them.
    let mut fits: Option<[crate::nnhm::NnhmFit; 2]> = None;
    let ensure_fits = |fits: &mut Option<[crate::nnhm::NnhmFit; 2]>| -> Result<()> {
        if fits.is_none() {
            let mut with_interim = historical.to_vec();
            with_interim.push(ev_interim.clone());
            let mut with_final = historical.to_vec();
            with_final.push(ev_final.clone());
            *fits = Some([
                fit(&with_interim, design.tau_prior)?,
                fit(&with_final, design.tau_prior)?,
            ]);
        }
        Ok(())
    };

    let mut outcomes = Vec::with_capacity(rules.len());
    for &rule in rules {
        let (at_interim, at_final) = match rule {
            DecisionRule::Standalone => (
                wald_lower(&ev_interim, mass)? > log_thr,
                wald_lower(&ev_final, mass)? > log_thr,
            ),
            DecisionRule::MetaAnalytic(kind) => {
                ensure_fits(&mut fits)?;
                let [fit_int, fit_fin] = fits.as_ref().expect("just ensured");
                let post_int = fit_int.theta_marginal(NEW_STUDY_ID)?;
                let post_fin = fit_fin.theta_marginal(NEW_STUDY_ID)?;
                let decide = |post: &crate::distributions::NormalMixture| -> Result<bool> {
                    match kind {
                        IntervalKind::Shortest => post.shortest_excludes_below(log_thr, mass),
                        IntervalKind::Central => Ok(post.cdf(log_thr) < 0.5 * (1.0 - mass)),
                    }
                };
                (decide(&post_int)?, decide(&post_fin)?)
            }
        };
        outcomes.push(RuleOutcome {
            rule,
            at_interim,
            at_final,
        });
    }
    Ok(TrialOutcome { outcomes })
}

// --- aggregation over replicates ------------------------------------------------------

/// Success rates of one rule in one scenario cell.
#[derive(Debug, Clone, Copy)]
pub struct OcRuleResult {
    pub rule: DecisionRule,
    pub n_sim: usize,
    /// Probability of declaring non-inferiority at the interim look.
    pub p_interim: f64,
    /// Probability of declaring non-inferiority at the final analysis.
    pub p_final: f64,
    /// Probability of declaring it at both looks.
    pub p_both: f64,
}

impl OcRuleResult {
    fn rate(successes: u64, n: usize) -> f64 {
        successes as f64 / n as f64
    }

    /// Binomial Monte Carlo standard error of an estimated probability.
    pub fn mc_se(p: f64, n_sim: usize) -> f64 {
        (p * (1.0 - p) / n_sim as f64).sqrt()
    }
}

/// Run one scenario cell: `n_sim` independent replicates, each its own
/// ChaCha stream derived from `seed`, aggregated with order-independent
/// integer counts so the result does not depend on scheduling.
pub fn run_scenario(
    design: &OcDesign,
    scenario: &OcScenario,
    historical: &[Evidence],
    rules: &[DecisionRule],
    n_sim: usize,
    seed: u64,
) -> Result<Vec<OcRuleResult>> {
    scenario.validate()?;
    if n_sim == 0 {
        return Err(Error::Domain("n_sim must be positive".into()));
    }
    if rules.is_empty() {
        return Err(Error::Domain("no decision rules requested".into()));
    }
    let zero = || vec![[0u64; 3]; rules.len()];
    let counts = (0..n_sim as u64)
        .into_par_iter()
        .try_fold(zero, |mut acc, replicate| -> Result<Vec<[u64; 3]>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(replicate);
            let trial = simulate_trial(design, scenario, historical, rules, &mut rng)?;
            for (slot, outcome) in acc.iter_mut().zip(&trial.outcomes) {
                slot[0] += outcome.at_interim as u64;
                slot[1] += outcome.at_final as u64;
                slot[2] += (outcome.at_interim && outcome.at_final) as u64;
            }
            Ok(acc)
        })
        .try_reduce(zero, |mut a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                x[0] += y[0];
                x[1] += y[1];
                x[2] += y[2];
            }
            Ok(a)
        })?;
    Ok(rules
        .iter()
        .zip(&counts)
        .map(|(&rule, c)| OcRuleResult {
            rule,
            n_sim,
            p_interim: OcRuleResult::rate(c[0], n_sim),
            p_final: OcRuleResult::rate(c[1], n_sim),
            p_both: OcRuleResult::rate(c[2], n_sim),
        })
        .collect())
}

/// One cell of the scenario grid with its outcome.
#[derive(Debug, Clone)]
pub struct OcCell {
    pub scenario: OcScenario,
    pub outcome: OcCellOutcome,
}

#[derive(Debug, Clone)]
pub enum OcCellOutcome {
    Evaluated {
        true_rr: f64,
        results: Vec<OcRuleResult>,
    },
    /// Cells whose implied response rates leave (0, 1) cannot be simulated
    /// and are reported as such rather than failing the whole grid.
    Rejected { reason: String },
}

/// Evaluate a whole grid of scenarios. Infeasible cells are kept in the
/// output as rejections so tabulations preserve the grid shape. Cells are
/// evaluated with the same seed, which makes neighbouring cells use common
/// random numbers; differences between cells are then design effects, not
/// Monte Carlo noise.
pub fn run_oc(
    design: &OcDesign,
    scenarios: &[OcScenario],
    historical: &[Evidence],
    rules: &[DecisionRule],
    n_sim: usize,
    seed: u64,
) -> Result<Vec<OcCell>> {
    scenarios
        .iter()
        .map(|&scenario| {
            let outcome = match scenario.validate() {
                Err(Error::ScenarioRejected(reason)) => OcCellOutcome::Rejected { reason },
                Err(other) => return Err(other),
                Ok(()) => OcCellOutcome::Evaluated {
                    true_rr: scenario.true_rr(),
                    results: run_scenario(design, &scenario, historical, rules, n_sim, seed)?,
                },
            };
            Ok(OcCell { scenario, outcome })
        })
        .collect()
}

// --- grid configuration file ---------------------------------------------------------

#[derive(Debug, Deserialize)]
struct RawGridFile {
    design: RawDesign,
    grid: RawGrid,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDesign {
    n_per_arm: u64,
    p_control: f64,
    margin_abs: f64,
    #[serde(default = "default_interim_fraction")]
    interim_fraction: f64,
    #[serde(default = "default_tau_scale")]
    tau_prior_scale: f64,
    #[serde(default = "default_credibility")]
    credibility: f64,
}

fn default_interim_fraction() -> f64 {
    0.5
}

fn default_tau_scale() -> f64 {
    0.5
}

fn default_credibility() -> f64 {
    0.95
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    p_control: Vec<f64>,
    delta: Vec<f64>,
}

/// A parsed grid configuration: the design plus the cartesian product of
/// control rates and treatment-effect deltas.
#[derive(Debug, Clone)]
pub struct GridConfig {
    pub design: OcDesign,
    pub scenarios: Vec<OcScenario>,
    pub p_control: Vec<f64>,
    pub delta: Vec<f64>,
}

/// Parse a TOML grid configuration:
///
/// ```toml
/// [design]
/// n_per_arm = 80
/// p_control = 0.9        # margin anchor, fixes the decision threshold
/// margin_abs = 0.12
/// interim_fraction = 0.5 # optional, default 0.5
/// tau_prior_scale = 0.5  # optional, default 0.5
/// credibility = 0.95     # optional, default 0.95
///
/// [grid]
/// p_control = [0.70, 0.75, 0.80, 0.85, 0.90]
/// delta = [-0.12, -0.06, 0.00, 0.06, 0.12]
/// ```
pub fn parse_grid_config(text: &str) -> Result<GridConfig> {
    let raw: RawGridFile =
        toml::from_str(text).map_err(|e| Error::Data(format!("grid config: {e}")))?;
    let margin = NiMargin::new(raw.design.p_control, raw.design.margin_abs)?;
    let tau_prior = HalfNormal::new(raw.design.tau_prior_scale)?;
    let design = OcDesign::new(
        raw.design.n_per_arm,
        raw.design.interim_fraction,
        margin,
        tau_prior,
        raw.design.credibility,
    )?;
    if raw.grid.p_control.is_empty() || raw.grid.delta.is_empty() {
        return Err(Error::Data(
            "grid config: p_control and delta lists must be non-empty".into(),
        ));
    }
    let mut scenarios = Vec::with_capacity(raw.grid.p_control.len() * raw.grid.delta.len());
    for &p_c in &raw.grid.p_control {
        for &d in &raw.grid.delta {
            scenarios.push(OcScenario {
                p_control: p_c,
                delta: d,
            });
        }
    }
    Ok(GridConfig {
        design,
        scenarios,
        p_control: raw.grid.p_control,
        delta: raw.grid.delta,
    })
}

/// Load and parse a grid configuration file.
pub fn load_grid_config(path: &std::path::Path) -> Result<GridConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_grid_config(&text)
}

// --- tabulation -------------------------------------------------------------------

/// Render grid results as a text table, one row block per control rate and
/// one column per delta, showing the final-analysis success percentage with
/// the interim-and-final percentage in parentheses. Infeasible cells show
/// `--`.
pub fn format_oc_table(cells: &[OcCell], rules: &[DecisionRule]) -> String {
    use std::fmt::Write;

    let mut p_controls: Vec<f64> = Vec::new();
    let mut deltas: Vec<f64> = Vec::new();
    for cell in cells {
        if !p_controls.iter().any(|&p| p == cell.scenario.p_control) {
            p_controls.push(cell.scenario.p_control);
        }
        if !deltas.iter().any(|&d| d == cell.scenario.delta) {
            deltas.push(cell.scenario.delta);
        }
    }
    p_controls.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    deltas.sort_by(|a, b| a.partial_cmp(b).expect("finite"));

    let find = |p: f64, d: f64| -> Option<&OcCell> {
        cells
            .iter()
            .find(|c| c.scenario.p_control == p && c.scenario.delta == d)
    };

    let rule_width = rules
        .iter()
        .map(|r| r.label().len())
        .max()
        .unwrap_or(4)
        .max(4);
    let col_width = 14;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "probability of declaring non-inferiority, percent: final (interim and final)"
    );
    let _ = write!(out, "{:>6}  {:<rule_width$}", "p_C", "rule");
    for d in &deltas {
        let _ = write!(out, "{:>col_width$}", format!("delta {d:+.2}"));
    }
    out.push('\n');
    for &p in &p_controls {
        for (ri, rule) in rules.iter().enumerate() {
            if ri == 0 {
                let _ = write!(out, "{p:>6.2}  {:<rule_width$}", rule.label());
            } else {
                let _ = write!(out, "{:>6}  {:<rule_width$}", "", rule.label());
            }
            for &d in &deltas {
                let text = match find(p, d).map(|c| &c.outcome) {
                    Some(OcCellOutcome::Evaluated { results, .. }) => results
                        .iter()
                        .find(|r| r.rule == *rule)
                        .map(|r| {
                            format!("{:.1} ({:.1})", 100.0 * r.p_final, 100.0 * r.p_both)
                        })
                        .unwrap_or_else(|| "?".to_string()),
                    Some(OcCellOutcome::Rejected { .. }) => "--".to_string(),
                    None => "?".to_string(),
                };
                let _ = write!(out, "{text:>col_width$}");
            }
            out.push('\n');
        }
    }
    out
}

// -----------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::Phase;

    fn historical() -> Vec<Evidence> {
        [("4", 19, 23, 16, 22), ("5", 15, 18, 12, 17), ("6", 31, 36, 27, 38)]
            .into_iter()
            .map(|(id, rt, nt, rc, nc)| {
                StudyCounts::new(id, rt, nt, rc, nc, Phase::Two)
                    .unwrap()
                    .to_evidence()
                    .unwrap()
            })
            .collect()
    }

    fn design() -> OcDesign {
        OcDesign::new(
            80,
            0.5,
            NiMargin::new(0.9, 0.12).unwrap(),
            HalfNormal::new(0.5).unwrap(),
            0.95,
        )
        .unwrap()
    }

    #[test]
    fn design_validation() {
        let m = NiMargin::new(0.9, 0.12).unwrap();
        let hn = HalfNormal::new(0.5).unwrap();
        assert!(OcDesign::new(0, 0.5, m, hn, 0.95).is_err());
        assert!(OcDesign::new(80, 0.0, m, hn, 0.95).is_err());
        assert!(OcDesign::new(80, 1.5, m, hn, 0.95).is_err());
        assert!(OcDesign::new(80, 0.5, m, hn, 1.0).is_err());
        assert_eq!(design().interim_n(), 40);
    }

    #[test]
    fn scenario_feasibility() {
        assert!(OcScenario { p_control: 0.9, delta: 0.06 }.validate().is_ok());
        assert!(matches!(
            OcScenario { p_control: 0.9, delta: 0.12 }.validate(),
            Err(Error::ScenarioRejected(_))
        ));
        assert!(OcScenario { p_control: 0.9, delta: -0.9 }.validate().is_err());
        assert!(OcScenario { p_control: 1.0, delta: -0.1 }.validate().is_err());
        let s = OcScenario { p_control: 0.8, delta: 0.08 };
        assert!((s.true_rr() - 1.1).abs() < 1e-12);
    }

    #[test]
    fn wald_interval_reference_values() {
        // final-look data of the case study: 74/84 vs 73/80
        let ev = StudyCounts::new("7", 74, 84, 73, 80, Phase::Three)
            .unwrap()
            .to_evidence()
            .unwrap();
        let lo = wald_lower(&ev, 0.95).unwrap().exp();
        let hi = wald_upper(&ev, 0.95).unwrap().exp();
        assert!((lo - 0.8702).abs() < 5e-4, "lower {lo}");
        assert!((hi - 1.0711).abs() < 5e-4, "upper {hi}");
        // interim: 35/40 vs 36/40 fails the 0.8667 threshold standalone
        let int = StudyCounts::new("7", 35, 40, 36, 40, Phase::Three)
            .unwrap()
            .to_evidence()
            .unwrap();
        let lo_int = wald_lower(&int, 0.95).unwrap().exp();
        assert!((lo_int - 0.8316).abs() < 5e-4, "interim lower {lo_int}");
    }

    #[test]
    fn identical_seeds_give_identical_results() {
        let rules = [
            DecisionRule::MetaAnalytic(IntervalKind::Shortest),
            DecisionRule::Standalone,
        ];
        let scenario = OcScenario { p_control: 0.9, delta: 0.0 };
        let a = run_scenario(&design(), &scenario, &historical(), &rules, 50, 42).unwrap();
        let b = run_scenario(&design(), &scenario, &historical(), &rules, 50, 42).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.p_interim, y.p_interim);
            assert_eq!(x.p_final, y.p_final);
            assert_eq!(x.p_both, y.p_both);
        }
        let c = run_scenario(&design(), &scenario, &historical(), &rules, 50, 43).unwrap();
        assert!(
            a.iter().zip(&c).any(|(x, y)| x.p_final != y.p_final
                || x.p_interim != y.p_interim
                || x.p_both != y.p_both),
            "different seeds should give different realisations"
        );
    }

    #[test]
    fn joint_rate_never_exceeds_marginals() {
        let rules = [
            DecisionRule::MetaAnalytic(IntervalKind::Shortest),
            DecisionRule::MetaAnalytic(IntervalKind::Central),
            DecisionRule::Standalone,
        ];
        let scenario = OcScenario { p_control: 0.8, delta: 0.0 };
        let results =
            run_scenario(&design(), &scenario, &historical(), &rules, 60, 7).unwrap();
        for r in &results {
            assert!(r.p_both <= r.p_interim + 1e-12, "{}", r.rule);
            assert!(r.p_both <= r.p_final + 1e-12, "{}", r.rule);
        }
    }

    #[test]
    fn borrowing_beats_standalone_under_consistency() {
        // With rates matching the historical pattern, borrowing should give
        // visibly higher final success than the standalone rule.
        let rules = [
            DecisionRule::MetaAnalytic(IntervalKind::Shortest),
            DecisionRule::Standalone,
        ];
        let scenario = OcScenario { p_control: 0.9, delta: 0.0 };
        let results =
            run_scenario(&design(), &scenario, &historical(), &rules, 300, 11).unwrap();
        let meta = results[0].p_final;
        let alone = results[1].p_final;
        // population values are about 0.87 and 0.78
        assert!(meta > alone, "meta {meta} vs standalone {alone}");
        assert!((meta - 0.87).abs() < 0.08, "meta {meta}");
        assert!((alone - 0.78).abs() < 0.10, "standalone {alone}");
    }

    #[test]
    fn extreme_rates_stay_finite_via_continuity_correction() {
        let scenario = OcScenario { p_control: 0.985, delta: 0.009 };
        let rules = [DecisionRule::Standalone];
        let results =
            run_scenario(&design(), &scenario, &historical(), &rules, 40, 3).unwrap();
        assert!(results[0].p_final.is_finite());
    }

    #[test]
    fn grid_rejects_only_infeasible_cells() {
        let scenarios = [
            OcScenario { p_control: 0.9, delta: 0.0 },
            OcScenario { p_control: 0.9, delta: 0.12 },
        ];
        let rules = [DecisionRule::Standalone];
        let cells = run_oc(&design(), &scenarios, &historical(), &rules, 20, 5).unwrap();
        assert!(matches!(cells[0].outcome, OcCellOutcome::Evaluated { .. }));
        assert!(matches!(cells[1].outcome, OcCellOutcome::Rejected { .. }));
        let table = format_oc_table(&cells, &rules);
        assert!(table.contains("--"), "table should mark rejected cells:\n{table}");
    }

    #[test]
    fn grid_config_parses_and_validates() {
        let text = r#"
            [design]
            n_per_arm = 80
            p_control = 0.9
            margin_abs = 0.12

            [grid]
            p_control = [0.70, 0.90]
            delta = [-0.06, 0.00]
        "#;
        let cfg = parse_grid_config(text).unwrap();
        assert_eq!(cfg.scenarios.len(), 4);
        assert_eq!(cfg.design.n_per_arm(), 80);
        assert_eq!(cfg.design.interim_n(), 40);
        assert!((cfg.design.margin().rr_threshold() - 0.8666666666666667).abs() < 1e-12);
        assert!((cfg.design.tau_prior().scale() - 0.5).abs() < 1e-15);
        assert!((cfg.design.credibility() - 0.95).abs() < 1e-15);

        assert!(parse_grid_config("[design]\nn_per_arm = 80").is_err());
        let unknown = r#"
            [design]
            n_per_arm = 80
            p_control = 0.9
            margin_abs = 0.12
            bogus = 1

            [grid]
            p_control = [0.9]
            delta = [0.0]
        "#;
        assert!(parse_grid_config(unknown).is_err());
    }

    #[test]
    fn rule_parsing() {
        assert_eq!(
            "meta".parse::<DecisionRule>().unwrap(),
            DecisionRule::MetaAnalytic(IntervalKind::Shortest)
        );
        assert_eq!(
            "meta-central".parse::<DecisionRule>().unwrap(),
            DecisionRule::MetaAnalytic(IntervalKind::Central)
        );
        assert_eq!(
            "standalone".parse::<DecisionRule>().unwrap(),
            DecisionRule::Standalone
        );
        assert!("bogus".parse::<DecisionRule>().is_err());
    }
}
