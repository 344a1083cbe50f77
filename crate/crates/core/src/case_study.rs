//! The worked case study bundled with the crate.
//!
//! Three completed phase II trials of the same treatment-versus-control
//! comparison form the historical basis; a phase III non-inferiority trial
//! with 80 patients per arm reads out at an interim look (40 per arm) and at
//! the final analysis. The endpoint is a response indicator analysed on the
//! risk-ratio scale, with non-inferiority declared when the risk ratio
//! credibly exceeds `(0.90 - 0.12) / 0.90 = 0.8667`.
//!
//! The functions here reproduce the full workflow end to end: the
//! end-of-phase-II meta-analysis with its predictive (MAP) prior and
//! effective sample size, and the phase III analyses under both the
//! borrowing rule and a standalone Wald rule. The counts are embedded so
//! everything runs without touching the filesystem; the same data ship as
//! `data/zirgan.csv` for exercising the file-based interface.

use crate::distributions::HalfNormal;
use crate::error::Result;
use crate::evidence::{Evidence, NiMargin, Phase, StudyCounts};
use crate::nnhm::{
    effective_sample_size, fit, marginal_summary, tail_probability, EssResult, Summary, Target,
    DEFAULT_PROBS,
};
use crate::ocsim::{wald_lower, wald_upper};
use std::fmt;

/// Default heterogeneity prior scale for the primary analysis.
pub const PRIMARY_TAU_SCALE: f64 = 0.5;
/// Wider prior used in the sensitivity analysis.
pub const SENSITIVITY_TAU_SCALE: f64 = 1.0;

/// The non-inferiority margin of the case study: control rate 0.90 with an
/// absolute margin of 0.12.
pub fn margin() -> NiMargin {
    NiMargin::new(0.9, 0.12).expect("constants are valid")
}

/// The three completed phase II studies.
pub fn historical_counts() -> Vec<StudyCounts> {
    vec![
        StudyCounts::new("4", 19, 23, 16, 22, Phase::Two).expect("constants are valid"),
        StudyCounts::new("5", 15, 18, 12, 17, Phase::Two).expect("constants are valid"),
        StudyCounts::new("6", 31, 36, 27, 38, Phase::Two).expect("constants are valid"),
    ]
}

/// Phase III counts at the interim look (40 per arm).
pub fn interim_counts() -> StudyCounts {
    StudyCounts::new("7", 35, 40, 36, 40, Phase::Three).expect("constants are valid")
}

/// Phase III counts at the final analysis (84 and 80 randomised).
pub fn final_counts() -> StudyCounts {
    StudyCounts::new("7", 74, 84, 73, 80, Phase::Three).expect("constants are valid")
}

/// The full bundled dataset in file form: historical studies plus the two
/// phase III looks under distinct ids, mirroring `data/zirgan.csv`.
pub fn dataset() -> Vec<StudyCounts> {
    let mut rows = historical_counts();
    let mut ia = interim_counts();
    ia.study_id = "7IA".into();
    let mut fa = final_counts();
    fa.study_id = "7FA".into();
    rows.push(ia);
    rows.push(fa);
    rows
}

/// Historical studies reduced to log risk-ratio evidence.
pub fn historical_evidence() -> Result<Vec<Evidence>> {
    historical_counts().iter().map(StudyCounts::to_evidence).collect()
}

/// Patients behind the historical evidence, the reference point for the
/// effective sample size (154 here).
pub fn ess_reference_n() -> f64 {
    historical_counts().iter().map(|c| c.total() as f64).sum()
}

// --- end of phase II -----------------------------------------------------------

/// Results of the end-of-phase-II meta-analysis under one heterogeneity
/// prior.
#[derive(Debug, Clone)]
pub struct Eop2Report {
    pub prior: HalfNormal,
    pub margin: NiMargin,
    pub evidence: Vec<Evidence>,
    pub mu: Summary,
    pub theta_star: Summary,
    pub tau: Summary,
    /// Per-study shrunken effects, in dataset order (forest-plot material).
    pub studies: Vec<Summary>,
    /// Posterior probability that the mean effect clears the margin.
    pub p_mu: f64,
    /// Posterior probability that a new study's effect clears the margin.
    pub p_theta_star: f64,
    pub ess: EssResult,
}

/// Run the end-of-phase-II analysis with a half-normal prior of the given
/// scale on `tau`.
pub fn run_eop2(tau_scale: f64) -> Result<Eop2Report> {
    let prior = HalfNormal::new(tau_scale)?;
    let margin = margin();
    let evidence = historical_evidence()?;
    let f = fit(&evidence, prior)?;
    let thr = margin.log_rr_threshold();
    let studies = evidence
        .iter()
        .map(|e| marginal_summary(&f, &Target::Theta(e.study_id.clone()), &DEFAULT_PROBS))
        .collect::<Result<Vec<_>>>()?;
    Ok(Eop2Report {
        prior,
        margin,
        mu: marginal_summary(&f, &Target::Mu, &DEFAULT_PROBS)?,
        theta_star: marginal_summary(&f, &Target::ThetaStar, &DEFAULT_PROBS)?,
        tau: marginal_summary(&f, &Target::Tau, &DEFAULT_PROBS)?,
        studies,
        p_mu: tail_probability(&f, &Target::Mu, thr)?,
        p_theta_star: tail_probability(&f, &Target::ThetaStar, thr)?,
        ess: effective_sample_size(&f, ess_reference_n())?,
        evidence,
    })
}

// --- phase III -----------------------------------------------------------------

/// Analysis look of the phase III trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Interim,
    Final,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Interim => write!(f, "interim"),
            Stage::Final => write!(f, "final"),
        }
    }
}

/// One phase III look analysed both ways: borrowing from the historical
/// studies through the hierarchical model, and standalone.
#[derive(Debug, Clone)]
pub struct LookReport {
    pub stage: Stage,
    pub counts: StudyCounts,
    pub new_evidence: Evidence,
    /// Posterior of the phase III study's true effect under borrowing.
    pub theta_new: Summary,
    pub tau: Summary,
    /// Posterior probability that the phase III effect clears the margin.
    pub p_theta_new: f64,
    /// Borrowing decision: shortest 95% interval above the threshold.
    pub meta_success: bool,
    /// Standalone Wald 95% limits on the log risk-ratio scale.
    pub wald_low: f64,
    pub wald_high: f64,
    /// Standalone decision: Wald lower limit above the threshold.
    pub standalone_success: bool,
}

/// Both phase III looks under one heterogeneity prior.
#[derive(Debug, Clone)]
pub struct Phase3Report {
    pub prior: HalfNormal,
    pub margin: NiMargin,
    pub interim: LookReport,
    pub final_look: LookReport,
}

fn run_look(stage: Stage, counts: StudyCounts, prior: HalfNormal) -> Result<LookReport> {
    let margin = margin();
    let thr = margin.log_rr_threshold();
    let new_evidence = counts.to_evidence()?;
    let mut all = historical_evidence()?;
    all.push(new_evidence.clone());
    let f = fit(&all, prior)?;
    let target = Target::Theta(counts.study_id.clone());
    let theta_new = marginal_summary(&f, &target, &DEFAULT_PROBS)?;
    let posterior = f.theta_marginal(&counts.study_id)?;
    Ok(LookReport {
        stage,
        new_evidence: new_evidence.clone(),
        theta_new,
        tau: marginal_summary(&f, &Target::Tau, &DEFAULT_PROBS)?,
        p_theta_new: tail_probability(&f, &target, thr)?,
        meta_success: posterior.shortest_excludes_below(thr, 0.95)?,
        wald_low: wald_lower(&new_evidence, 0.95)?,
        wald_high: wald_upper(&new_evidence, 0.95)?,
        standalone_success: wald_lower(&new_evidence, 0.95)? > thr,
        counts,
    })
}

/// Run the phase III analyses (interim and final) with a half-normal prior
/// of the given scale on `tau`.
pub fn run_phase3(tau_scale: f64) -> Result<Phase3Report> {
    let prior = HalfNormal::new(tau_scale)?;
    Ok(Phase3Report {
        prior,
        margin: margin(),
        interim: run_look(Stage::Interim, interim_counts(), prior)?,
        final_look: run_look(Stage::Final, final_counts(), prior)?,
    })
}

// --- rendering -----------------------------------------------------------------

fn rr_triplet(s: &Summary) -> (f64, f64, f64) {
    // DEFAULT_PROBS order: 2.5%, median, 97.5%
    (
        s.quantiles[0].1.exp(),
        s.quantiles[1].1.exp(),
        s.quantiles[2].1.exp(),
    )
}

impl fmt::Display for Eop2Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "end-of-phase-II meta-analysis ({} studies, half-normal tau prior, scale {})",
            self.evidence.len(),
            self.prior.scale()
        )?;
        writeln!(f)?;
        writeln!(f, "  observed evidence (risk-ratio scale)")?;
        for e in &self.evidence {
            writeln!(
                f,
                "    study {:<4} RR {:.3}   log RR {:+.4} (se {:.4})",
                e.study_id,
                e.rr(),
                e.y,
                e.s
            )?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "  posterior summaries              median   central 95%        shortest 95%"
        )?;
        for (label, s) in [("mu (mean effect)", &self.mu), ("theta* (new study)", &self.theta_star)]
        {
            let (lo, med, hi) = rr_triplet(s);
            writeln!(
                f,
                "    {label:<28} RR {med:>6.3}   ({lo:.3}, {hi:.3})     ({:.3}, {:.3})",
                s.shortest95.0.exp(),
                s.shortest95.1.exp()
            )?;
        }
        for s in &self.studies {
            let (lo, med, hi) = rr_triplet(s);
            writeln!(
                f,
                "    {:<28} RR {med:>6.3}   ({lo:.3}, {hi:.3})     ({:.3}, {:.3})",
                format!("theta ({})", s.target),
                s.shortest95.0.exp(),
                s.shortest95.1.exp()
            )?;
        }
        writeln!(
            f,
            "    {:<28} sd {:>6.2}   ({:.2}, {:.2})         ({:.2}, {:.2})",
            "tau (heterogeneity)",
            self.tau.quantiles[1].1,
            self.tau.quantiles[0].1,
            self.tau.quantiles[2].1,
            self.tau.shortest95.0,
            self.tau.shortest95.1
        )?;
        writeln!(f)?;
        writeln!(
            f,
            "  margin: control {:.2}, absolute {:.2} -> RR threshold {:.4}",
            self.margin.p_control(),
            self.margin.margin_abs(),
            self.margin.rr_threshold()
        )?;
        writeln!(f, "    P(mu     > threshold) = {:.3}", self.p_mu)?;
        writeln!(f, "    P(theta* > threshold) = {:.3}", self.p_theta_star)?;
        writeln!(f)?;
        writeln!(
            f,
            "  MAP prior effective sample size: {:.1} of {:.0} historical patients",
            self.ess.ess, self.ess.reference_n
        )?;
        write!(
            f,
            "    (pooled variance {:.5}, predictive variance {:.5})",
            self.ess.v0, self.ess.v_star
        )
    }
}

impl fmt::Display for LookReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lo, med, hi) = rr_triplet(&self.theta_new);
        writeln!(
            f,
            "  {} analysis: {}/{} treated vs {}/{} control responders",
            self.stage, self.counts.r_t, self.counts.n_t, self.counts.r_c, self.counts.n_c
        )?;
        writeln!(
            f,
            "    observed RR {:.3}; borrowing posterior RR {med:.3} (central 95%: {lo:.3}, {hi:.3})",
            self.new_evidence.rr()
        )?;
        writeln!(
            f,
            "    shortest 95%: ({:.3}, {:.3}); tau median {:.2}, shortest 95% ({:.2}, {:.2})",
            self.theta_new.shortest95.0.exp(),
            self.theta_new.shortest95.1.exp(),
            self.tau.quantiles[1].1,
            self.tau.shortest95.0,
            self.tau.shortest95.1
        )?;
        writeln!(f, "    P(theta_new > threshold) = {:.3}", self.p_theta_new)?;
        writeln!(
            f,
            "    borrowing rule:  non-inferiority {}",
            if self.meta_success { "DECLARED" } else { "not declared" }
        )?;
        write!(
            f,
            "    standalone rule: Wald 95% ({:.3}, {:.3}) -> non-inferiority {}",
            self.wald_low.exp(),
            self.wald_high.exp(),
            if self.standalone_success { "DECLARED" } else { "not declared" }
        )
    }
}

impl fmt::Display for Phase3Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "phase III analyses (borrowing from {} historical studies, half-normal tau prior, scale {})",
            historical_counts().len(),
            self.prior.scale()
        )?;
        writeln!(
            f,
            "  margin: RR threshold {:.4}",
            self.margin.rr_threshold()
        )?;
        writeln!(f)?;
        writeln!(f, "{}", self.interim)?;
        writeln!(f)?;
        write!(f, "{}", self.final_look)
    }
}

// -----------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_counts_are_consistent() {
        assert_eq!(historical_counts().len(), 3);
        assert_eq!(ess_reference_n(), 154.0);
        assert_eq!(dataset().len(), 5);
        let ids: Vec<String> = dataset().into_iter().map(|c| c.study_id).collect();
        assert_eq!(ids, ["4", "5", "6", "7IA", "7FA"]);
        assert!((margin().rr_threshold() - 0.8666666666666667).abs() < 1e-12);
    }

    #[test]
    fn eop2_reproduces_published_numbers() {
        let r = run_eop2(PRIMARY_TAU_SCALE).unwrap();
        assert!((r.p_mu - 0.971).abs() < 0.003, "P(mu) = {}", r.p_mu);
        assert!(
            (r.p_theta_star - 0.920).abs() < 0.003,
            "P(theta*) = {}",
            r.p_theta_star
        );
        assert!((r.ess.ess - 14.1).abs() < 0.5, "ess = {}", r.ess.ess);
        // tau: median 0.12 with shortest 95% interval (0.00, 0.51)
        assert!((r.tau.quantiles[1].1 - 0.12).abs() < 0.01);
        assert!(r.tau.shortest95.0.abs() < 5e-3);
        assert!((r.tau.shortest95.1 - 0.51).abs() < 0.01);
        // predictive RR interval about (0.65, 2.13)
        let (lo, med, hi) = super::rr_triplet(&r.theta_star);
        assert!((lo - 0.651).abs() < 5e-3, "lo = {lo}");
        assert!((med - 1.181).abs() < 5e-3, "med = {med}");
        assert!((hi - 2.128).abs() < 8e-3, "hi = {hi}");
    }

    #[test]
    fn sensitivity_prior_halves_the_borrowing() {
        let narrow = run_eop2(PRIMARY_TAU_SCALE).unwrap();
        let wide = run_eop2(SENSITIVITY_TAU_SCALE).unwrap();
        assert!((wide.ess.ess - 6.9).abs() < 0.3, "ess = {}", wide.ess.ess);
        assert!(wide.ess.ess < narrow.ess.ess);
        assert!(wide.tau.shortest95.1 > narrow.tau.shortest95.1);
    }

    #[test]
    fn phase3_decisions_match_the_published_story() {
        let r = run_phase3(PRIMARY_TAU_SCALE).unwrap();

        // interim: borrowing succeeds, standalone does not
        assert!(r.interim.meta_success);
        assert!(!r.interim.standalone_success);
        let (lo, med, hi) = super::rr_triplet(&r.interim.theta_new);
        assert!((lo - 0.870).abs() < 0.005, "interim lo = {lo}");
        assert!((med - 1.017).abs() < 0.005, "interim med = {med}");
        assert!((hi - 1.169).abs() < 0.005, "interim hi = {hi}");
        assert!((r.interim.wald_low.exp() - 0.8316).abs() < 5e-4);

        // final: both succeed
        assert!(r.final_look.meta_success);
        assert!(r.final_look.standalone_success);
        let (lo, med, hi) = super::rr_triplet(&r.final_look.theta_new);
        assert!((lo - 0.888).abs() < 0.005, "final lo = {lo}");
        assert!((med - 0.987).abs() < 0.005, "final med = {med}");
        assert!((hi - 1.092).abs() < 0.005, "final hi = {hi}");
        assert!((r.final_look.wald_low.exp() - 0.8702).abs() < 5e-4);
        assert!((r.final_look.wald_high.exp() - 1.0711).abs() < 5e-4);

        // tau intervals: (0.00, 0.41) at interim, (0.00, 0.43) at final
        assert!((r.interim.tau.shortest95.1 - 0.41).abs() < 0.01);
        assert!((r.final_look.tau.shortest95.1 - 0.42).abs() < 0.015);
        assert!((r.final_look.tau.quantiles[1].1 - 0.13).abs() < 0.01);
    }

    #[test]
    fn reports_render_without_panicking() {
        let e = run_eop2(PRIMARY_TAU_SCALE).unwrap();
        let text = e.to_string();
        assert!(text.contains("effective sample size"));
        assert!(text.contains("P(theta* > threshold)"));
        let p = run_phase3(PRIMARY_TAU_SCALE).unwrap();
        let text = p.to_string();
        assert!(text.contains("interim analysis"));
        assert!(text.contains("final analysis"));
        assert!(text.contains("DECLARED"));
    }
}
