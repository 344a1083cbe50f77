//! Bayesian borrowing of historical evidence for non-inferiority trials.
//!
//! `bayesborrow` fits the normal-normal hierarchical model to log
//! risk-ratio evidence from completed studies, turns the fit into
//! meta-analytic-predictive (MAP) priors, effective sample sizes, tail
//! probabilities and credible intervals, and simulates the operating
//! characteristics of phase III designs that reuse phase II evidence. The
//! posterior is computed by deterministic quadrature over the single
//! non-conjugate parameter (the between-study standard deviation), so every
//! number is reproducible to floating-point precision: no MCMC, no sampler
//! tuning, no Monte Carlo error outside the operating-characteristics
//! simulation itself, and that simulation is bit-reproducible for a fixed
//! seed regardless of thread count.
//!
//! # A complete analysis in a few lines
//!
//! ```
//! use bayesborrow::{
//!     fit, tail_probability, HalfNormal, NiMargin, StudyCounts, Phase, Target,
//! };
//!
//! // Three historical studies: responders/patients per arm.
//! let evidence: Vec<_> = [
//!     StudyCounts::new("4", 19, 23, 16, 22, Phase::Two).unwrap(),
//!     StudyCounts::new("5", 15, 18, 12, 17, Phase::Two).unwrap(),
//!     StudyCounts::new("6", 31, 36, 27, 38, Phase::Two).unwrap(),
//! ]
//! .iter()
//! .map(|c| c.to_evidence().unwrap())
//! .collect();
//!
//! let posterior = fit(&evidence, HalfNormal::new(0.5).unwrap()).unwrap();
//!
//! // Will a new exchangeable study clear the non-inferiority threshold?
//! let margin = NiMargin::new(0.9, 0.12).unwrap();
//! let p = tail_probability(&posterior, &Target::ThetaStar, margin.log_rr_threshold()).unwrap();
//! assert!((p - 0.92).abs() < 0.005);
//! ```
//!
//! # Runnable examples
//!
//! Each major capability has a self-contained example under `examples/`:
//!
//! * `end_of_phase_two` - meta-analyse the historical studies, report
//!   posterior summaries, tail probabilities and the MAP prior
//!   (`cargo run --release --example end_of_phase_two`)
//! * `phase_three` - interim and final borrowing analyses of the new trial
//!   next to the standalone rule
//! * `effective_sample_size` - how many patients the MAP prior is worth,
//!   and how that depends on the heterogeneity prior
//! * `prior_choice` - what half-normal scales imply on the risk-ratio
//!   scale, before any data
//! * `map_versus_mac` - the prior-update and joint-refit routes to the same
//!   posterior, shown to agree
//! * `shrinkage` - per-study estimates before and after partial pooling
//! * `operating_characteristics` - a small simulated design grid
//!   (`cargo run --release --example operating_characteristics`)
//!
//! The same functionality is scriptable through the `bayesborrow` binary;
//! see the project README for the command-line interface.
//!
//! # Model
//!
//! For studies `j = 1..J` with estimated log risk ratios `y_j` and standard
//! errors `s_j`:
//!
//! ```text
//! y_j | theta_j     ~ N(theta_j, s_j^2)
//! theta_j | mu, tau ~ N(mu, tau^2)
//! mu                ~ flat,   tau ~ half-normal(scale)
//! ```
//!
//! Conditional on `tau` the posterior is Gaussian in every location
//! parameter; `tau` itself is integrated out on an adaptive Simpson grid.
//! Marginal posteriors are therefore finite normal mixtures
//! ([`NormalMixture`]) and the `tau` posterior is a grid density
//! ([`TauPosterior`]). Both expose exact moments, quantiles, shortest
//! credible intervals and tail probabilities.

pub mod case_study;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod evidence;
pub mod nnhm;
pub mod ocsim;

pub use distributions::{
    heterogeneity_ratio, marginal_rr_ratio, marginal_rr_ratio_mc, norm_cdf, norm_pdf,
    norm_quantile, HalfNormal, NormalMixture, SimpsonGrid, Z_95,
};
pub use error::{Error, Result};
pub use evidence::{
    load_dataset, load_evidence, margin_to_rr, parse_counts_csv, parse_evidence_records,
    Evidence, LoadedData, NiMargin, Phase, StudyCounts,
};
pub use nnhm::{
    conditional, effective_sample_size, fit, marginal_summary, tail_probability,
    ConditionalPosterior, EssResult, NnhmFit, Summary, Target, TauPosterior, DEFAULT_PROBS,
};
pub use ocsim::{
    format_oc_table, load_grid_config, parse_grid_config, run_oc, run_scenario, simulate_trial,
    wald_lower, wald_upper, DecisionRule, GridConfig, IntervalKind, OcCell, OcCellOutcome,
    OcDesign, OcRuleResult, OcScenario, TrialOutcome,
};
