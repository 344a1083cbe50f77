//! The normal-normal hierarchical model and its deterministic posterior.
//!
//! Study estimates `y_j` with standard errors `s_j` are modelled as
//!
//! ```text
//! y_j | theta_j        ~ N(theta_j, s_j^2)        (within-study sampling)
//! theta_j | mu, tau    ~ N(mu, tau^2)             (between-study exchange)
//! mu                   ~ flat (improper)
//! tau                  ~ half-normal(scale)
//! ```
//!
//! Conditional on `tau` everything is conjugate: the posterior of the mean
//! `mu`, of each study effect `theta_j`, and of the effect `theta_star` in a
//! hypothetical new exchangeable study are all normal with closed-form
//! moments. The only non-conjugate direction, `tau`, is one-dimensional, so
//! instead of MCMC the posterior is integrated over `tau` with an adaptive
//! composite Simpson rule. Every marginal then becomes a finite
//! [`NormalMixture`] whose weights are quadrature weights times the
//! normalised `tau` posterior density, and all downstream quantities
//! (intervals, tail probabilities, decisions, the meta-analytic-predictive
//! prior) are evaluated from those mixtures without sampling error.

use crate::distributions::{grid_quantiles, HalfNormal, NormalMixture, SimpsonGrid};
use crate::error::{Error, Result};
use crate::evidence::Evidence;
use std::fmt;

/// Starting number of Simpson nodes for the `tau` integration.
const BASE_GRID: usize = 401;
/// Hard cap on grid refinement before the fit reports a numerical failure.
const MAX_GRID: usize = 12801;
/// The grid is accepted once the 2.5%, 50% and 97.5% posterior quantiles of
/// `tau` move by less than this between successive doublings.
const GRID_QUANTILE_TOL: f64 = 1e-4;

// --- conditional (fixed tau) posterior ----------------------------------------

/// Closed-form posterior moments for a fixed between-study standard
/// deviation `tau`, the conjugate skeleton the full model is assembled from.
///
/// With precision weights `w_j = 1 / (s_j^2 + tau^2)` and `w_+` their sum:
///
/// * `mu | y, tau ~ N(sum(w_j y_j) / w_+, 1 / w_+)`
/// * `theta_j | y, tau` is normal, shrunk toward the mean estimate by the
///   factor `b_j = s_j^2 / (s_j^2 + tau^2)`
/// * `theta_star | y, tau ~ N(mu_mean, tau^2 + 1 / w_+)` for a new study
#[derive(Debug, Clone)]
pub struct ConditionalPosterior {
    pub tau: f64,
    /// Precision weights `w_j`.
    pub weights: Vec<f64>,
    /// Total precision `w_+`.
    pub w_plus: f64,
    /// Shrinkage factors `b_j` in [0, 1]; 1 means full pooling toward `mu`.
    pub shrinkage: Vec<f64>,
    pub mu_mean: f64,
    pub mu_var: f64,
    pub theta_mean: Vec<f64>,
    pub theta_var: Vec<f64>,
    /// Predictive moments for the effect in a new exchangeable study.
    pub pred_mean: f64,
    pub pred_var: f64,
}

/// Conditional posterior given `tau`. The study-effect variance uses the
/// form `b_j (tau^2 + b_j / w_+)`, which is algebraically identical to
/// `s_j^2 - s_j^2 b_j (1 - w_j / w_+)`; the first is cheaper and behaves
/// smoothly at `tau = 0`.
pub fn conditional(evidence: &[Evidence], tau: f64) -> Result<ConditionalPosterior> {
    if evidence.is_empty() {
        return Err(Error::EmptyEvidence);
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Domain(format!(
            "conditional posterior needs tau >= 0, got {tau}"
        )));
    }
    for e in evidence {
        if !(e.s.is_finite() && e.s > 0.0 && e.y.is_finite()) {
            return Err(Error::DegenerateEvidence(format!(
                "study {}: y = {}, s = {}",
                e.study_id, e.y, e.s
            )));
        }
    }
    let tau2 = tau * tau;
    let mut weights = Vec::with_capacity(evidence.len());
    let mut w_plus = 0.0;
    let mut wy = 0.0;
    for e in evidence {
        let w = 1.0 / (e.s * e.s + tau2);
        weights.push(w);
        w_plus += w;
        wy += w * e.y;
    }
    let mu_mean = wy / w_plus;
    let mu_var = 1.0 / w_plus;
    let mut shrinkage = Vec::with_capacity(evidence.len());
    let mut theta_mean = Vec::with_capacity(evidence.len());
    let mut theta_var = Vec::with_capacity(evidence.len());
    for e in evidence {
        // written as a single quotient so b is exactly 1 when tau is 0
        let s2 = e.s * e.s;
        let b = s2 / (s2 + tau2);
        shrinkage.push(b);
        theta_mean.push(b * mu_mean + (1.0 - b) * e.y);
        theta_var.push(b * (tau2 + b / w_plus));
    }
    Ok(ConditionalPosterior {
        tau,
        weights,
        w_plus,
        shrinkage,
        mu_mean,
        mu_var,
        theta_mean,
        theta_var,
        pred_mean: mu_mean,
        pred_var: tau2 + mu_var,
    })
}

/// Log integrated likelihood of `tau` with `mu` marginalised under its flat
/// prior, up to an additive constant:
///
/// ```text
/// log L(tau) = -log(w_+)/2 + sum(log w_j)/2 - sum(w_j (y_j - mu_hat)^2)/2
/// ```
fn log_integrated_likelihood(evidence: &[Evidence], tau: f64) -> f64 {
    let tau2 = tau * tau;
    let mut w_plus = 0.0;
    let mut wy = 0.0;
    let mut sum_log_w = 0.0;
    for e in evidence {
        let w = 1.0 / (e.s * e.s + tau2);
        w_plus += w;
        wy += w * e.y;
        sum_log_w += w.ln();
    }
    let mu_hat = wy / w_plus;
    let mut quad = 0.0;
    for e in evidence {
        let w = 1.0 / (e.s * e.s + tau2);
        let d = e.y - mu_hat;
        quad += w * d * d;
    }
    -0.5 * w_plus.ln() + 0.5 * sum_log_w - 0.5 * quad
}

// --- full fit ------------------------------------------------------------------

/// Posterior of the hierarchical model with `tau` integrated out over an
/// adaptive quadrature grid. Obtained from [`fit`]; marginal posteriors are
/// produced on demand as normal mixtures.
#[derive(Debug, Clone)]
pub struct NnhmFit {
    evidence: Vec<Evidence>,
    prior: HalfNormal,
    taus: Vec<f64>,
    /// Normalised mixture weights: Simpson weight times posterior density.
    omega: Vec<f64>,
    /// Posterior density of `tau` at the nodes, normalised to unit mass.
    tau_density: Vec<f64>,
}

/// Fit the model to study evidence under a half-normal prior on `tau`.
///
/// The `tau` axis is truncated at the prior's `1 - 1e-8` quantile (the
/// likelihood is bounded, so the discarded tail mass is of that order) and
/// discretised with a composite Simpson rule, starting at 401 nodes and
/// doubling until the 2.5%, 50% and 97.5% posterior quantiles of `tau` are
/// stable to 1e-4.
pub fn fit(evidence: &[Evidence], prior: HalfNormal) -> Result<NnhmFit> {
    if evidence.is_empty() {
        return Err(Error::EmptyEvidence);
    }
    for e in evidence {
        if !(e.s.is_finite() && e.s > 0.0 && e.y.is_finite()) {
            return Err(Error::DegenerateEvidence(format!(
                "study {}: y = {}, s = {}",
                e.study_id, e.y, e.s
            )));
        }
    }
    let mut ids = std::collections::HashSet::new();
    for e in evidence {
        if !ids.insert(e.study_id.as_str()) {
            return Err(Error::Data(format!(
                "duplicate study_id {:?} in one analysis",
                e.study_id
            )));
        }
    }
    let upper = prior.quantile(1.0 - 1e-8)?;
    let probe = [0.025, 0.5, 0.975];

    let evaluate = |points: usize| -> Result<(SimpsonGrid, Vec<f64>, Vec<f64>)> {
        let grid = SimpsonGrid::new(upper, points)?;
        let mut log_d: Vec<f64> = grid
            .nodes
            .iter()
            .map(|&t| log_integrated_likelihood(evidence, t) + prior.log_pdf(t))
            .collect();
        let max = log_d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numerical(
                "tau posterior density vanished everywhere on the grid".into(),
            ));
        }
        let density: Vec<f64> = log_d.iter_mut().map(|l| (*l - max).exp()).collect();
        let q = grid_quantiles(&grid.nodes, &density, &probe)?;
        Ok((grid, density, q))
    };

    let mut points = BASE_GRID;
    let (_, _, mut q) = evaluate(points)?;
    let (grid, density) = loop {
        let next = 2 * points - 1;
        if next > MAX_GRID {
            return Err(Error::Numerical(format!(
                "tau quadrature did not stabilise within {MAX_GRID} nodes"
            )));
        }
        let (g2, d2, q2) = evaluate(next)?;
        let delta = q
            .iter()
            .zip(&q2)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        points = next;
        if delta < GRID_QUANTILE_TOL {
            break (g2, d2);
        }
        q = q2;
    };

    // Mixture weights: quadrature weight times density, normalised.
    let mut omega: Vec<f64> = grid
        .weights
        .iter()
        .zip(&density)
        .map(|(w, d)| w * d)
        .collect();
    let total: f64 = omega.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Numerical("tau posterior has no mass".into()));
    }
    for w in &mut omega {
        *w /= total;
    }
    // Density normalised to integrate to one (same constant up to the
    // quadrature rule).
    let mass = grid.integrate(&density);
    let tau_density: Vec<f64> = density.iter().map(|d| d / mass).collect();

    Ok(NnhmFit {
        evidence: evidence.to_vec(),
        prior,
        taus: grid.nodes,
        omega,
        tau_density,
    })
}

impl NnhmFit {
    pub fn evidence(&self) -> &[Evidence] {
        &self.evidence
    }

    pub fn prior(&self) -> HalfNormal {
        self.prior
    }

    /// Number of quadrature nodes the fit settled on.
    pub fn grid_points(&self) -> usize {
        self.taus.len()
    }

    fn index_of(&self, study_id: &str) -> Result<usize> {
        self.evidence
            .iter()
            .position(|e| e.study_id == study_id)
            .ok_or_else(|| {
                Error::Domain(format!(
                    "study {study_id:?} is not part of this fit (studies: {})",
                    self.evidence
                        .iter()
                        .map(|e| e.study_id.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                ))
            })
    }

    /// Marginal posterior of the exchangeable mean `mu`.
    pub fn mu_marginal(&self) -> NormalMixture {
        let comps = self
            .taus
            .iter()
            .zip(&self.omega)
            .map(|(&tau, &om)| {
                let tau2 = tau * tau;
                let mut w_plus = 0.0;
                let mut wy = 0.0;
                for e in &self.evidence {
                    let w = 1.0 / (e.s * e.s + tau2);
                    w_plus += w;
                    wy += w * e.y;
                }
                (om, wy / w_plus, (1.0 / w_plus).sqrt())
            })
            .collect();
        NormalMixture::new(comps).expect("fit guarantees valid components")
    }

    /// Marginal posterior of one study's true effect `theta_j`.
    pub fn theta_marginal(&self, study_id: &str) -> Result<NormalMixture> {
        let j = self.index_of(study_id)?;
        let sj2 = self.evidence[j].s * self.evidence[j].s;
        let yj = self.evidence[j].y;
        let comps = self
            .taus
            .iter()
            .zip(&self.omega)
            .map(|(&tau, &om)| {
                let tau2 = tau * tau;
                let mut w_plus = 0.0;
                let mut wy = 0.0;
                for e in &self.evidence {
                    let w = 1.0 / (e.s * e.s + tau2);
                    w_plus += w;
                    wy += w * e.y;
                }
                let mu_hat = wy / w_plus;
                let b = sj2 / (sj2 + tau2);
                let mean = b * mu_hat + (1.0 - b) * yj;
                let var = b * (tau2 + b / w_plus);
                (om, mean, var.sqrt())
            })
            .collect();
        NormalMixture::new(comps)
    }

    /// Marginal posterior of the effect `theta_star` in a new exchangeable
    /// study: the meta-analytic-predictive distribution.
    pub fn predictive_marginal(&self) -> NormalMixture {
        let comps = self
            .taus
            .iter()
            .zip(&self.omega)
            .map(|(&tau, &om)| {
                let tau2 = tau * tau;
                let mut w_plus = 0.0;
                let mut wy = 0.0;
                for e in &self.evidence {
                    let w = 1.0 / (e.s * e.s + tau2);
                    w_plus += w;
                    wy += w * e.y;
                }
                (om, wy / w_plus, (tau2 + 1.0 / w_plus).sqrt())
            })
            .collect();
        NormalMixture::new(comps).expect("fit guarantees valid components")
    }

    /// The meta-analytic-predictive prior for a future study is exactly the
    /// predictive marginal; the alias exists because the two roles read very
    /// differently at call sites.
    pub fn map_prior(&self) -> NormalMixture {
        self.predictive_marginal()
    }

    /// Marginal posterior of the between-study standard deviation.
    pub fn tau_posterior(&self) -> TauPosterior {
        TauPosterior::new(self.taus.clone(), self.tau_density.clone())
    }
}

// --- tau posterior -------------------------------------------------------------

/// Posterior of `tau` as a normalised density on the quadrature grid, with
/// quantiles by interpolation of the trapezoid cumulative.
#[derive(Debug, Clone)]
pub struct TauPosterior {
    nodes: Vec<f64>,
    density: Vec<f64>,
    cum: Vec<f64>,
}

impl TauPosterior {
    fn new(nodes: Vec<f64>, density: Vec<f64>) -> Self {
        let mut cum = Vec::with_capacity(nodes.len());
        cum.push(0.0);
        for i in 1..nodes.len() {
            cum.push(cum[i - 1] + 0.5 * (density[i] + density[i - 1]) * (nodes[i] - nodes[i - 1]));
        }
        TauPosterior { nodes, density, cum }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn cdf(&self, x: f64) -> f64 {
        // Linear interpolation of the cumulative, the exact inverse of the
        // quantile rule, so cdf(quantile(p)) == p up to rounding.
        let total = *self.cum.last().expect("non-empty");
        if x <= self.nodes[0] {
            return 0.0;
        }
        if x >= *self.nodes.last().expect("non-empty") {
            return 1.0;
        }
        let idx = self.nodes.partition_point(|&n| n < x);
        let (x0, x1) = (self.nodes[idx - 1], self.nodes[idx]);
        let t = (x - x0) / (x1 - x0);
        let partial = t * (self.cum[idx] - self.cum[idx - 1]);
        ((self.cum[idx - 1] + partial) / total).clamp(0.0, 1.0)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        Ok(grid_quantiles(&self.nodes, &self.density, &[p])?[0])
    }

    pub fn quantiles(&self, probs: &[f64]) -> Result<Vec<f64>> {
        grid_quantiles(&self.nodes, &self.density, probs)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5).expect("0.5 is a valid probability")
    }

    pub fn mean(&self) -> f64 {
        self.moment(|t| t)
    }

    pub fn sd(&self) -> f64 {
        let m = self.mean();
        self.moment(|t| (t - m) * (t - m)).sqrt()
    }

    fn moment(&self, f: impl Fn(f64) -> f64) -> f64 {
        // trapezoid integral of f(tau) d(tau); density already has unit mass
        let mut acc = 0.0;
        for i in 1..self.nodes.len() {
            let a = f(self.nodes[i - 1]) * self.density[i - 1];
            let b = f(self.nodes[i]) * self.density[i];
            acc += 0.5 * (a + b) * (self.nodes[i] - self.nodes[i - 1]);
        }
        acc
    }

    /// Shortest interval holding the given mass. For the typical
    /// monotone-decreasing or low-mode posterior of `tau` this is one-sided,
    /// `(0, upper)`, which is how heterogeneity intervals are reported.
    pub fn shortest_interval(&self, mass: f64) -> Result<(f64, f64)> {
        if !(mass > 0.0 && mass < 1.0) {
            return Err(Error::Domain(format!(
                "interval mass must be in (0, 1), got {mass}"
            )));
        }
        let alpha = 1.0 - mass;
        let width = |c: f64| -> Result<f64> {
            let q = grid_quantiles(&self.nodes, &self.density, &[c, c + mass])?;
            Ok(q[1] - q[0])
        };
        let scan = 128usize;
        let mut best_i = 0usize;
        let mut best_w = f64::INFINITY;
        for i in 0..=scan {
            let c = alpha * i as f64 / scan as f64;
            let w = width(c)?;
            if w < best_w {
                best_w = w;
                best_i = i;
            }
        }
        let mut a = alpha * best_i.saturating_sub(1) as f64 / scan as f64;
        let mut b = alpha * ((best_i + 1).min(scan)) as f64 / scan as f64;
        let phi = 0.618_033_988_749_894_9;
        let mut c1 = b - phi * (b - a);
        let mut c2 = a + phi * (b - a);
        let mut w1 = width(c1)?;
        let mut w2 = width(c2)?;
        for _ in 0..60 {
            if b - a < alpha * 1e-10 {
                break;
            }
            if w1 <= w2 {
                b = c2;
                c2 = c1;
                w2 = w1;
                c1 = b - phi * (b - a);
                w1 = width(c1)?;
            } else {
                a = c1;
                c1 = c2;
                w1 = w2;
                c2 = a + phi * (b - a);
                w2 = width(c2)?;
            }
        }
        let c = 0.5 * (a + b);
        let q = grid_quantiles(&self.nodes, &self.density, &[c, c + mass])?;
        Ok((q[0], q[1]))
    }
}

// --- marginal summaries ----------------------------------------------------------

/// Which marginal posterior a summary or tail probability refers to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    /// Exchangeable mean `mu`.
    Mu,
    /// True effect of a named study.
    Theta(String),
    /// Effect of a hypothetical new exchangeable study (the predictive or
    /// MAP distribution).
    ThetaStar,
    /// Between-study standard deviation.
    Tau,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Mu => write!(f, "mu"),
            Target::Theta(id) => write!(f, "theta:{id}"),
            Target::ThetaStar => write!(f, "theta-star"),
            Target::Tau => write!(f, "tau"),
        }
    }
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu" => Ok(Target::Mu),
            "theta-star" | "theta_star" => Ok(Target::ThetaStar),
            "tau" => Ok(Target::Tau),
            other => {
                if let Some(id) = other.strip_prefix("theta:") {
                    if id.is_empty() {
                        return Err(Error::Domain("theta: needs a study id".into()));
                    }
                    Ok(Target::Theta(id.to_string()))
                } else {
                    Err(Error::Domain(format!(
                        "unknown target {other:?}; expected mu, theta:<id>, theta-star or tau"
                    )))
                }
            }
        }
    }
}

/// Posterior summary of one marginal: exact moments, requested quantiles,
/// and the shortest 95% credible interval. Location targets are on the log
/// risk-ratio scale; `tau` is on its own (standard deviation) scale.
#[derive(Debug, Clone)]
pub struct Summary {
    pub target: Target,
    pub mean: f64,
    pub sd: f64,
    /// `(probability, quantile)` pairs in the order requested.
    pub quantiles: Vec<(f64, f64)>,
    /// Shortest interval holding 95% posterior mass.
    pub shortest95: (f64, f64),
}

/// Conventional probabilities for a median plus central 95% interval.
pub const DEFAULT_PROBS: [f64; 3] = [0.025, 0.5, 0.975];

/// Summarise a marginal posterior of the fit.
pub fn marginal_summary(fit: &NnhmFit, target: &Target, probs: &[f64]) -> Result<Summary> {
    for &p in probs {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!(
                "quantile probabilities must be in (0, 1), got {p}"
            )));
        }
    }
    match target {
        Target::Tau => {
            let tp = fit.tau_posterior();
            let qs = tp.quantiles(probs)?;
            Ok(Summary {
                target: target.clone(),
                mean: tp.mean(),
                sd: tp.sd(),
                quantiles: probs.iter().cloned().zip(qs).collect(),
                shortest95: tp.shortest_interval(0.95)?,
            })
        }
        _ => {
            let mix = target_mixture(fit, target)?;
            let qs = mix.quantiles(probs)?;
            Ok(Summary {
                target: target.clone(),
                mean: mix.mean(),
                sd: mix.sd(),
                quantiles: probs.iter().cloned().zip(qs).collect(),
                shortest95: mix.shortest_interval(0.95)?,
            })
        }
    }
}

/// Posterior probability that the target exceeds a threshold (on the log
/// risk-ratio scale for location targets, on the `tau` scale otherwise).
/// This is the exceedance behind the non-inferiority statements.
pub fn tail_probability(fit: &NnhmFit, target: &Target, threshold: f64) -> Result<f64> {
    if !threshold.is_finite() {
        return Err(Error::Domain(format!(
            "tail threshold must be finite, got {threshold}"
        )));
    }
    match target {
        Target::Tau => Ok(1.0 - fit.tau_posterior().cdf(threshold)),
        _ => Ok(target_mixture(fit, target)?.tail_prob(threshold)),
    }
}

fn target_mixture(fit: &NnhmFit, target: &Target) -> Result<NormalMixture> {
    match target {
        Target::Mu => Ok(fit.mu_marginal()),
        Target::Theta(id) => fit.theta_marginal(id),
        Target::ThetaStar => Ok(fit.predictive_marginal()),
        Target::Tau => Err(Error::Domain(
            "tau has no normal-mixture marginal; summarise it via the fit's tau posterior".into(),
        )),
    }
}

// --- effective sample size --------------------------------------------------------

/// Prior effective sample size of the predictive (MAP) distribution by the
/// variance-ratio method.
#[derive(Debug, Clone, Copy)]
pub struct EssResult {
    /// Patients of borrowed information carried by the MAP prior.
    pub ess: f64,
    /// Patients behind the historical evidence (the calibration point).
    pub reference_n: f64,
    /// Variance of the fixed-effect (full pooling) estimate of `mu`.
    pub v0: f64,
    /// Variance of the predictive distribution `theta_star`.
    pub v_star: f64,
}

/// Effective sample size of the predictive distribution: the historical
/// patient count is scaled by how much wider the predictive distribution is
/// than the full-pooling estimate,
///
/// ```text
/// ess = reference_n * v0 / v_star,   v0 = 1 / sum(1 / s_j^2)
/// ```
///
/// so `ess = reference_n` under complete pooling and decays as
/// between-study heterogeneity discounts the borrowed information.
pub fn effective_sample_size(fit: &NnhmFit, reference_n: f64) -> Result<EssResult> {
    if !(reference_n.is_finite() && reference_n > 0.0) {
        return Err(Error::Domain(format!(
            "reference sample size must be positive, got {reference_n}"
        )));
    }
    let v0 = 1.0
        / fit
            .evidence()
            .iter()
            .map(|e| 1.0 / (e.s * e.s))
            .sum::<f64>();
    let v_star = fit.predictive_marginal().variance();
    Ok(EssResult {
        ess: reference_n * v0 / v_star,
        reference_n,
        v0,
        v_star,
    })
}

// -----------------------------------------------------------------------------
