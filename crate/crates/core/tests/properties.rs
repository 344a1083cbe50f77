//! Randomized invariants of the model pieces. These complement the unit
//! tests' pinned numbers: whatever the data, certain algebraic identities
//! and symmetries must hold.

use bayesborrow::distributions::{HalfNormal, NormalMixture};
use bayesborrow::evidence::{Evidence, NiMargin, Phase, StudyCounts};
use bayesborrow::nnhm::conditional;
use proptest::collection::vec;
use proptest::prelude::*;

fn evidence_strategy(max_studies: usize) -> impl Strategy<Value = Vec<Evidence>> {
    vec((-1.0..1.0f64, 0.05..0.8f64), 1..=max_studies).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (y, s))| Evidence::new(format!("s{i}"), Phase::Two, y, s).unwrap())
            .collect()
    })
}

fn mixture_strategy() -> impl Strategy<Value = NormalMixture> {
    vec((0.01..1.0f64, -2.0..2.0f64, 0.05..2.0f64), 1..=6)
        .prop_map(|c| NormalMixture::new(c).unwrap())
}

proptest! {
    // The two algebraic forms of the conditional study variance,
    // b_j (tau^2 + b_j / w_+) and s_j^2 - s_j^2 b_j (1 - w_j / w_+),
    // agree to 1e-12 relative for any evidence set and heterogeneity.
    #[test]
    fn conditional_variance_identity(
        ev in evidence_strategy(6),
        tau in 0.0..3.0f64,
    ) {
        let cond = conditional(&ev, tau).unwrap();
        for j in 0..ev.len() {
            let s2 = ev[j].s * ev[j].s;
            let b = cond.shrinkage[j];
            let alt = s2 - s2 * b * (1.0 - cond.weights[j] / cond.w_plus);
            prop_assert!(
                (cond.theta_var[j] - alt).abs() <= 1e-12 * cond.theta_var[j].max(1e-30)
            );
        }
    }

    // tau = 0 pools every study onto the common mean; a huge tau leaves
    // each study alone.
    #[test]
    fn pooling_and_stratification_limits(ev in evidence_strategy(6)) {
        let pooled = conditional(&ev, 0.0).unwrap();
        for j in 0..ev.len() {
            prop_assert!((pooled.theta_mean[j] - pooled.mu_mean).abs() < 1e-12);
            prop_assert!(pooled.shrinkage[j] == 1.0);
        }
        let apart = conditional(&ev, 1e6).unwrap();
        for j in 0..ev.len() {
            prop_assert!((apart.theta_mean[j] - ev[j].y).abs() < 1e-6);
            prop_assert!(apart.theta_var[j] / (ev[j].s * ev[j].s) > 0.999);
        }
    }

    // Swapping the treatment and control arms flips the sign of the log
    // risk ratio exactly (bit for bit) and keeps its standard error.
    #[test]
    fn arm_swap_antisymmetry(
        n_t in 1..400u64,
        n_c in 1..400u64,
        ft in 0.0..=1.0f64,
        fc in 0.0..=1.0f64,
    ) {
        let r_t = ((n_t as f64) * ft).round() as u64;
        let r_c = ((n_c as f64) * fc).round() as u64;
        let ab = StudyCounts::new("x", r_t, n_t, r_c, n_c, Phase::Two).unwrap()
            .to_evidence().unwrap();
        let ba = StudyCounts::new("x", r_c, n_c, r_t, n_t, Phase::Two).unwrap()
            .to_evidence().unwrap();
        prop_assert_eq!(ab.y, -ba.y);
        prop_assert_eq!(ab.s, ba.s);
    }

    // Constructor-normalised mixture weights sum to one.
    #[test]
    fn mixture_weights_normalised(mix in mixture_strategy()) {
        let total: f64 = mix.components().map(|(w, _, _)| w).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    // The quantile function inverts the distribution function.
    #[test]
    fn mixture_quantile_round_trip(
        mix in mixture_strategy(),
        p in 0.001..0.999f64,
    ) {
        let q = mix.quantile(p).unwrap();
        prop_assert!((mix.cdf(q) - p).abs() < 1e-8);
    }

    // Upper tail and distribution function are exact complements.
    #[test]
    fn mixture_tail_complements_cdf(
        mix in mixture_strategy(),
        x in -4.0..4.0f64,
    ) {
        let total = mix.cdf(x) + mix.tail_prob(x);
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    // Conjugate updating with a single component always lands the posterior
    // mean between the prior mean and the observation, and shrinks the sd.
    #[test]
    fn single_component_update_interpolates(
        m in -2.0..2.0f64,
        sd in 0.1..2.0f64,
        y in -3.0..3.0f64,
        s in 0.05..2.0f64,
    ) {
        let prior = NormalMixture::new(vec![(1.0, m, sd)]).unwrap();
        let post = prior.update(y, s).unwrap();
        let (lo, hi) = if m <= y { (m, y) } else { (y, m) };
        prop_assert!(post.mean() >= lo - 1e-12 && post.mean() <= hi + 1e-12);
        prop_assert!(post.sd() < sd + 1e-12);
    }

    // A non-inferiority margin always lands strictly inside (0, 1) on the
    // risk-ratio scale and tightens as the margin shrinks.
    #[test]
    fn margin_threshold_in_unit_interval(
        p_c in 0.05..0.99f64,
        frac in 0.01..0.99f64,
    ) {
        let m = frac * p_c;
        let margin = NiMargin::new(p_c, m).unwrap();
        let thr = margin.rr_threshold();
        prop_assert!(thr > 0.0 && thr < 1.0);
        prop_assert!((margin.log_rr_threshold() - thr.ln()).abs() < 1e-15);
        let tighter = NiMargin::new(p_c, 0.5 * m).unwrap();
        prop_assert!(tighter.rr_threshold() > thr);
    }

    // Half-normal distribution and quantile functions invert each other.
    #[test]
    fn half_normal_round_trip(
        scale in 0.05..3.0f64,
        p in 0.001..0.999f64,
    ) {
        let hn = HalfNormal::new(scale).unwrap();
        let q = hn.quantile(p).unwrap();
        prop_assert!((hn.cdf(q) - p).abs() < 1e-12);
    }
}
