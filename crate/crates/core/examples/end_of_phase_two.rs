//! Fit the hierarchical model to the three phase II studies and look at the
//! evidence available when planning the phase III trial: the population mean
//! effect, the predictive effect in a new study, and how both compare to the
//! non-inferiority threshold.
//!
//!     cargo run --example end_of_phase_two

use bayesborrow::case_study;
use bayesborrow::distributions::HalfNormal;
use bayesborrow::evidence::NiMargin;
use bayesborrow::nnhm::{fit, marginal_summary, tail_probability, Target, DEFAULT_PROBS};

fn main() -> bayesborrow::error::Result<()> {
    let evidence = case_study::historical_evidence()?;
    let margin = NiMargin::new(0.9, 0.12)?;
    let prior = HalfNormal::new(0.5)?;

    println!("historical studies (log risk ratio, treated over control):");
    for e in &evidence {
        println!("  study {}: y = {:+.4}, se = {:.4}, RR = {:.3}", e.study_id, e.y, e.s, e.rr());
    }
    println!();

    let f = fit(&evidence, prior)?;

    // The mean effect mu tells us about the average across studies; the
    // predictive effect theta* is the relevant quantity for a *new* study
    // and is wider because it carries the between-study heterogeneity.
    for target in [Target::Mu, Target::ThetaStar, Target::Tau] {
        let s = marginal_summary(&f, &target, &DEFAULT_PROBS)?;
        match target {
            Target::Tau => println!(
                "tau:        median {:.3}, shortest 95% ({:.3}, {:.3})",
                s.quantiles[1].1, s.shortest95.0, s.shortest95.1
            ),
            _ => println!(
                "{:11} RR median {:.3}, central 95% ({:.3}, {:.3})",
                format!("{target}:"),
                s.quantiles[1].1.exp(),
                s.quantiles[0].1.exp(),
                s.quantiles[2].1.exp()
            ),
        }
    }

    println!();
    println!(
        "non-inferiority threshold on the RR scale: {:.4}",
        margin.rr_threshold()
    );
    let p_mu = tail_probability(&f, &Target::Mu, margin.log_rr_threshold())?;
    let p_star = tail_probability(&f, &Target::ThetaStar, margin.log_rr_threshold())?;
    println!("P(mu > threshold)     = {p_mu:.3}");
    println!("P(theta* > threshold) = {p_star:.3}");
    println!();
    println!(
        "the mean effect is almost surely non-inferior ({:.0}%), and even a new\n\
         study would be non-inferior with {:.0}% probability: a strong basis for\n\
         borrowing in phase III",
        100.0 * p_mu,
        100.0 * p_star
    );
    Ok(())
}
