//! How many phase III patients is the phase II evidence worth? The effective
//! sample size compares the variance the historical data would have if
//! borrowed at face value against the variance of the predictive (MAP)
//! distribution, which discounts for between-study heterogeneity.
//!
//!     cargo run --example effective_sample_size

use bayesborrow::case_study;
use bayesborrow::distributions::HalfNormal;
use bayesborrow::nnhm::{effective_sample_size, fit};

fn main() -> bayesborrow::error::Result<()> {
    let evidence = case_study::historical_evidence()?;
    let reference = case_study::ess_reference_n();
    println!("historical basis: {reference:.0} patients across {} studies", evidence.len());
    println!();

    for scale in [0.25, 0.5, 1.0] {
        let f = fit(&evidence, HalfNormal::new(scale)?)?;
        let ess = effective_sample_size(&f, reference)?;
        println!(
            "tau prior hn:{scale:<4}  ESS {:5.1}   (pooled variance {:.5}, predictive {:.5})",
            ess.ess, ess.v0, ess.v_star
        );
    }

    println!();
    println!(
        "the discount is heavy: under the primary hn:0.5 prior the 154\n\
         historical patients carry the information of about 14, because a new\n\
         study may sit away from the historical mean. The wider the\n\
         heterogeneity prior, the smaller the effective sample size."
    );
    Ok(())
}
