//! Analyse the phase III trial twice, at the interim look and at the final
//! look, each time pooling the accumulating data with the phase II studies
//! and asking whether the shortest 95% posterior interval for the new
//! study's risk ratio clears the non-inferiority threshold. A stand-alone
//! Wald analysis of the phase III data runs alongside for comparison.
//!
//!     cargo run --example phase_three

use bayesborrow::case_study::{self, Stage};

fn main() -> bayesborrow::error::Result<()> {
    let report = case_study::run_phase3(case_study::PRIMARY_TAU_SCALE)?;
    println!(
        "threshold: RR {:.4} (control rate {:.2}, margin {:.2})",
        report.margin.rr_threshold(),
        report.margin.p_control(),
        report.margin.margin_abs()
    );

    for look in [&report.interim, &report.final_look] {
        let stage = match look.stage {
            Stage::Interim => "interim (40 per arm)",
            Stage::Final => "final (84 vs 80)",
        };
        println!();
        println!("{stage}");
        println!(
            "  observed RR {:.3}  ->  posterior RR {:.3}, shortest 95% ({:.3}, {:.3})",
            look.new_evidence.rr(),
            look.theta_new.quantiles[1].1.exp(),
            look.theta_new.shortest95.0.exp(),
            look.theta_new.shortest95.1.exp()
        );
        println!(
            "  borrowing:  {}",
            if look.meta_success {
                "interval clears the threshold, non-inferiority declared"
            } else {
                "interval covers the threshold, no declaration"
            }
        );
        println!(
            "  standalone: Wald 95% ({:.3}, {:.3}) -> {}",
            look.wald_low.exp(),
            look.wald_high.exp(),
            if look.standalone_success {
                "non-inferiority declared"
            } else {
                "no declaration"
            }
        );
    }

    println!();
    println!(
        "the borrowed analysis already succeeds at the interim look; the\n\
         stand-alone analysis needs the full sample and then only just clears\n\
         the threshold ({:.3} vs {:.4})",
        report.final_look.wald_low.exp(),
        report.margin.rr_threshold()
    );
    Ok(())
}
