//! Local influence from a tiny log-likelihood matrix.
//!
//! Three draws of two observations, with the second column exactly twice the
//! first: p_W = 5, p_V = 18 and the conflict ratio is 3.6.

use bayes_lens::influence::{self, clinf_direction, influence_report, loglik_covariance, InfluenceConfig, Perturbation};
use bayes_lens::LogLikSamples;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let samples = LogLikSamples::from_rows(
        vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![2.0, 4.0]],
        vec![1, 1, 1],
        vec!["a".into(), "b".into()],
    )?;

    let v = loglik_covariance(&samples)?;
    println!("V = {}", v.matrix());
    println!("LINF = {:?}", influence::linf(&samples)?);
    println!("DINF = {:?}", influence::dinf(&samples)?);
    println!("p_W = {}, p_W* = {}", influence::p_w(&samples)?, influence::p_w_star(&samples)?);
    println!("p_V = {}", influence::p_v(&samples)?);

    for (label, eps) in [
        ("e_a", Perturbation::basis(2, 0)),
        ("e_b", Perturbation::basis(2, 1)),
        ("ones", Perturbation::ones(2)),
        ("a - b", Perturbation::new(vec![1.0, -1.0])?),
    ] {
        println!("CLINF({label}) = {:.4}", clinf_direction(&v, &eps)?);
    }

    let report = influence_report(&samples, &InfluenceConfig::default())?;
    println!(
        "conflict ratio {:.2} (flagged at >= {}: {})",
        report.conflict_ratio.value, report.conflict_threshold, report.conflict_flagged
    );
    report.write_totals_csv(std::io::stdout())?;
    Ok(())
}
