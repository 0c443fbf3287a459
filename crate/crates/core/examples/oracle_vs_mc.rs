//! Monte Carlo estimates from exact posterior draws against closed forms.

use bayes_lens::influence::{influence_report, InfluenceConfig};
use bayes_lens::leverage::{hat_values, LeverageConfig};
use bayes_lens::linear_oracle::{exact_sampler, fit, random_spec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = random_spec(&mut rng, 12, 3, true);
    let exact = fit(&spec)?;
    let draws = exact_sampler(&spec, 100_000, 8, 11)?;
    let report = influence_report(&draws.loglik, &InfluenceConfig::default())?;
    let hat = hat_values(&draws.pred, &LeverageConfig::default())?;

    println!("{:>4} {:>22} {:>8} {:>22} {:>8}", "obs", "LINF (MC +- MCSE)", "exact", "h (MC +- MCSE)", "exact");
    for i in 0..spec.n() {
        println!(
            "{:>4} {:>12.4} +- {:<7.4} {:>8.4} {:>12.4} +- {:<7.4} {:>8.4}",
            i + 1,
            report.linf[i].value,
            report.linf[i].mcse,
            exact.linf[i],
            hat.h[i],
            hat.mcse[i],
            exact.h[i]
        );
    }
    println!("p_W  {:.4} +- {:.4} vs {:.4}", report.p_w.value, report.p_w.mcse, exact.p_w);
    println!("p_V  {:.4} +- {:.4} vs {:.4}", report.p_v.value, report.p_v.mcse, exact.p_v);
    println!("p_D* {:.4} +- {:.4} vs {:.4}", hat.p_d_star.value, hat.p_d_star.mcse, exact.p_d);
    Ok(())
}
