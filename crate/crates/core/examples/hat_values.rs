//! Bayesian hat values from posterior predictive draws.
//!
//! Compares the closed-form KL route with the replicate route, and sums
//! leverage over two groups.

use bayes_lens::leverage::{cllev_direction, group_leverage, hat_values, KlMethod, LeverageConfig};
use bayes_lens::linear_oracle::{exact_sampler, fit, random_spec};
use bayes_lens::{GroupMap, Perturbation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = random_spec(&mut rng, 8, 2, false);
    let exact = fit(&spec)?;
    let draws = exact_sampler(&spec, 20_000, 4, 5)?;

    let closed = hat_values(&draws.pred, &LeverageConfig::default())?;
    let replicate = hat_values(
        &draws.pred,
        &LeverageConfig { method: KlMethod::Replicates(32), ..Default::default() },
    )?;
    println!("{:>4} {:>8} {:>8} {:>8}", "obs", "exact", "closed", "replic.");
    for i in 0..spec.n() {
        println!("{:>4} {:>8.4} {:>8.4} {:>8.4}", i + 1, exact.h[i], closed.h[i], replicate.h[i]);
    }
    println!("p_D* = {:.3} +- {:.3} from {} draw pairs", closed.p_d_star.value, closed.p_d_star.mcse, closed.n_pairs);
    println!("floored replicate estimates per obs: {:?}", replicate.floored);

    let ids = closed.obs_ids.clone();
    let groups = GroupMap::from_pairs(ids.iter().enumerate().map(|(i, id)| (id.clone(), if i < 4 { "first" } else { "second" })))?;
    for (g, h) in group_leverage(&closed, &groups)? {
        println!("group {g}: leverage {h:.4}");
    }
    let mut eps = vec![0.0; spec.n()];
    eps[..4].fill(1.0);
    println!("CLLEV(first half) = {:.4}", cllev_direction(&closed, &Perturbation::new(eps)?)?);

    closed.write_csv(std::io::stdout())?;
    Ok(())
}
