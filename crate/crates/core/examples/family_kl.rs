//! KL divergence between posterior predictive distributions of each family,
//! in closed form and by replicate sampling.

use bayes_lens::leverage::{family_kl, replicate_kl};
use bayes_lens::sample_store::Predictive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pairs = [
        (Predictive::NormalKnownVar { mean: 0.0, var: 1.0 }, Predictive::NormalKnownVar { mean: 1.0, var: 1.0 }),
        (Predictive::Normal { mean: 0.0, var: 1.0 }, Predictive::Normal { mean: 0.5, var: 2.0 }),
        (Predictive::Poisson { rate: 2.0 }, Predictive::Poisson { rate: 1.0 }),
        (Predictive::Binomial { prob: 0.3, trials: 12 }, Predictive::Binomial { prob: 0.4, trials: 12 }),
        (Predictive::Gamma { shape: 3.0, rate: 1.5 }, Predictive::Gamma { shape: 2.0, rate: 1.0 }),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (p, q) in &pairs {
        let exact = family_kl(p, q)?;
        let mc = replicate_kl(p, q, 100_000, &mut rng)?;
        println!("{:<16} closed {exact:.5}  replicates {:.5} +- {:.5}", p.family().name(), mc.value, mc.mcse);
    }
    let mismatch = family_kl(&pairs[0].0, &pairs[2].0);
    println!("mixed families: {}", mismatch.unwrap_err());
    Ok(())
}
