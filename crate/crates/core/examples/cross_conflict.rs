//! Conflict between groups of observations, and binomial p_W contributions.
//!
//! Two groups share a location parameter, but one group is shifted. The
//! per-group ratio flags the mismatch that the global ratio dilutes.

use bayes_lens::influence::{binomial_pw, cross_conflict, BinomialVariant};
use bayes_lens::{GroupMap, LogLikSamples};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // y ~ N(mu, 1) with a flat prior; the last five points sit 3 units higher
    let y: Vec<f64> = (0..20).map(|i| if i < 15 { (i % 5) as f64 * 0.2 - 0.4 } else { 3.0 }).collect();
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let posterior = Normal::new(ybar, (1.0 / n).sqrt())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s = 40_000;
    let mus: Vec<f64> = (0..s).map(|_| posterior.sample(&mut rng)).collect();
    let columns: Vec<Vec<f64>> = y
        .iter()
        .map(|yi| mus.iter().map(|mu| -0.5 * (yi - mu).powi(2) - 0.5 * (2.0 * std::f64::consts::PI).ln()).collect())
        .collect();
    let ids: Vec<String> = (1..=20).map(|i| i.to_string()).collect();
    let chains = (0..s).map(|k| (k / (s / 4)) as u32).collect();
    let samples = LogLikSamples::from_columns(columns, chains, ids.clone())?;

    let groups = GroupMap::from_pairs(ids.iter().enumerate().map(|(i, id)| (id.clone(), if i < 15 { "bulk" } else { "shifted" })))?;
    for g in cross_conflict(&samples, &groups, true)? {
        let ratio = g.ratio.map(|e| format!("{:.2} +- {:.2}", e.value, e.mcse)).unwrap_or_else(|e| e.to_string());
        println!("{:<8} n={:<3} p_V={:.3} p_W={:.3} ratio {ratio}", g.group, g.n_members, g.p_v, g.p_w);
    }
    let all = GroupMap::all_in_one(&ids, "all")?;
    let global = &cross_conflict(&samples, &all, true)?[0];
    println!("all in one: ratio {:.2}", global.ratio.as_ref().map(|e| e.value).unwrap_or(f64::NAN));

    // binomial counts: perturbing whole observations versus single trials
    let (counts, trials) = (vec![3, 9, 0], vec![10, 10, 4]);
    let pi_draws: Vec<Vec<f64>> = (0..2000)
        .map(|s| {
            let t = s as f64 / 2000.0;
            vec![0.2 + 0.1 * t, 0.85 + 0.05 * t, 0.1 + 0.05 * t]
        })
        .collect();
    println!("binomial  p_W terms {:?}", binomial_pw(&counts, &trials, &pi_draws, BinomialVariant::Binomial)?);
    println!("bernoulli p_W terms {:?}", binomial_pw(&counts, &trials, &pi_draws, BinomialVariant::Bernoulli)?);
    Ok(())
}
