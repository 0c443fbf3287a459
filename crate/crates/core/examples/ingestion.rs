//! Round trip through the on-disk formats: log-likelihood CSV, predictive
//! CSV, metadata JSON and group map CSV.

use std::fs::File;

use bayes_lens::influence::{influence_report, InfluenceConfig};
use bayes_lens::linear_oracle::{exact_sampler, random_spec};
use bayes_lens::sample_store::{
    aggregate, load_groups, load_predictive, load_samples, write_groups_csv, write_loglik_csv, write_metadata,
    write_predictive_csv, Family, FamilySpec, Metadata,
};
use bayes_lens::GroupMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = |f: &str| dir.path().join(f);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let spec = random_spec(&mut rng, 6, 2, true);
    let draws = exact_sampler(&spec, 2_000, 2, 8)?;
    let meta = Metadata {
        chains: draws.loglik.draw_chain().to_vec(),
        families: Some(FamilySpec::Shared(Family::NormalKnownVar)),
        trials: None,
    };
    write_loglik_csv(&draws.loglik, File::create(path("loglik.csv"))?)?;
    write_predictive_csv(&draws.pred, File::create(path("pred.csv"))?)?;
    write_metadata(&meta, File::create(path("meta.json"))?)?;
    let ids = draws.loglik.obs_ids().to_vec();
    let groups = GroupMap::from_pairs(ids.iter().enumerate().map(|(i, id)| (id.clone(), format!("pair{}", i / 2))))?;
    write_groups_csv(&groups, File::create(path("groups.csv"))?)?;

    let samples = load_samples(path("loglik.csv"), path("meta.json"))?;
    let pred = load_predictive(path("pred.csv"), path("meta.json"))?;
    pred.check_aligned(&samples)?;
    println!("loaded {} draws x {} observations, identical: {}", samples.n_draws(), samples.n_obs(), samples == draws.loglik);

    let grouped = aggregate(&samples, &load_groups(path("groups.csv"))?)?;
    println!("aggregated into {} groups: {:?}", grouped.n_obs(), grouped.obs_ids());
    influence_report(&grouped, &InfluenceConfig::default())?.write_csv(std::io::stdout())?;

    match load_samples(path("loglik.csv"), path("missing.json")) {
        Err(e) => println!("error code {}: {e}", e.code()),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
