//! Monte Carlo estimators against the conjugate linear model's closed forms.

mod common;

use bayes_lens::influence::{self, influence_report, InfluenceConfig};
use bayes_lens::leverage::{hat_values, KlMethod, LeverageConfig};
use bayes_lens::linear_oracle::{dic_plug_in_pd, exact_sampler, fit, random_spec};
use bayes_lens::sample_store::{LogLikSamples, PredictiveDraws};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const Z: f64 = 4.0;

fn within(est: f64, se: f64, truth: f64) -> bool {
    (est - truth).abs() <= Z * se
}

#[test]
fn influence_estimates_match_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let spec = random_spec(&mut rng, 8, 2, true);
    let d = fit(&spec).unwrap();
    let draws = exact_sampler(&spec, 40_000, 8, 5).unwrap();
    let r = influence_report(&draws.loglik, &InfluenceConfig::default()).unwrap();
    for i in 0..8 {
        assert!(within(r.linf[i].value, r.linf[i].mcse, d.linf[i]), "LINF {i}: {:?} vs {}", r.linf[i], d.linf[i]);
        assert!(within(r.dinf[i].value, r.dinf[i].mcse, d.dinf[i]), "DINF {i}: {:?} vs {}", r.dinf[i], d.dinf[i]);
    }
    assert!(within(r.p_w.value, r.p_w.mcse, d.p_w));
    assert!(within(r.p_v.value, r.p_v.mcse, d.p_v));
}

#[test]
fn hat_values_match_hat_matrix_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let spec = random_spec(&mut rng, 10, 3, false);
    let d = fit(&spec).unwrap();
    let draws = exact_sampler(&spec, 40_000, 4, 6).unwrap();
    let h = hat_values(&draws.pred, &LeverageConfig::default()).unwrap();
    for i in 0..10 {
        assert!(within(h.h[i], h.mcse[i], d.h[i]), "h {i}: {} +- {} vs {}", h.h[i], h.mcse[i], d.h[i]);
    }
    assert!(within(h.p_d_star.value, h.p_d_star.mcse, 3.0));
}

#[test]
fn swapping_streams_agrees_within_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let spec = random_spec(&mut rng, 6, 2, true);
    let draws = exact_sampler(&spec, 20_000, 2, 7).unwrap();
    let swapped_chains: Vec<u32> = draws.pred.draw_chain().iter().map(|c| 1 - c).collect();
    let n = draws.pred.n_obs();
    let params = (0..draws.pred.n_draws())
        .flat_map(|s| (0..n).map(move |i| (s, i)))
        .map(|(s, i)| *draws.pred.get(s, i))
        .collect();
    let swapped = PredictiveDraws::new(params, swapped_chains, draws.pred.obs_ids().to_vec()).unwrap();
    let a = hat_values(&draws.pred, &LeverageConfig::default()).unwrap();
    let b = hat_values(&swapped, &LeverageConfig::default()).unwrap();
    for i in 0..n {
        assert!((a.h[i] - b.h[i]).abs() <= 3.0 * (a.mcse[i] + b.mcse[i]));
    }
}

#[test]
fn replicate_route_tracks_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let spec = random_spec(&mut rng, 5, 1, false);
    let d = fit(&spec).unwrap();
    let draws = exact_sampler(&spec, 8_000, 2, 8).unwrap();
    let cfg = LeverageConfig { method: KlMethod::Replicates(64), ..Default::default() };
    let h = hat_values(&draws.pred, &cfg).unwrap();
    for i in 0..5 {
        assert!(within(h.h[i], h.mcse[i], d.h[i]), "h {i}: {} +- {} vs {}", h.h[i], h.mcse[i], d.h[i]);
    }
}

#[test]
fn independent_columns_give_ratio_two() {
    let (s, n) = (1_000_000, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..s).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let chains = (0..s).map(|k| (k / (s / 4)) as u32).collect();
    let samples = LogLikSamples::from_columns(cols, chains, (0..n).map(|i| i.to_string()).collect()).unwrap();
    let r = influence_report(&samples, &InfluenceConfig::default()).unwrap();
    assert!(within(r.conflict_ratio.value, r.conflict_ratio.mcse, 2.0), "{:?}", r.conflict_ratio);
    assert!(!r.conflict_flagged);
    assert!((influence::conflict_ratio(&samples).unwrap() - r.conflict_ratio.value).abs() < 1e-12);
}

#[test]
fn plug_in_dic_penalty_matches_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let spec = random_spec(&mut rng, 20, 3, false);
    let draws = exact_sampler(&spec, 50_000, 4, 9).unwrap();
    // plug-in pD is a mean of chi-square(3)/... deviations; its sd over S draws is about sqrt(2k/S)
    let pd = dic_plug_in_pd(&spec, &draws.theta);
    assert!((pd - 3.0).abs() < Z * (6.0f64 / 50_000.0).sqrt());
}
