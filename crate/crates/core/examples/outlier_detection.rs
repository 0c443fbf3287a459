//! Separating outliers from leverage points with the outlier matrix.
//!
//! CLOUT divides local influence by local leverage, so a high-leverage row
//! that sits on the fitted line scores low while a response outlier scores
//! high.

use bayes_lens::influence::loglik_covariance;
use bayes_lens::leverage::{hat_values, LeverageConfig};
use bayes_lens::linear_oracle::{exact_sampler, plant_anomalies, random_spec};
use bayes_lens::outliers::{outlier_matrix, scree, truncated_clout};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (outlier, leverage) = (6, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut spec = random_spec(&mut rng, 40, 2, false);
    spec.x.column_mut(0).fill(1.0);
    let spec = plant_anomalies(&spec, outlier, 8.0, leverage, 5.0)?;

    let draws = exact_sampler(&spec, 20_000, 4, 2)?;
    let v = loglik_covariance(&draws.loglik)?;
    let h = hat_values(&draws.pred, &LeverageConfig::default())?;
    let dec = outlier_matrix(&v, &h)?;

    let mut order: Vec<usize> = (0..dec.n()).collect();
    order.sort_by(|&a, &b| dec.clout[b].total_cmp(&dec.clout[a]));
    println!("planted outlier obs {}, leverage point obs {}", outlier + 1, leverage + 1);
    println!("top CLOUT: {:?}", order[..5].iter().map(|&i| &dec.obs_ids[i]).collect::<Vec<_>>());
    println!("leverage point: h = {:.3}, CLOUT = {:.3}, rank {}", h.h[leverage], dec.clout[leverage],
        order.iter().position(|&i| i == leverage).unwrap() + 1);

    for row in scree(&dec).iter().take(4) {
        println!("eigenvalue {} = {:.3} ({:.1}% cumulative)", row.rank, row.eigenvalue, 100.0 * row.cumulative_share);
    }
    let principal = dec.eigenvector(0);
    let top = (0..dec.n()).max_by(|&a, &b| principal[a].abs().total_cmp(&principal[b].abs())).unwrap();
    println!("principal direction loads most on obs {}", dec.obs_ids[top]);
    let t1 = truncated_clout(&dec, 1)?;
    println!("rank-1 CLOUT at the outlier: {:.3} of {:.3}", t1[outlier], dec.clout[outlier]);
    Ok(())
}
