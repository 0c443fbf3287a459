//! Closed-form diagnostics for a conjugate normal linear model.
//!
//! Plants a response outlier and a high-leverage row, then prints per-row
//! hat values and the four influence measures next to each other.

use bayes_lens::linear_oracle::{fit, plant_anomalies, random_spec, sandwich_identity_check};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut spec = random_spec(&mut rng, 25, 2, false);
    spec.x.column_mut(0).fill(1.0);
    let spec = plant_anomalies(&spec, 4, 8.0, 17, 5.0)?;
    let d = fit(&spec)?;

    println!("{:>4} {:>7} {:>8} {:>8} {:>8} {:>9} {:>9}", "obs", "h", "r", "DINF", "LINF", "ZINF", "Cook");
    for i in 0..d.n() {
        println!(
            "{:>4} {:>7.4} {:>8.3} {:>8.3} {:>8.3} {:>9.3} {:>9.4}",
            d.obs_ids[i], d.h[i], d.residuals[i], d.dinf[i], d.linf[i], d.zinf[i], d.cook[i]
        );
    }
    println!("p_D = tr H = {:.4}, p_W = {:.4}, p_V = {:.4}", d.p_d, d.p_w, d.p_v);

    // only interesting with an informative prior, otherwise both sides are zero
    let informative = random_spec(&mut rng, 25, 2, true);
    let (lhs, rhs) = sandwich_identity_check(&informative)?;
    println!("sandwich identity: {lhs:.10} = {rhs:.10}");
    Ok(())
}
