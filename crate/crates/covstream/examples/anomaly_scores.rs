//! Mahalanobis scoring of a stream against a sliding background window.
//!
//! Plants a handful of out-of-distribution observations in a correlated
//! stream and flags them by their squared Mahalanobis distance from the
//! current window statistics.
//!
//! ```bash
//! cargo run --release --example anomaly_scores
//! ```

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use covstream::{window_init, Backend, DataMatrix, Result, WindowConfig};

fn main() -> Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let m = 3;
    let width = 96;
    let steps = 900;
    let planted: &[usize] = &[250, 477, 702];

    // correlated background: feature 2 echoes feature 0 plus noise
    let background = |rng: &mut ChaCha12Rng| -> Vec<f64> {
        let a = rng.random_range(-1.0..1.0);
        let b = rng.random_range(-1.0..1.0);
        vec![a, b, 0.8 * a + 0.2 * rng.random_range(-1.0..1.0)]
    };

    let initial_cols: Vec<Vec<f64>> = (0..width).map(|_| background(&mut rng)).collect();
    let initial = DataMatrix::from_observations(
        m,
        &initial_cols.iter().map(|c| c.as_slice()).collect::<Vec<_>>(),
    )?;
    let cfg = WindowConfig::new(width, Backend::Ldl)?;
    let mut window = window_init(cfg, &initial)?;

    let mut scored: Vec<(usize, f64)> = Vec::new();
    for step in 0..steps {
        let mut obs = background(&mut rng);
        if planted.contains(&step) {
            // an anomaly violates the correlation structure rather than the
            // per-feature range
            obs = vec![obs[0], obs[1], -0.9 * obs[0] + 2.0];
        }
        // score against the background *before* absorbing the observation
        let score = window.score(&obs)?;
        scored.push((step, score));
        window.slide(&DataMatrix::new(m, 1, obs)?)?;
    }

    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    println!("top 5 squared Mahalanobis scores over {steps} steps:");
    for (step, score) in scored.iter().take(5) {
        let tag = if planted.contains(step) { "  <- planted" } else { "" };
        println!("  step {step:>4}: {score:>9.2}{tag}");
    }

    let hits = scored
        .iter()
        .take(planted.len())
        .filter(|(s, _)| planted.contains(s))
        .count();
    println!(
        "{hits}/{} planted anomalies rank in the top {}",
        planted.len(),
        planted.len()
    );
    Ok(())
}
