//! Keeping an LDL factorization current through a stream of edits instead of
//! refactoring after each one.
//!
//! ```bash
//! cargo run --release --example ldl_maintenance
//! ```

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use covstream::oracle::oracle_covariance;
use covstream::{
    ldl_factor, rel_frobenius_diff, CovarianceState, DataMatrix, LdlState, Result,
};

fn main() -> Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let m = 6;
    let n = 80;
    let mut columns: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();

    let x = DataMatrix::from_observations(m, &columns.iter().map(|c| c.as_slice()).collect::<Vec<_>>())?;
    let mut factors = LdlState::from_covariance(&CovarianceState::from_columns(&x))?;
    println!(
        "initial factors over {} observations, D = {:?}",
        factors.count(),
        factors
            .diagonal()
            .iter()
            .map(|d| (d * 1e3).round() / 1e3)
            .collect::<Vec<_>>()
    );

    // 200 slides: one observation in, the oldest out, factors updated in
    // place each time (never refactored)
    for _ in 0..200 {
        let incoming: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let add = DataMatrix::new(m, 1, incoming.clone())?;
        let remove = DataMatrix::new(m, 1, columns[0].clone())?;
        factors = factors.mixed(&add, &remove)?;
        columns.remove(0);
        columns.push(incoming);
    }

    let current = DataMatrix::from_observations(
        m,
        &columns.iter().map(|c| c.as_slice()).collect::<Vec<_>>(),
    )?;
    let truth = oracle_covariance(&current);
    let (l_ref, d_ref) = ldl_factor(truth.covariance.as_ref().unwrap())?;

    let l_err = {
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                worst = worst.max((factors.unit_lower()[(i, j)] - l_ref[(i, j)]).abs());
            }
        }
        worst
    };
    let d_err = factors
        .diagonal()
        .iter()
        .zip(&d_ref)
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0f64, f64::max);
    println!("after 200 maintained slides (zero refactorizations):");
    println!("  L vs fresh factorization: {l_err:.2e} max elementwise");
    println!("  D vs fresh factorization: {d_err:.2e} max relative");
    println!(
        "  reconstructed covariance:  {:.2e} relative",
        rel_frobenius_diff(&factors.reconstruct(), truth.covariance.as_ref().unwrap())
    );

    // the factors exist to be solved against
    let b: Vec<f64> = (0..m).map(|i| (i as f64) - 2.0).collect();
    let sol = factors.solve(&b)?;
    let residual: f64 = truth
        .covariance
        .as_ref()
        .unwrap()
        .mul_vec(&sol)
        .iter()
        .zip(&b)
        .map(|(a, c)| (a - c) * (a - c))
        .sum::<f64>()
        .sqrt();
    println!("solve S·x = b residual: {residual:.2e}");

    let probe: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    println!(
        "squared Mahalanobis distance of a probe: {:.4}",
        factors.mahalanobis_sq(&probe)?
    );
    Ok(())
}
