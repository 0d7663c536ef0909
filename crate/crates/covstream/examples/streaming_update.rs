//! Rank-k updates and downdates of a covariance state, without recomputing.
//!
//! ```bash
//! cargo run --release --example streaming_update
//! ```

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use covstream::oracle::oracle_covariance;
use covstream::{
    make_k_downdate, make_k_update, rel_frobenius_diff, Branch, CovarianceState, DataMatrix,
    KForm, Result,
};

fn main() -> Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let m = 3;

    // a batch of 50 three-feature observations
    let base: Vec<f64> = (0..m * 50).map(|_| rng.random_range(-1.0..1.0)).collect();
    let base = DataMatrix::new(m, 50, base)?;
    let state = CovarianceState::from_columns(&base);
    println!("fitted {} observations, m = {}", state.count(), state.dim());
    println!("covariance:\n{}", state.covariance()?);

    // four new observations arrive: a rank-4 update
    let fresh: Vec<f64> = (0..m * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fresh = DataMatrix::new(m, 4, fresh)?;
    let kf = make_k_update(&state, &fresh, Branch::Minus, KForm::PriorMean)?;
    println!(
        "update K factor: {}x{} (sign {:+})",
        kf.matrix().rows(),
        kf.k(),
        kf.sign()
    );
    let updated = state.update(&fresh)?;

    let truth = oracle_covariance(&base.append(&fresh)?);
    println!(
        "after update: n = {}, against recomputation: {:.2e} relative",
        updated.count(),
        rel_frobenius_diff(updated.scatter(), &truth.scatter)
    );

    // the plus branch builds a different K but the same K·Kᵀ
    let plus = make_k_update(&state, &fresh, Branch::Plus, KForm::PriorMean)?;
    println!(
        "plus-branch K differs elementwise, K·Kᵀ agrees to {:.2e}",
        rel_frobenius_diff(&plus.outer_product(), &kf.outer_product())
    );

    // retire the four oldest observations: a rank-4 downdate
    let oldest = DataMatrix::new(m, 4, base.data()[..m * 4].to_vec())?;
    let kd = make_k_downdate(&updated, &oldest, Branch::Minus)?;
    println!("downdate K factor: {}x{} (sign {:+})", m, kd.k(), kd.sign());
    let slid = updated.downdate(&oldest)?;

    let remaining = DataMatrix::new(
        m,
        50 - 4 + 4,
        [&base.data()[m * 4..], fresh.data()].concat(),
    )?;
    let truth = oracle_covariance(&remaining);
    println!(
        "after downdate: n = {}, against recomputation: {:.2e} relative",
        slid.count(),
        rel_frobenius_diff(slid.scatter(), &truth.scatter)
    );
    println!("covariance now:\n{}", slid.covariance()?);
    Ok(())
}
