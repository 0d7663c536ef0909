//! Simultaneous add/remove in one rank-k pass, both roots of the
//! coefficient, and the two-mean cross-check.
//!
//! ```bash
//! cargo run --release --example mixed_edit
//! ```

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use covstream::oracle::oracle_covariance;
use covstream::{
    mixed_coefficient, mixed_two_mean, mixed_update_downdate, rel_frobenius_diff,
    CovarianceState, DataMatrix, Result, Root,
};

fn main() -> Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let m = 4;
    let n = 60;
    let data: Vec<f64> = (0..m * n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let x = DataMatrix::new(m, n, data)?;
    let state = CovarianceState::from_columns(&x);

    // equal add/remove keeps the sample size: the coefficient degenerates
    let c = mixed_coefficient(60, 60, Root::Minus);
    println!("n1 = n2 = 60: c = {} ({:?})", c.c, c.root);

    // unequal sizes: two roots of (n2-n1)c² - 2·n2·c + n2 = 0
    for root in [Root::Minus, Root::Plus] {
        let c = mixed_coefficient(60, 62, root);
        println!(
            "n1 = 60, n2 = 62, {:?} root: c = {:.6} (quadratic residual {:.1e})",
            c.root,
            c.c,
            c.residual()
        );
    }

    // add 4 observations and drop the first 2, in a single pass
    let add: Vec<f64> = (0..m * 4).map(|_| rng.random_range(-2.0..2.0)).collect();
    let add = DataMatrix::new(m, 4, add)?;
    let drop_cols = DataMatrix::new(m, 2, x.data()[..m * 2].to_vec())?;

    let minus = mixed_update_downdate(&state, &add, &drop_cols, Root::Minus)?;
    let plus = mixed_update_downdate(&state, &add, &drop_cols, Root::Plus)?;
    let two_mean = mixed_two_mean(&state, &add, &drop_cols)?;

    let edited = DataMatrix::new(m, n - 2, x.data()[m * 2..].to_vec())?.append(&add)?;
    let truth = oracle_covariance(&edited);

    println!("\nmixed edit: +4 / -2 observations, n {} -> {}", n, minus.count());
    println!(
        "single-center vs recomputation: {:.2e} relative",
        rel_frobenius_diff(minus.scatter(), &truth.scatter)
    );
    println!(
        "plus root vs minus root:        {:.2e} relative",
        rel_frobenius_diff(plus.scatter(), minus.scatter())
    );
    println!(
        "two-mean path vs single-center: {:.2e} relative",
        rel_frobenius_diff(two_mean.scatter(), minus.scatter())
    );

    // the same edit as separate update and downdate passes
    let sequential = state.update(&add)?.downdate(&drop_cols)?;
    println!(
        "sequential update+downdate:     {:.2e} relative",
        rel_frobenius_diff(sequential.scatter(), minus.scatter())
    );
    Ok(())
}
