//! Wall-clock comparison of incremental maintenance against recomputation.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::Result;
use crate::ldl::{ldl_factor, LdlState};
use crate::matrix::DataMatrix;
use crate::moments::CovarianceState;

/// Best-of timings (seconds per operation) at one problem shape.
#[derive(Debug, Clone, Copy)]
pub struct TimingReport {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub incremental_update_s: f64,
    pub naive_recompute_s: f64,
    pub ldl_update_s: f64,
    pub ldl_rebuild_s: f64,
}

impl TimingReport {
    /// Naive covariance recomputation time over incremental update time.
    pub fn speedup(&self) -> f64 {
        self.naive_recompute_s / self.incremental_update_s
    }

    pub fn ldl_speedup(&self) -> f64 {
        self.ldl_rebuild_s / self.ldl_update_s
    }
}

/// Runs `f` repeatedly and returns the fastest observed time in seconds.
/// Stops after `budget_s` of accumulated time once `min_reps` runs finished.
fn best_of<F: FnMut()>(mut f: F, min_reps: usize, budget_s: f64) -> f64 {
    let mut best = f64::INFINITY;
    let mut total = 0.0;
    let mut reps = 0;
    loop {
        let t0 = Instant::now();
        f();
        let dt = t0.elapsed().as_secs_f64();
        best = best.min(dt);
        total += dt;
        reps += 1;
        if reps >= min_reps && (total >= budget_s || reps >= 10_000) {
            return best;
        }
    }
}

/// Benchmarks a rank-k update at shape `(m, n, k)` against recomputing from
/// the full edited sample, for both the plain covariance and the LDL factors.
pub fn bench_timings(m: usize, n: usize, k: usize, seed: u64) -> Result<TimingReport> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let full: Vec<f64> = (0..m * (n + k)).map(|_| rng.random_range(-1.0..1.0)).collect();
    let base = DataMatrix::new(m, n, full[..m * n].to_vec())?;
    let y = DataMatrix::new(m, k, full[m * n..].to_vec())?;
    let edited = DataMatrix::new(m, n + k, full)?;

    let state = CovarianceState::from_columns(&base);
    let incremental_update_s = best_of(
        || {
            let updated = state.update(&y).unwrap();
            std::hint::black_box(&updated);
        },
        10,
        0.5,
    );
    let naive_recompute_s = best_of(
        || {
            let rebuilt = CovarianceState::from_columns(&edited);
            std::hint::black_box(&rebuilt);
        },
        2,
        2.0,
    );

    let factors = LdlState::from_covariance(&state)?;
    let ldl_update_s = best_of(
        || {
            let updated = factors.update(&y).unwrap();
            std::hint::black_box(&updated);
        },
        10,
        0.5,
    );
    let cov2 = CovarianceState::from_columns(&edited).covariance()?;
    let ldl_rebuild_s = best_of(
        || {
            let refactored = ldl_factor(&cov2).unwrap();
            std::hint::black_box(&refactored);
        },
        5,
        1.0,
    );

    Ok(TimingReport {
        m,
        n,
        k,
        incremental_update_s,
        naive_recompute_s,
        ldl_update_s,
        ldl_rebuild_s,
    })
}
