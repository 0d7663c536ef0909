//! Sliding-window maintenance engine.
//!
//! A window holds the current observations in a FIFO ring buffer and keeps a
//! [`CovarianceState`] (and optionally an [`LdlState`]) consistent with the
//! buffer by driving one mixed update/downdate per slide. A refactorization
//! safety net rebuilds everything from the raw buffer on a fixed cadence, on
//! a failed drift spot-check, or when a downdate loses positive definiteness.

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ldl::LdlState;
use crate::matrix::DataMatrix;
use crate::moments::{mixed_update_downdate, CovarianceState, Root};

/// Which statistics the window maintains incrementally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    CovarianceOnly,
    Ldl,
}

/// Window geometry and safety-net policy.
#[derive(Debug, Clone)]
pub struct WindowConfig {
    width: usize,
    step_add: usize,
    step_remove: usize,
    backend: Backend,
    refactor_every: usize,
    drift_tol: f64,
}

impl WindowConfig {
    /// A window of `width >= 2` observations sliding by one column per step,
    /// never refactorizing, with the default drift tolerance of 1e-8.
    pub fn new(width: usize, backend: Backend) -> Result<Self> {
        if width < 2 {
            return Err(Error::CountTooSmall {
                need: 2,
                have: width,
            });
        }
        Ok(WindowConfig {
            width,
            step_add: 1,
            step_remove: 1,
            backend,
            refactor_every: 0,
            drift_tol: 1e-8,
        })
    }

    /// Columns entering and leaving per slide.
    pub fn with_steps(mut self, step_add: usize, step_remove: usize) -> Self {
        self.step_add = step_add;
        self.step_remove = step_remove;
        self
    }

    /// Full refactorization cadence; 0 disables both the cadence and the
    /// drift spot-checks.
    pub fn with_refactor_every(mut self, every: usize) -> Self {
        self.refactor_every = every;
        self
    }

    /// Relative Frobenius threshold for the drift spot-check. Must be
    /// positive.
    pub fn with_drift_tol(mut self, tol: f64) -> Self {
        assert!(tol > 0.0 && tol.is_finite(), "drift tolerance must be > 0");
        self.drift_tol = tol;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn step_add(&self) -> usize {
        self.step_add
    }

    pub fn step_remove(&self) -> usize {
        self.step_remove
    }

    pub fn refactor_every(&self) -> usize {
        self.refactor_every
    }

    pub fn drift_tol(&self) -> f64 {
        self.drift_tol
    }
}

/// Counters for what the safety net actually did.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WindowReport {
    pub slides: u64,
    pub scheduled_refactorizations: u64,
    pub drift_refactorizations: u64,
    pub definiteness_recoveries: u64,
}

/// The engine: ring buffer plus maintained statistics.
#[derive(Debug, Clone)]
pub struct WindowState {
    config: WindowConfig,
    buffer: VecDeque<Vec<f64>>,
    stats: CovarianceState,
    factors: Option<LdlState>,
    steps_since_refactor: usize,
    spot_rng: ChaCha8Rng,
    report: WindowReport,
}

/// Fills a window from exactly `config.width` initial observations.
pub fn window_init(config: WindowConfig, initial: &DataMatrix) -> Result<WindowState> {
    if initial.cols() != config.width {
        return Err(Error::DimensionMismatch {
            expected: config.width,
            got: initial.cols(),
        });
    }
    let stats = CovarianceState::from_columns(initial);
    let factors = match config.backend {
        Backend::CovarianceOnly => None,
        Backend::Ldl => Some(LdlState::from_covariance(&stats)?),
    };
    let buffer = (0..initial.cols()).map(|j| initial.col(j).to_vec()).collect();
    Ok(WindowState {
        config,
        buffer,
        stats,
        factors,
        steps_since_refactor: 0,
        spot_rng: ChaCha8Rng::seed_from_u64(0x5EED_C0FF), // fixed: spot checks are reproducible
        report: WindowReport::default(),
    })
}

impl WindowState {
    pub fn config(&self) -> &WindowConfig {
        &self.config
    }

    pub fn stats(&self) -> &CovarianceState {
        &self.stats
    }

    pub fn factors(&self) -> Option<&LdlState> {
        self.factors.as_ref()
    }

    pub fn report(&self) -> WindowReport {
        self.report
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.stats.dim()
    }

    /// The literal current window contents, oldest column first.
    pub fn buffer_matrix(&self) -> DataMatrix {
        let m = self.dim();
        let mut data = Vec::with_capacity(m * self.buffer.len());
        for col in &self.buffer {
            data.extend_from_slice(col);
        }
        DataMatrix::new(m, self.buffer.len(), data).expect("buffer columns are finite")
    }

    /// Evicts the oldest `step_remove` columns, appends `incoming`, and
    /// applies one mixed update/downdate to the maintained statistics.
    pub fn slide(&mut self, incoming: &DataMatrix) -> Result<()> {
        let m = self.dim();
        if incoming.rows() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: incoming.rows(),
            });
        }
        if incoming.cols() != self.config.step_add {
            return Err(Error::DimensionMismatch {
                expected: self.config.step_add,
                got: incoming.cols(),
            });
        }
        let k_out = self.config.step_remove;
        if self.buffer.len() < k_out {
            return Err(Error::RemoveTooMany {
                remove: k_out,
                have: self.buffer.len(),
            });
        }
        let mut evicted_data = Vec::with_capacity(m * k_out);
        for col in self.buffer.iter().take(k_out) {
            evicted_data.extend_from_slice(col);
        }
        let evicted = DataMatrix::new(m, k_out, evicted_data)?;

        let new_stats = mixed_update_downdate(&self.stats, incoming, &evicted, Root::Minus)?;
        let ldl_result = self
            .factors
            .as_ref()
            .map(|f| crate::ldl::ldl_mixed_modify(f, incoming, &evicted, Root::Minus));
        // anything other than a definiteness loss is a caller error: report it
        // before touching the buffer
        if let Some(Err(e)) = &ldl_result {
            if !matches!(e, Error::LostDefiniteness { .. }) {
                return Err(e.clone());
            }
        }

        for _ in 0..k_out {
            self.buffer.pop_front();
        }
        for j in 0..incoming.cols() {
            self.buffer.push_back(incoming.col(j).to_vec());
        }
        self.stats = new_stats;
        self.report.slides += 1;
        self.steps_since_refactor += 1;

        match ldl_result {
            None => {}
            Some(Ok(f)) => self.factors = Some(f),
            Some(Err(_)) => {
                // downdate destroyed definiteness: rebuild from the raw buffer
                self.refactorize()?;
                self.report.definiteness_recoveries += 1;
                return Ok(());
            }
        }

        let every = self.config.refactor_every;
        if every > 0 {
            if self.steps_since_refactor >= every {
                self.refactorize()?;
                self.report.scheduled_refactorizations += 1;
            } else {
                let cadence = every.div_ceil(4).max(1);
                if self.steps_since_refactor.is_multiple_of(cadence) && self.spot_check_drifted() {
                    self.refactorize()?;
                    self.report.drift_refactorizations += 1;
                }
            }
        }
        Ok(())
    }

    /// Squared Mahalanobis distance of `v` from the current window
    /// statistics. Needs the LDL backend.
    pub fn score(&self, v: &[f64]) -> Result<f64> {
        match &self.factors {
            Some(f) => f.mahalanobis_sq(v),
            None => Err(Error::SingularFactor {
                index: 0,
                value: 0.0,
            }),
        }
    }

    /// Discards the maintained statistics and rebuilds them from the buffer.
    pub fn refactorize(&mut self) -> Result<()> {
        let contents = self.buffer_matrix();
        self.stats = CovarianceState::from_columns(&contents);
        if self.config.backend == Backend::Ldl {
            match LdlState::from_covariance(&self.stats) {
                Ok(f) => self.factors = Some(f),
                Err(e) => {
                    self.factors = None;
                    return Err(e);
                }
            }
        }
        self.steps_since_refactor = 0;
        Ok(())
    }

    /// Compares one randomly chosen scatter entry against a recomputation
    /// from the buffer. O(window) per check, so the net stays cheap.
    fn spot_check_drifted(&mut self) -> bool {
        let m = self.dim();
        let n = self.buffer.len();
        if n == 0 {
            return false;
        }
        let i = self.spot_rng.random_range(0..m);
        let j = self.spot_rng.random_range(0..m);
        let (mut mi, mut mj) = (0.0, 0.0);
        for col in &self.buffer {
            mi += col[i];
            mj += col[j];
        }
        mi /= n as f64;
        mj /= n as f64;
        let mut entry = 0.0;
        for col in &self.buffer {
            entry += (col[i] - mi) * (col[j] - mj);
        }
        let scale = self.stats.scatter().frobenius_norm().max(f64::MIN_POSITIVE);
        (self.stats.scatter()[(i, j)] - entry).abs() > self.config.drift_tol * scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::rel_frobenius_diff;
    use crate::oracle::oracle_covariance;

    fn dm(rows: usize, vals: &[f64]) -> DataMatrix {
        DataMatrix::new(rows, vals.len() / rows, vals.to_vec()).unwrap()
    }

    #[test]
    fn init_variance_example() {
        let cfg = WindowConfig::new(4, Backend::CovarianceOnly).unwrap();
        let w = window_init(cfg, &dm(1, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let cov = w.stats().covariance().unwrap();
        assert!((cov[(0, 0)] - 5.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn constant_window_backends() {
        let flat = dm(1, &[2.0, 2.0, 2.0]);
        let cfg = WindowConfig::new(3, Backend::CovarianceOnly).unwrap();
        let w = window_init(cfg, &flat).unwrap();
        assert_eq!(w.stats().scatter()[(0, 0)], 0.0);

        let cfg = WindowConfig::new(3, Backend::Ldl).unwrap();
        let err = window_init(cfg, &flat).unwrap_err();
        assert_eq!(err.name(), "NotPositiveDefinite");
    }

    #[test]
    fn slide_shift_invariance() {
        let cfg = WindowConfig::new(4, Backend::CovarianceOnly).unwrap();
        let mut w = window_init(cfg, &dm(1, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        w.slide(&dm(1, &[5.0])).unwrap();
        assert_eq!(w.len(), 4);
        let cov = w.stats().covariance().unwrap();
        assert!((cov[(0, 0)] - 5.0 / 3.0).abs() < 1e-12);
        assert!((w.stats().mean()[0] - 3.5).abs() < 1e-14);
    }

    #[test]
    fn slide_with_incoming_equal_to_evicted() {
        let cfg = WindowConfig::new(4, Backend::Ldl).unwrap();
        let init = dm(2, &[1.0, 0.5, 2.0, -0.25, 3.0, 0.75, 4.0, 0.125]);
        let mut w = window_init(cfg, &init).unwrap();
        let before = w.stats().clone();
        w.slide(&dm(2, &[1.0, 0.5])).unwrap();
        assert!(rel_frobenius_diff(w.stats().scatter(), before.scatter()) < 1e-11);
    }

    #[test]
    fn window_tracks_oracle_over_slides() {
        let cfg = WindowConfig::new(6, Backend::Ldl).unwrap();
        let init = dm(2, &[0.3, -1.0, 0.7, 1.1, 0.2, -0.5, -0.9, 0.4, 1.3, 0.6, -0.2, 0.8]);
        let mut w = window_init(cfg, &init).unwrap();
        let mut x = 0.0f64;
        for _ in 0..200 {
            x += 1.0;
            let col = [(x * 0.7).sin(), (x * 0.3).cos() * 2.0];
            w.slide(&DataMatrix::new(2, 1, col.to_vec()).unwrap()).unwrap();
        }
        let truth = oracle_covariance(&w.buffer_matrix());
        assert!(rel_frobenius_diff(w.stats().scatter(), &truth.scatter) < 1e-10);
        let f = w.factors().unwrap();
        assert!(
            rel_frobenius_diff(&f.reconstruct(), &truth.covariance.unwrap()) < 1e-10
        );
    }

    #[test]
    fn refactor_every_one_tracks_tightly() {
        let cfg = WindowConfig::new(5, Backend::CovarianceOnly)
            .unwrap()
            .with_refactor_every(1);
        let init = dm(1, &[5.0, 3.0, 1.0, 4.0, 2.0]);
        let mut w = window_init(cfg, &init).unwrap();
        for s in 0..50 {
            w.slide(&dm(1, &[(s as f64 * 1.37).sin() * 3.0])).unwrap();
        }
        assert_eq!(w.report().scheduled_refactorizations, 50);
        let truth = oracle_covariance(&w.buffer_matrix());
        assert!(rel_frobenius_diff(w.stats().scatter(), &truth.scatter) < 1e-12);
    }

    #[test]
    fn full_replacement_matches_fresh_fit() {
        let cfg = WindowConfig::new(4, Backend::CovarianceOnly).unwrap();
        let mut w = window_init(cfg, &dm(1, &[9.0, 8.0, 7.0, 6.0])).unwrap();
        let incoming = [0.5, -1.5, 2.5, 0.25];
        for v in incoming {
            w.slide(&dm(1, &[v])).unwrap();
        }
        let fresh = CovarianceState::from_columns(&dm(1, &incoming));
        assert!(rel_frobenius_diff(w.stats().scatter(), fresh.scatter()) < 1e-8);
    }

    #[test]
    fn score_requires_ldl_backend() {
        let cfg = WindowConfig::new(3, Backend::CovarianceOnly).unwrap();
        let w = window_init(cfg, &dm(1, &[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(w.score(&[1.0]).unwrap_err().name(), "SingularFactor");

        let cfg = WindowConfig::new(3, Backend::Ldl).unwrap();
        let w = window_init(cfg, &dm(1, &[1.0, 2.0, 3.0])).unwrap();
        let at_mean = w.score(&[2.0]).unwrap();
        assert!(at_mean.abs() < 1e-14);
    }

    #[test]
    fn unequal_steps_change_window_size() {
        let cfg = WindowConfig::new(4, Backend::CovarianceOnly)
            .unwrap()
            .with_steps(2, 1);
        let mut w = window_init(cfg, &dm(1, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        w.slide(&dm(1, &[5.0, 6.0])).unwrap();
        assert_eq!(w.len(), 5);
        assert_eq!(w.stats().count(), 5);
        let truth = oracle_covariance(&w.buffer_matrix());
        assert!(rel_frobenius_diff(w.stats().scatter(), &truth.scatter) < 1e-12);
    }

    #[test]
    fn slide_rejects_wrong_shape() {
        let cfg = WindowConfig::new(3, Backend::CovarianceOnly).unwrap();
        let mut w = window_init(cfg, &dm(1, &[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(
            w.slide(&dm(2, &[1.0, 1.0])).unwrap_err().name(),
            "DimensionMismatch"
        );
        assert_eq!(
            w.slide(&dm(1, &[1.0, 2.0])).unwrap_err().name(),
            "DimensionMismatch"
        );
    }

    #[test]
    fn init_rejects_wrong_width() {
        let cfg = WindowConfig::new(4, Backend::CovarianceOnly).unwrap();
        let err = window_init(cfg, &dm(1, &[1.0, 2.0])).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 4, got: 2 });
        assert_eq!(
            WindowConfig::new(1, Backend::Ldl).unwrap_err(),
            Error::CountTooSmall { need: 2, have: 1 }
        );
    }
}
