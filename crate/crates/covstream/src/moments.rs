//! Mean and covariance update, downdate, and mixed update/downdate as pure
//! state transitions.
//!
//! The covariance is carried as the unnormalized scatter `M = (n-1)·S`, which
//! turns every edit into a plain rank-k addition or subtraction `M ± K·Kᵀ`
//! with no rescaling pass; normalization to `S` happens only in the
//! [`CovarianceState::covariance`] accessor. The `K` factor is
//!
//! ```text
//! K = Y - (ȳ ± √(n/(n∓k)) (ȳ - x̄)) 1ᵀ
//! ```
//!
//! and a simultaneous add/remove of `k_u`/`k_d` observations is the rank-k
//! modification `M + K_u K_uᵀ - K_d K_dᵀ` with both factors centered on the
//! single vector `z = x̄₁ + c (x̄₂ - x̄₁)`.

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, Matrix};
use crate::scalar::Scalar;

/// Which sign of the `±` in the K-factor coefficient was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// Which of the two algebraically equivalent K forms of an update to build:
/// the coefficient/center pair can use the prior mean `x̄₁` or the posterior
/// mean `x̄₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KForm {
    PriorMean,
    PosteriorMean,
}

/// Requested root of the mixed-coefficient quadratic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Root {
    Plus,
    Minus,
}

/// Root actually used; `Half` when the sample size is unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootKind {
    Plus,
    Minus,
    Half,
}

/// Running count and arithmetic mean of an observation set.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanState {
    count: usize,
    mean: Vec<f64>,
}

impl MeanState {
    /// Canonical empty state: count 0, all-zeros mean.
    pub fn empty(m: usize) -> Self {
        MeanState {
            count: 0,
            mean: vec![0.0; m],
        }
    }

    pub fn new(count: usize, mean: Vec<f64>) -> Self {
        if count == 0 {
            return MeanState {
                count,
                mean: vec![0.0; mean.len()],
            };
        }
        MeanState { count, mean }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Count, mean, and unnormalized scatter `M = (n-1)·S` of an observation set.
///
/// Invariants: the scatter is exactly symmetric, zero whenever `count <= 1`,
/// and positive semidefinite up to round-off.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    count: usize,
    mean: Vec<f64>,
    scatter: Matrix,
}

impl CovarianceState {
    pub fn empty(m: usize) -> Self {
        CovarianceState {
            count: 0,
            mean: vec![0.0; m],
            scatter: Matrix::zeros(m, m),
        }
    }

    /// Two-pass construction from raw observations. Zero or one column yields
    /// zero scatter.
    pub fn from_columns(data: &DataMatrix) -> Self {
        let m = data.rows();
        let (mean, scatter) = from_columns_kernel(data.data(), m, data.cols());
        CovarianceState {
            count: data.cols(),
            mean,
            scatter: Matrix::from_vec(m, m, scatter),
        }
    }

    /// Rebuilds a state from stored parts, canonicalizing the empty cases.
    pub fn from_raw_parts(count: usize, mean: Vec<f64>, mut scatter: Matrix) -> Result<Self> {
        let m = mean.len();
        if scatter.rows() != m || scatter.cols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: scatter.rows(),
            });
        }
        if let Some(i) = mean.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        if let Some(i) = scatter.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        // mirror the lower triangle so the symmetry invariant holds exactly
        mirror_lower(scatter.data_mut(), m);
        if count <= 1 {
            for v in scatter.data_mut() {
                *v = 0.0;
            }
        }
        let mean = if count == 0 { vec![0.0; m] } else { mean };
        Ok(CovarianceState {
            count,
            mean,
            scatter,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// The unnormalized scatter matrix `M = (n-1)·S`.
    pub fn scatter(&self) -> &Matrix {
        &self.scatter
    }

    pub fn mean_state(&self) -> MeanState {
        MeanState {
            count: self.count,
            mean: self.mean.clone(),
        }
    }

    /// Sample covariance `M/(n-1)`. Undefined for fewer than two observations.
    pub fn covariance(&self) -> Result<Matrix> {
        if self.count < 2 {
            return Err(Error::CountTooSmall {
                need: 2,
                have: self.count,
            });
        }
        let mut s = self.scatter.clone();
        let inv = 1.0 / (self.count as f64 - 1.0);
        for v in s.data_mut() {
            *v *= inv;
        }
        Ok(s)
    }

    /// Population covariance `M/n` (no Bessel correction).
    pub fn covariance_population(&self) -> Result<Matrix> {
        if self.count < 1 {
            return Err(Error::CountTooSmall {
                need: 1,
                have: self.count,
            });
        }
        let mut s = self.scatter.clone();
        let inv = 1.0 / self.count as f64;
        for v in s.data_mut() {
            *v *= inv;
        }
        Ok(s)
    }

    /// Rank-k update with the default minus branch and prior-mean form.
    pub fn update(&self, y: &DataMatrix) -> Result<Self> {
        let kf = make_k_update(self, y, Branch::Minus, KForm::PriorMean)?;
        apply_rank_k(self, &kf, y)
    }

    /// Rank-k downdate with the default minus branch. Removal down to a
    /// single observation is legal; use [`CovarianceState::mixed`] to empty
    /// the state completely.
    pub fn downdate(&self, y: &DataMatrix) -> Result<Self> {
        let kf = make_k_downdate(self, y, Branch::Minus)?;
        apply_rank_k(self, &kf, y)
    }

    /// Simultaneous add/remove with the default (smaller-magnitude) root.
    pub fn mixed(&self, add: &DataMatrix, remove: &DataMatrix) -> Result<Self> {
        mixed_update_downdate(self, add, remove, Root::Minus)
    }
}

/// The m×k factor realizing a covariance modification as `M ± K·Kᵀ`.
#[derive(Debug, Clone)]
pub struct KFactor {
    matrix: Matrix,
    sign: i8,
    branch: Branch,
    y_mean: Vec<f64>,
}

impl KFactor {
    /// Number of observations entering or leaving.
    pub fn k(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// +1 for an update, -1 for a downdate.
    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    /// `K·Kᵀ`, identical for both branch choices.
    pub fn outer_product(&self) -> Matrix {
        let m = self.matrix.rows();
        let mut out = vec![0.0; m * m];
        for j in 0..self.k() {
            syrk_lower_acc(&mut out, m, self.matrix.col(j), false);
        }
        mirror_lower(&mut out, m);
        Matrix::from_vec(m, m, out)
    }
}

/// Coefficient `c` of the mixed update/downdate, satisfying
/// `(n2-n1)c² - 2·n2·c + n2 = 0` (or exactly 1/2 when `n1 = n2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedCoefficient {
    pub c: f64,
    pub root: RootKind,
    pub n1: usize,
    pub n2: usize,
}

impl MixedCoefficient {
    /// Residual of the defining quadratic, relative to `n2`.
    pub fn residual(&self) -> f64 {
        let (n1, n2, c) = (self.n1 as f64, self.n2 as f64, self.c);
        let r = (n2 - n1) * c * c - 2.0 * n2 * c + n2;
        if n2 == 0.0 {
            r.abs()
        } else {
            r.abs() / n2
        }
    }
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Folds `k` new observations into a running mean.
pub fn mean_update(state: &MeanState, y: &DataMatrix) -> Result<MeanState> {
    check_rows(state.dim(), y)?;
    let ybar = column_mean_kernel(y.data(), y.rows(), y.cols());
    let mean = combine_mean_kernel(state.count, &state.mean, y.cols(), &ybar, true);
    Ok(MeanState {
        count: state.count + y.cols(),
        mean,
    })
}

/// Removes `k` observations from a running mean. Removing everything resets
/// to the canonical empty state.
pub fn mean_downdate(state: &MeanState, y: &DataMatrix) -> Result<MeanState> {
    check_rows(state.dim(), y)?;
    let k = y.cols();
    if k > state.count {
        return Err(Error::RemoveTooMany {
            remove: k,
            have: state.count,
        });
    }
    let ybar = column_mean_kernel(y.data(), y.rows(), y.cols());
    let mean = combine_mean_kernel(state.count, &state.mean, k, &ybar, false);
    Ok(MeanState {
        count: state.count - k,
        mean,
    })
}

/// Builds the K factor removing the columns of `y`: the downdated scatter is
/// `M - K·Kᵀ`. Requires `k <= n-1` so the coefficient stays defined.
pub fn make_k_downdate(state: &CovarianceState, y: &DataMatrix, branch: Branch) -> Result<KFactor> {
    check_rows(state.dim(), y)?;
    let m = state.dim();
    let parts = k_factor_kernel(
        &state.mean,
        state.count,
        y.data(),
        m,
        y.cols(),
        false,
        branch == Branch::Plus,
        false,
    )?;
    Ok(KFactor {
        matrix: Matrix::from_vec(m, y.cols(), parts.kmat),
        sign: -1,
        branch,
        y_mean: parts.y_mean.iter().map(|v| v.to_f64()).collect(),
    })
}

/// Builds the K factor appending the columns of `y`: the updated scatter is
/// `M + K·Kᵀ`. Both forms produce the same `K·Kᵀ`; the posterior-mean form
/// needs a nonempty prior.
pub fn make_k_update(
    state: &CovarianceState,
    y: &DataMatrix,
    branch: Branch,
    form: KForm,
) -> Result<KFactor> {
    check_rows(state.dim(), y)?;
    let m = state.dim();
    let parts = k_factor_kernel(
        &state.mean,
        state.count,
        y.data(),
        m,
        y.cols(),
        true,
        branch == Branch::Plus,
        form == KForm::PosteriorMean,
    )?;
    Ok(KFactor {
        matrix: Matrix::from_vec(m, y.cols(), parts.kmat),
        sign: 1,
        branch,
        y_mean: parts.y_mean.iter().map(|v| v.to_f64()).collect(),
    })
}

/// Applies a prepared K factor: `M' = M + sign·K·Kᵀ` with the mean and count
/// carried along. `kf` must have been built from `(state, y)`.
pub fn apply_rank_k(state: &CovarianceState, kf: &KFactor, y: &DataMatrix) -> Result<CovarianceState> {
    check_rows(state.dim(), y)?;
    if kf.matrix.rows() != state.dim() || kf.k() != y.cols() {
        return Err(Error::DimensionMismatch {
            expected: y.cols(),
            got: kf.k(),
        });
    }
    let mut count = state.count;
    let mut mean = state.mean.clone();
    let mut scatter = state.scatter.clone();
    apply_rank_k_kernel(
        &mut count,
        &mut mean,
        scatter.data_mut(),
        state.dim(),
        kf.matrix.data(),
        kf.k(),
        &kf.y_mean,
        kf.sign > 0,
    )?;
    Ok(CovarianceState {
        count,
        mean,
        scatter,
    })
}

/// Downdate through the asymmetric two-mean factorization
/// `M' = M - (Y - x̄₁1ᵀ)(Y - x̄₂1ᵀ)ᵀ`, the matrix generalization of the
/// scalar single-pass covariance removal. Requires `1 <= k <= n-1`.
pub fn downdate_asymmetric(state: &CovarianceState, y: &DataMatrix) -> Result<CovarianceState> {
    check_rows(state.dim(), y)?;
    let k = y.cols();
    if k >= state.count {
        return Err(Error::RemoveTooMany {
            remove: k,
            have: state.count,
        });
    }
    let m = state.dim();
    let ybar = y.mean_column();
    let x2 = combine_mean_kernel(state.count, &state.mean, k, &ybar, false);
    let new_count = state.count - k;

    let pre_frob = frobenius_f64(state.scatter.data());
    let mut scatter = state.scatter.clone();
    accumulate_two_mean_product(scatter.data_mut(), m, y.data(), k, &state.mean, &x2, true);
    scatter.symmetrize();
    clamp_degenerate(scatter.data_mut(), new_count, pre_frob);

    Ok(CovarianceState {
        count: new_count,
        mean: x2,
        scatter,
    })
}

/// The coefficient of the single-center mixed update/downdate. `n1` and `n2`
/// are the sample sizes before and after; equal sizes force `c = 1/2`.
pub fn mixed_coefficient(n1: usize, n2: usize, root: Root) -> MixedCoefficient {
    let (c, kind) = mixed_coefficient_kernel::<f64>(n1, n2, root == Root::Plus);
    MixedCoefficient {
        c,
        root: kind,
        n1,
        n2,
    }
}

/// Single-pass mixed update/downdate: `M' = M + K_u·K_uᵀ - K_d·K_dᵀ` with
/// both factors centered on `z = x̄₁ + c(x̄₂ - x̄₁)`.
pub fn mixed_update_downdate(
    state: &CovarianceState,
    y_add: &DataMatrix,
    y_remove: &DataMatrix,
    root: Root,
) -> Result<CovarianceState> {
    check_rows(state.dim(), y_add)?;
    check_rows(state.dim(), y_remove)?;
    let m = state.dim();
    let mut count = state.count;
    let mut mean = state.mean.clone();
    let mut scatter = state.scatter.clone();
    mixed_kernel(
        &mut count,
        &mut mean,
        scatter.data_mut(),
        m,
        y_add.data(),
        y_add.cols(),
        y_remove.data(),
        y_remove.cols(),
        root == Root::Plus,
    )?;
    Ok(CovarianceState {
        count,
        mean,
        scatter,
    })
}

/// Mixed update/downdate through the two-mean factorization
/// `M' = M + (Y_u - x̄₁1ᵀ)(Y_u - x̄₂1ᵀ)ᵀ - (Y_d - x̄₁1ᵀ)(Y_d - x̄₂1ᵀ)ᵀ`.
/// Same state transition as [`mixed_update_downdate`]; kept as the
/// cross-validation path and for callers that do not need the K factors.
pub fn mixed_two_mean(
    state: &CovarianceState,
    y_add: &DataMatrix,
    y_remove: &DataMatrix,
) -> Result<CovarianceState> {
    check_rows(state.dim(), y_add)?;
    check_rows(state.dim(), y_remove)?;
    let (ku, kd) = (y_add.cols(), y_remove.cols());
    if kd > state.count {
        return Err(Error::RemoveTooMany {
            remove: kd,
            have: state.count,
        });
    }
    let m = state.dim();
    let n2 = state.count + ku - kd;

    let yu_bar = column_mean_kernel(y_add.data(), m, ku);
    let yd_bar = column_mean_kernel(y_remove.data(), m, kd);
    let xu = combine_mean_kernel(state.count, &state.mean, ku, &yu_bar, true);
    let x2 = combine_mean_kernel(state.count + ku, &xu, kd, &yd_bar, false);

    let pre_frob = frobenius_f64(state.scatter.data());
    let mut scatter = state.scatter.clone();
    accumulate_two_mean_product(scatter.data_mut(), m, y_add.data(), ku, &state.mean, &x2, false);
    accumulate_two_mean_product(scatter.data_mut(), m, y_remove.data(), kd, &state.mean, &x2, true);
    scatter.symmetrize();
    clamp_degenerate(scatter.data_mut(), n2, pre_frob);

    Ok(CovarianceState {
        count: n2,
        mean: x2,
        scatter,
    })
}

fn check_rows(m: usize, y: &DataMatrix) -> Result<()> {
    if y.rows() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: y.rows(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Generic kernels. Instantiated with f64 by the public API above and with the
// counting scalar by crate::counts, so measured operation counts come from
// the exact production arithmetic.
// ---------------------------------------------------------------------------

pub(crate) fn column_mean_kernel<S: Scalar>(data: &[S], m: usize, n: usize) -> Vec<S> {
    let mut mean = vec![S::zero(); m];
    if n == 0 {
        return mean;
    }
    for j in 0..n {
        let col = &data[j * m..(j + 1) * m];
        for i in 0..m {
            mean[i] += col[i];
        }
    }
    let denom = S::from_f64(n as f64);
    for v in mean.iter_mut() {
        *v = *v / denom;
    }
    mean
}

/// `(n·mean ± k·ybar)/(n ± k)`; canonical zeros when the result is empty.
pub(crate) fn combine_mean_kernel<S: Scalar>(
    n: usize,
    mean: &[S],
    k: usize,
    ybar: &[S],
    add: bool,
) -> Vec<S> {
    let m = mean.len();
    let new_count = if add { n + k } else { n - k };
    if new_count == 0 {
        return vec![S::zero(); m];
    }
    if k == 0 {
        return mean.to_vec();
    }
    if n == 0 {
        return ybar.to_vec();
    }
    let nf = S::from_f64(n as f64);
    let kf = S::from_f64(k as f64);
    let cf = S::from_f64(new_count as f64);
    (0..m)
        .map(|i| {
            let num = if add {
                nf * mean[i] + kf * ybar[i]
            } else {
                nf * mean[i] - kf * ybar[i]
            };
            num / cf
        })
        .collect()
}

/// Naive two-pass mean + centered scatter; also the recompute baseline the
/// incremental operations are benchmarked against.
pub(crate) fn from_columns_kernel<S: Scalar>(data: &[S], m: usize, n: usize) -> (Vec<S>, Vec<S>) {
    let mean = column_mean_kernel(data, m, n);
    let mut scatter = vec![S::zero(); m * m];
    let mut diff = vec![S::zero(); m];
    for j in 0..n {
        let col = &data[j * m..(j + 1) * m];
        for i in 0..m {
            diff[i] = col[i] - mean[i];
        }
        syrk_lower_acc(&mut scatter, m, &diff, false);
    }
    mirror_lower(&mut scatter, m);
    (mean, scatter)
}

/// Accumulates `±w·wᵀ` onto the lower triangle of `scatter`.
pub(crate) fn syrk_lower_acc<S: Scalar>(scatter: &mut [S], m: usize, w: &[S], subtract: bool) {
    for j in 0..m {
        let wj = w[j];
        let base = j * m;
        if subtract {
            for i in j..m {
                scatter[base + i] -= w[i] * wj;
            }
        } else {
            for i in j..m {
                scatter[base + i] += w[i] * wj;
            }
        }
    }
}

/// Copies the lower triangle onto the upper, making symmetry exact.
pub(crate) fn mirror_lower<S: Scalar>(scatter: &mut [S], m: usize) {
    for j in 0..m {
        for i in (j + 1)..m {
            scatter[i * m + j] = scatter[j * m + i];
        }
    }
}

pub(crate) struct KParts<S> {
    pub kmat: Vec<S>,
    pub y_mean: Vec<S>,
}

/// Forms `K = Y - z·1ᵀ` with `z = ȳ ± √(n/(n±k))(ȳ - x̄₁)` (prior form) or
/// `z = ȳ ± √((n+k)/n)(ȳ - x̄₂)` (posterior form, updates only).
#[allow(clippy::too_many_arguments)]
pub(crate) fn k_factor_kernel<S: Scalar>(
    x_mean: &[S],
    count: usize,
    y: &[S],
    m: usize,
    k: usize,
    update: bool,
    branch_plus: bool,
    posterior_form: bool,
) -> Result<KParts<S>> {
    let ybar = column_mean_kernel(y, m, k);
    if k == 0 {
        return Ok(KParts {
            kmat: Vec::new(),
            y_mean: ybar,
        });
    }
    if !update && k >= count {
        return Err(Error::RemoveTooMany {
            remove: k,
            have: count,
        });
    }
    let z = if posterior_form {
        if count == 0 {
            return Err(Error::DegenerateForm);
        }
        let x2 = combine_mean_kernel(count, x_mean, k, &ybar, true);
        let c = (S::from_f64((count + k) as f64) / S::from_f64(count as f64)).sqrt();
        k_shift(&ybar, &x2, c, branch_plus)
    } else {
        let denom = if update { count + k } else { count - k };
        let c = (S::from_f64(count as f64) / S::from_f64(denom as f64)).sqrt();
        k_shift(&ybar, x_mean, c, branch_plus)
    };
    let mut kmat = vec![S::zero(); m * k];
    for j in 0..k {
        let col = &y[j * m..(j + 1) * m];
        let out = &mut kmat[j * m..(j + 1) * m];
        for i in 0..m {
            out[i] = col[i] - z[i];
        }
    }
    Ok(KParts {
        kmat,
        y_mean: ybar,
    })
}

/// `z = ȳ ± c·(ȳ - center)`.
fn k_shift<S: Scalar>(ybar: &[S], center: &[S], c: S, plus: bool) -> Vec<S> {
    ybar.iter()
        .zip(center)
        .map(|(&y, &x)| {
            if plus {
                y + c * (y - x)
            } else {
                y - c * (y - x)
            }
        })
        .collect()
}

/// `M ± K·Kᵀ` plus the mean/count transition. A downdate landing on
/// `count <= 1` clamps round-off residue to zero (threshold relative to the
/// pre-edit scatter norm).
#[allow(clippy::too_many_arguments)]
pub(crate) fn apply_rank_k_kernel<S: Scalar>(
    count: &mut usize,
    mean: &mut Vec<S>,
    scatter: &mut [S],
    m: usize,
    kmat: &[S],
    k: usize,
    y_mean: &[S],
    update: bool,
) -> Result<()> {
    if !update && k > *count {
        return Err(Error::RemoveTooMany {
            remove: k,
            have: *count,
        });
    }
    let new_count = if update { *count + k } else { *count - k };
    let pre_frob = if !update && new_count <= 1 {
        frobenius_f64(scatter)
    } else {
        0.0
    };
    for j in 0..k {
        syrk_lower_acc(scatter, m, &kmat[j * m..(j + 1) * m], !update);
    }
    mirror_lower(scatter, m);
    let ybar_s: Vec<S> = y_mean.to_vec();
    *mean = combine_mean_kernel(*count, mean, k, &ybar_s, update);
    *count = new_count;
    if !update {
        clamp_degenerate(scatter, new_count, pre_frob);
    }
    Ok(())
}

/// Full mixed update/downdate on raw state parts.
#[allow(clippy::too_many_arguments)]
pub(crate) fn mixed_kernel<S: Scalar>(
    count: &mut usize,
    mean: &mut Vec<S>,
    scatter: &mut [S],
    m: usize,
    y_add: &[S],
    ku: usize,
    y_remove: &[S],
    kd: usize,
    root_plus: bool,
) -> Result<()> {
    let n1 = *count;
    if kd > n1 {
        return Err(Error::RemoveTooMany {
            remove: kd,
            have: n1,
        });
    }
    let n2 = n1 + ku - kd;
    let yu_bar = column_mean_kernel(y_add, m, ku);
    let yd_bar = column_mean_kernel(y_remove, m, kd);
    let xu = combine_mean_kernel(n1, mean, ku, &yu_bar, true);
    let x2 = combine_mean_kernel(n1 + ku, &xu, kd, &yd_bar, false);
    let (c, _) = mixed_coefficient_kernel::<S>(n1, n2, root_plus);
    // z = x̄₁ + c(x̄₂ - x̄₁); the K_u and K_d columns share this single center
    let z: Vec<S> = mean
        .iter()
        .zip(&x2)
        .map(|(&a, &b)| a + c * (b - a))
        .collect();

    let pre_frob = if n2 <= 1 { frobenius_f64(scatter) } else { 0.0 };
    let mut w = vec![S::zero(); m];
    for j in 0..ku {
        let col = &y_add[j * m..(j + 1) * m];
        for i in 0..m {
            w[i] = col[i] - z[i];
        }
        syrk_lower_acc(scatter, m, &w, false);
    }
    for j in 0..kd {
        let col = &y_remove[j * m..(j + 1) * m];
        for i in 0..m {
            w[i] = col[i] - z[i];
        }
        syrk_lower_acc(scatter, m, &w, true);
    }
    mirror_lower(scatter, m);
    clamp_degenerate(scatter, n2, pre_frob);

    *mean = x2;
    *count = n2;
    Ok(())
}

/// `c = (n2 ± √(n1·n2))/(n2 - n1)`, or exactly 1/2 when `n1 = n2`.
pub(crate) fn mixed_coefficient_kernel<S: Scalar>(
    n1: usize,
    n2: usize,
    root_plus: bool,
) -> (S, RootKind) {
    if n1 == n2 {
        return (S::from_f64(0.5), RootKind::Half);
    }
    let n1f = S::from_f64(n1 as f64);
    let n2f = S::from_f64(n2 as f64);
    let s = (n1f * n2f).sqrt();
    let num = if root_plus { n2f + s } else { n2f - s };
    let kind = if root_plus {
        RootKind::Plus
    } else {
        RootKind::Minus
    };
    (num / (n2f - n1f), kind)
}

/// Accumulates `±(Y - a·1ᵀ)(Y - b·1ᵀ)ᵀ` (a full, generally asymmetric
/// product) onto `out`.
fn accumulate_two_mean_product(
    out: &mut [f64],
    m: usize,
    y: &[f64],
    k: usize,
    a: &[f64],
    b: &[f64],
    subtract: bool,
) {
    let mut left = vec![0.0; m];
    let mut right = vec![0.0; m];
    for col_idx in 0..k {
        let col = &y[col_idx * m..(col_idx + 1) * m];
        for i in 0..m {
            left[i] = col[i] - a[i];
            right[i] = col[i] - b[i];
        }
        for j in 0..m {
            let rj = right[j];
            let base = j * m;
            if subtract {
                for i in 0..m {
                    out[base + i] -= left[i] * rj;
                }
            } else {
                for i in 0..m {
                    out[base + i] += left[i] * rj;
                }
            }
        }
    }
}

/// Zeroes round-off residue after an edit that empties the sample down to
/// one or zero observations.
fn clamp_degenerate<S: Scalar>(scatter: &mut [S], new_count: usize, pre_frob: f64) {
    if new_count > 1 {
        return;
    }
    let thr = 1e-14 * pre_frob;
    for v in scatter.iter_mut() {
        if v.to_f64().abs() < thr {
            *v = S::zero();
        }
    }
}

pub(crate) fn frobenius_f64<S: Scalar>(v: &[S]) -> f64 {
    v.iter()
        .map(|x| {
            let f = x.to_f64();
            f * f
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::rel_frobenius_diff;

    fn dm(rows: usize, vals: &[f64]) -> DataMatrix {
        DataMatrix::new(rows, vals.len() / rows, vals.to_vec()).unwrap()
    }

    #[test]
    fn from_columns_matches_hand_sum() {
        let st = CovarianceState::from_columns(&dm(1, &[0.0, 2.0, 4.0]));
        assert_eq!(st.count(), 3);
        assert_eq!(st.mean(), &[2.0]);
        assert_eq!(st.scatter()[(0, 0)], 8.0);
        assert_eq!(st.covariance().unwrap()[(0, 0)], 4.0);
    }

    #[test]
    fn from_columns_empty_and_single() {
        let st = CovarianceState::from_columns(&DataMatrix::empty(2));
        assert_eq!(st.count(), 0);
        assert_eq!(st.mean(), &[0.0, 0.0]);
        assert_eq!(st.scatter().frobenius_norm(), 0.0);

        let st = CovarianceState::from_columns(&dm(1, &[7.0]));
        assert_eq!(st.count(), 1);
        assert_eq!(st.mean(), &[7.0]);
        assert_eq!(st.scatter()[(0, 0)], 0.0);
    }

    #[test]
    fn covariance_needs_two_observations() {
        let st = CovarianceState::from_columns(&dm(1, &[7.0]));
        assert_eq!(
            st.covariance().unwrap_err(),
            Error::CountTooSmall { need: 2, have: 1 }
        );
        let st2 = CovarianceState::from_columns(&dm(2, &[1.0, 2.0, 1.0, 2.0]));
        let cov = st2.covariance().unwrap();
        assert_eq!(cov.frobenius_norm(), 0.0);
    }

    #[test]
    fn mean_update_examples() {
        let st = MeanState::new(2, vec![2.0]);
        let up = mean_update(&st, &dm(1, &[8.0])).unwrap();
        assert_eq!(up.count(), 3);
        assert_eq!(up.mean(), &[4.0]);

        let same = mean_update(&st, &DataMatrix::empty(1)).unwrap();
        assert_eq!(same, st);

        let empty = MeanState::empty(2);
        let y = dm(2, &[1.0, 2.0, 3.0, 4.0]);
        let filled = mean_update(&empty, &y).unwrap();
        assert_eq!(filled.count(), 2);
        assert_eq!(filled.mean(), &[2.0, 3.0]);
    }

    #[test]
    fn mean_downdate_examples() {
        let st = MeanState::new(3, vec![4.0]);
        let dn = mean_downdate(&st, &dm(1, &[8.0])).unwrap();
        assert_eq!(dn.count(), 2);
        assert_eq!(dn.mean(), &[2.0]);

        let all = mean_downdate(&dn, &dm(1, &[1.0, 3.0])).unwrap();
        assert_eq!(all.count(), 0);
        assert_eq!(all.mean(), &[0.0]);

        let err = mean_downdate(&st, &dm(1, &[1.0, 2.0, 3.0, 4.0])).unwrap_err();
        assert_eq!(err, Error::RemoveTooMany { remove: 4, have: 3 });
    }

    #[test]
    fn make_k_downdate_scalar_example() {
        let st = CovarianceState::from_columns(&dm(1, &[0.0, 2.0, 4.0]));
        let y = dm(1, &[4.0]);
        let kf = make_k_downdate(&st, &y, Branch::Minus).unwrap();
        assert!((kf.matrix()[(0, 0)] - 6.0f64.sqrt()).abs() < 1e-14);
        assert_eq!(kf.sign(), -1);

        let st2 = apply_rank_k(&st, &kf, &y).unwrap();
        assert_eq!(st2.count(), 2);
        assert!((st2.scatter()[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((st2.mean()[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn make_k_downdate_rejects_full_removal() {
        let st = CovarianceState::from_columns(&dm(1, &[0.0, 2.0, 4.0]));
        let err = make_k_downdate(&st, &dm(1, &[0.0, 2.0, 4.0]), Branch::Minus).unwrap_err();
        assert_eq!(err, Error::RemoveTooMany { remove: 3, have: 3 });
    }

    #[test]
    fn make_k_vanishing_shift_when_means_agree() {
        // ȳ = x̄₁ makes the ± term vanish for every branch and form
        let st = CovarianceState::from_columns(&dm(1, &[0.0, 4.0]));
        let y = dm(1, &[1.0, 3.0]); // ȳ = 2 = x̄₁
        for branch in [Branch::Plus, Branch::Minus] {
            let kd = make_k_downdate(&st, &y, branch);
            // k = n here, so the downdate factor is rejected; use update forms
            assert!(kd.is_err());
            for form in [KForm::PriorMean, KForm::PosteriorMean] {
                let kf = make_k_update(&st, &y, branch, form).unwrap();
                assert!((kf.matrix()[(0, 0)] - (-1.0)).abs() < 1e-14);
                assert!((kf.matrix()[(0, 1)] - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn make_k_update_scalar_example() {
        let st = CovarianceState::from_columns(&dm(1, &[0.0, 2.0]));
        let y = dm(1, &[4.0]);
        let kf = make_k_update(&st, &y, Branch::Minus, KForm::PriorMean).unwrap();
        assert!((kf.matrix()[(0, 0)] - 6.0f64.sqrt()).abs() < 1e-14);

        let st2 = apply_rank_k(&st, &kf, &y).unwrap();
        assert_eq!(st2.count(), 3);
        assert!((st2.scatter()[(0, 0)] - 8.0).abs() < 1e-12);
        assert!((st2.covariance().unwrap()[(0, 0)] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn make_k_update_empty_prior_is_plain_centering() {
        let st = CovarianceState::empty(1);
        let y = dm(1, &[1.0, 3.0]);
        let kf = make_k_update(&st, &y, Branch::Minus, KForm::PriorMean).unwrap();
        assert_eq!(kf.matrix()[(0, 0)], -1.0);
        assert_eq!(kf.matrix()[(0, 1)], 1.0);

        let st2 = apply_rank_k(&st, &kf, &y).unwrap();
        let direct = CovarianceState::from_columns(&y);
        assert!(rel_frobenius_diff(st2.scatter(), direct.scatter()) < 1e-15);
    }

    #[test]
    fn posterior_form_rejects_empty_prior() {
        let st = CovarianceState::empty(1);
        let err =
            make_k_update(&st, &dm(1, &[4.0]), Branch::Minus, KForm::PosteriorMean).unwrap_err();
        assert_eq!(err, Error::DegenerateForm);
    }

    #[test]
    fn branch_and_form_choices_share_outer_product() {
        let x = dm(2, &[0.1, -0.4, 1.2, 0.9, -0.7, 0.3, 0.5, 0.8]);
        let st = CovarianceState::from_columns(&x);
        let y = dm(2, &[2.0, -1.0, 0.25, 0.75]);
        let reference = make_k_update(&st, &y, Branch::Minus, KForm::PriorMean)
            .unwrap()
            .outer_product();
        for branch in [Branch::Plus, Branch::Minus] {
            for form in [KForm::PriorMean, KForm::PosteriorMean] {
                let kk = make_k_update(&st, &y, branch, form).unwrap().outer_product();
                assert!(rel_frobenius_diff(&kk, &reference) < 1e-12);
            }
        }
    }

    #[test]
    fn apply_rank_k_with_empty_factor_is_identity() {
        let st = CovarianceState::from_columns(&dm(1, &[0.0, 2.0, 4.0]));
        let y = DataMatrix::empty(1);
        let kf = make_k_update(&st, &y, Branch::Minus, KForm::PriorMean).unwrap();
        let st2 = apply_rank_k(&st, &kf, &y).unwrap();
        assert_eq!(st2, st);
    }

    #[test]
    fn update_then_downdate_round_trips() {
        let x = dm(2, &[0.0, 1.0, 2.0, -1.0, 0.5, 0.25, -0.75, 2.0]);
        let st = CovarianceState::from_columns(&x);
        let y = dm(2, &[3.0, -2.0, 0.125, 0.5]);
        let round = st.update(&y).unwrap().downdate(&y).unwrap();
        assert_eq!(round.count(), st.count());
        assert!(rel_frobenius_diff(round.scatter(), st.scatter()) < 1e-10);
        assert!(crate::matrix::rel_l2_diff(round.mean(), st.mean()) < 1e-12);
    }

    #[test]
    fn downdate_to_single_observation_zeroes_scatter() {
        let st = CovarianceState::from_columns(&dm(1, &[0.0, 2.0, 4.0]));
        let st2 = st.downdate(&dm(1, &[0.0, 4.0])).unwrap();
        assert_eq!(st2.count(), 1);
        assert_eq!(st2.scatter()[(0, 0)], 0.0);
        assert!((st2.mean()[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn downdate_asymmetric_matches_rank_k() {
        let st = CovarianceState::from_columns(&dm(1, &[0.0, 2.0, 4.0]));
        let y = dm(1, &[4.0]);
        let a = downdate_asymmetric(&st, &y).unwrap();
        let b = st.downdate(&y).unwrap();
        assert!((a.scatter()[(0, 0)] - 2.0).abs() < 1e-12);
        assert!(rel_frobenius_diff(a.scatter(), b.scatter()) < 1e-12);
        assert_eq!(a.count(), b.count());
    }

    #[test]
    fn downdate_asymmetric_mean_column_is_noop() {
        let x = dm(2, &[1.0, 2.0, 3.0, 4.0, 2.0, 3.0]);
        let st = CovarianceState::from_columns(&x);
        // removing a column equal to the current mean leaves both means equal
        let y = DataMatrix::new(2, 1, st.mean().to_vec()).unwrap();
        let st2 = downdate_asymmetric(&st, &y).unwrap();
        assert!(rel_frobenius_diff(st2.scatter(), st.scatter()) < 1e-15);
    }

    #[test]
    fn single_pass_scalar_form_on_pairs() {
        // rank-1 update: M' - M = ((n2-1)/n2) (y - x̄₁)(y - x̄₁)ᵀ
        let x = dm(2, &[1.0, 10.0, 2.0, 14.0, 4.0, 11.0, 3.5, 13.0]);
        let st = CovarianceState::from_columns(&x);
        let y = dm(2, &[5.0, 9.0]);
        let st2 = mixed_two_mean(&st, &y, &DataMatrix::empty(2)).unwrap();
        let n2 = st2.count() as f64;
        let du = y.col(0)[0] - st.mean()[0];
        let dv = y.col(0)[1] - st.mean()[1];
        let expect = (n2 - 1.0) / n2 * du * dv;
        let got = st2.scatter()[(0, 1)] - st.scatter()[(0, 1)];
        assert!((got - expect).abs() < 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn mixed_coefficient_roots() {
        let c_plus = mixed_coefficient(2, 3, Root::Plus);
        let c_minus = mixed_coefficient(2, 3, Root::Minus);
        assert!((c_plus.c - (3.0 + 6.0f64.sqrt())).abs() < 1e-12);
        assert!((c_minus.c - (3.0 - 6.0f64.sqrt())).abs() < 1e-12);
        assert_eq!(c_plus.root, RootKind::Plus);
        assert!(c_plus.residual() < 1e-12);
        assert!(c_minus.residual() < 1e-12);

        let half = mixed_coefficient(5, 5, Root::Plus);
        assert_eq!(half.c, 0.5);
        assert_eq!(half.root, RootKind::Half);
    }

    #[test]
    fn mixed_update_downdate_example() {
        let st = CovarianceState::from_columns(&dm(1, &[0.0, 2.0, 4.0]));
        let st2 = st.mixed(&dm(1, &[6.0]), &dm(1, &[0.0])).unwrap();
        assert_eq!(st2.count(), 3);
        assert!((st2.mean()[0] - 4.0).abs() < 1e-14);
        assert!((st2.scatter()[(0, 0)] - 8.0).abs() < 1e-12);
        assert!((st2.covariance().unwrap()[(0, 0)] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_with_empty_add_matches_downdate() {
        let x = dm(2, &[0.0, 1.0, 2.0, -1.0, 0.5, 0.25, -0.75, 2.0, 1.5, 0.5]);
        let st = CovarianceState::from_columns(&x);
        let y = dm(2, &[2.0, -1.0]);
        let via_mixed = st.mixed(&DataMatrix::empty(2), &y).unwrap();
        let via_downdate = st.downdate(&y).unwrap();
        assert!(rel_frobenius_diff(via_mixed.scatter(), via_downdate.scatter()) < 1e-12);
        assert!(crate::matrix::rel_l2_diff(via_mixed.mean(), via_downdate.mean()) < 1e-12);
    }

    #[test]
    fn mixed_add_equals_remove_is_identity() {
        let x = dm(1, &[0.0, 2.0, 4.0]);
        let st = CovarianceState::from_columns(&x);
        let y = dm(1, &[2.5]);
        let st2 = st.mixed(&y, &y).unwrap();
        assert_eq!(st2.count(), st.count());
        assert!(rel_frobenius_diff(st2.scatter(), st.scatter()) < 1e-11);
    }

    #[test]
    fn mixed_roots_agree() {
        let x = dm(2, &[0.0, 1.0, 2.0, -1.0, 0.5, 0.25, -0.75, 2.0, 1.5, 0.5]);
        let st = CovarianceState::from_columns(&x);
        let add = dm(2, &[3.0, 1.0, -2.0, 0.5]);
        let rem = dm(2, &[0.0, 1.0]);
        let a = mixed_update_downdate(&st, &add, &rem, Root::Plus).unwrap();
        let b = mixed_update_downdate(&st, &add, &rem, Root::Minus).unwrap();
        assert!(rel_frobenius_diff(a.scatter(), b.scatter()) < 1e-11);
    }

    #[test]
    fn mixed_two_mean_agrees_with_single_center() {
        let x = dm(3, &[0.0, 1.0, 2.0, -1.0, 0.5, 0.25, -0.75, 2.0, 1.5, 0.5, 0.1, -0.3]);
        let st = CovarianceState::from_columns(&x);
        let add = dm(3, &[3.0, 1.0, -2.0]);
        let rem = dm(3, &[0.0, 1.0, 2.0]);
        let a = mixed_two_mean(&st, &add, &rem).unwrap();
        let b = st.mixed(&add, &rem).unwrap();
        assert!(rel_frobenius_diff(a.scatter(), b.scatter()) < 1e-12);
        assert_eq!(a.count(), b.count());
    }

    #[test]
    fn mixed_to_empty_resets_state() {
        let x = dm(1, &[1.0, 3.0]);
        let st = CovarianceState::from_columns(&x);
        let st2 = st.mixed(&DataMatrix::empty(1), &x).unwrap();
        assert_eq!(st2.count(), 0);
        assert_eq!(st2.mean(), &[0.0]);
        assert_eq!(st2.scatter()[(0, 0)], 0.0);
    }

    #[test]
    fn scatter_stays_exactly_symmetric() {
        let x = dm(3, &[0.3, -1.0, 0.7, 1.1, 0.2, -0.5, -0.9, 0.4, 1.3, 0.6, -0.2, 0.8]);
        let mut st = CovarianceState::from_columns(&x);
        assert!(st.scatter().is_symmetric_exact());
        let y = dm(3, &[0.25, -0.5, 1.0]);
        st = st.update(&y).unwrap();
        assert!(st.scatter().is_symmetric_exact());
        st = downdate_asymmetric(&st, &y).unwrap();
        assert!(st.scatter().is_symmetric_exact());
        st = st.mixed(&y, &dm(3, &[0.3, -1.0, 0.7])).unwrap();
        assert!(st.scatter().is_symmetric_exact());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let st = CovarianceState::from_columns(&dm(2, &[0.0, 1.0, 1.0, 0.0]));
        let bad = dm(3, &[1.0, 2.0, 3.0]);
        assert_eq!(st.update(&bad).unwrap_err().name(), "DimensionMismatch");
        assert_eq!(
            mean_update(&st.mean_state(), &bad).unwrap_err().name(),
            "DimensionMismatch"
        );
    }
}
