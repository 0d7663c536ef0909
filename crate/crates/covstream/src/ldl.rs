//! LDL factorization of SPD matrices and its rank-k maintenance.
//!
//! [`LdlState`] carries unit-lower-triangular `L` and diagonal `D` with
//! `L·diag(D)·Lᵀ = S`, the sample covariance itself. The modification
//! operations transiently rescale `D` by `(n-1)` so each edit is a pure
//! rank-1 pass per incoming or outgoing observation: one column of
//! `K = Y - z·1ᵀ` is materialized at a time and folded into the factors by
//! the one-pass recurrence
//!
//! ```text
//! γ = wᵢ/(α·dᵢ + wᵢ²),  dᵢ ← dᵢ + wᵢ²/α,  α ← α + wᵢ²/d̃ᵢ
//! w_p ← w_p - wᵢ·ℓ_pᵢ,  ℓ_pᵢ ← ℓ_pᵢ + γ·w_p      (p > i)
//! ```
//!
//! with `α` initialized to +1 for an update pass and -1 for a downdate pass.
//! During a downdate the healthy sign of the γ denominator `α·dᵢ + wᵢ²` is
//! negative (it equals `α` times the new pivot); a non-negative denominator
//! or a non-positive new pivot means positive definiteness is being lost, and
//! the operation aborts with the caller's factors untouched.

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, Matrix};
use crate::moments::{
    column_mean_kernel, combine_mean_kernel, mixed_coefficient_kernel, CovarianceState, Root,
};
use crate::scalar::Scalar;

/// Direction of a factor modification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phi {
    Update,
    Downdate,
}

impl Phi {
    pub fn sign(self) -> f64 {
        match self {
            Phi::Update => 1.0,
            Phi::Downdate => -1.0,
        }
    }
}

/// Count, mean, and LDL factors of the sample covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct LdlState {
    count: usize,
    mean: Vec<f64>,
    l: Matrix,
    d: Vec<f64>,
}

impl LdlState {
    /// Factors the covariance of `state`. Requires at least two observations
    /// and a numerically positive definite covariance.
    pub fn from_covariance(state: &CovarianceState) -> Result<Self> {
        let cov = state.covariance()?;
        let (l, d) = ldl_factor(&cov)?;
        Ok(LdlState {
            count: state.count(),
            mean: state.mean().to_vec(),
            l,
            d,
        })
    }

    pub fn from_raw_parts(count: usize, mean: Vec<f64>, l: Matrix, d: Vec<f64>) -> Result<Self> {
        let m = mean.len();
        if l.rows() != m || l.cols() != m || d.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: l.rows(),
            });
        }
        Ok(LdlState { count, mean, l, d })
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

    /// Unit lower triangular factor.
    pub fn unit_lower(&self) -> &Matrix {
        &self.l
    }

    /// Diagonal of `D`.
    pub fn diagonal(&self) -> &[f64] {
        &self.d
    }

    /// `L·diag(D)·Lᵀ`, the covariance this state represents.
    pub fn reconstruct(&self) -> Matrix {
        let m = self.dim();
        let mut s = Matrix::zeros(m, m);
        for p in 0..m {
            let dp = self.d[p];
            for j in p..m {
                let ljp = if j == p { 1.0 } else { self.l[(j, p)] };
                let t = dp * ljp;
                for i in j..m {
                    let lip = if i == p { 1.0 } else { self.l[(i, p)] };
                    s[(i, j)] += lip * t;
                }
            }
        }
        let data = s.data_mut();
        crate::moments::mirror_lower(data, m);
        s
    }

    /// Rank-k update of the factors (and mean/count) with the observations of
    /// `y` appended.
    pub fn update(&self, y: &DataMatrix) -> Result<Self> {
        ldl_rank_k_modify(self, y, Phi::Update)
    }

    /// Rank-k downdate with the observations of `y` removed. The result must
    /// keep at least two observations.
    pub fn downdate(&self, y: &DataMatrix) -> Result<Self> {
        ldl_rank_k_modify(self, y, Phi::Downdate)
    }

    /// Simultaneous add/remove with the default root.
    pub fn mixed(&self, add: &DataMatrix, remove: &DataMatrix) -> Result<Self> {
        ldl_mixed_modify(self, add, remove, Root::Minus)
    }

    /// Solves `S·x = b` by forward substitution, diagonal scaling, and back
    /// substitution.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: b.len(),
            });
        }
        self.check_nonsingular()?;
        let mut x = b.to_vec();
        solve_kernel(self.l.data(), &self.d, &mut x, self.dim());
        Ok(x)
    }

    /// Squared Mahalanobis distance `(v - x̄)ᵀ S⁻¹ (v - x̄)` of an observation
    /// from the current statistics. Always non-negative.
    pub fn mahalanobis_sq(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        if self.count < 2 {
            return Err(Error::CountTooSmall {
                need: 2,
                have: self.count,
            });
        }
        self.check_nonsingular()?;
        let r: Vec<f64> = v.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let mut x = r.clone();
        solve_kernel(self.l.data(), &self.d, &mut x, self.dim());
        let dist = r.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        Ok(dist.max(0.0))
    }

    fn check_nonsingular(&self) -> Result<()> {
        for (i, &di) in self.d.iter().enumerate() {
            if di <= 0.0 {
                return Err(Error::SingularFactor { index: i, value: di });
            }
        }
        Ok(())
    }
}

/// Plain LDL factorization of a symmetric positive definite matrix.
/// Pivots at or below `1e-13 · max sᵢᵢ` are rejected; near-semidefinite
/// inputs fail loudly instead of producing unstable factors.
pub fn ldl_factor(s: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    if s.rows() != s.cols() {
        return Err(Error::DimensionMismatch {
            expected: s.rows(),
            got: s.cols(),
        });
    }
    let m = s.rows();
    let mut l = vec![0.0f64; m * m];
    let mut d = vec![0.0f64; m];
    ldl_factor_kernel(s.data(), m, &mut l, &mut d)?;
    Ok((Matrix::from_vec(m, m, l), d))
}

/// Rank-1 modification of factors: returns the factors of
/// `L·diag(D)·Lᵀ + φ·w·wᵀ`. The inputs are untouched on error.
pub fn rank1_modify(l: &Matrix, d: &[f64], w: &[f64], phi: Phi) -> Result<(Matrix, Vec<f64>)> {
    let m = d.len();
    if l.rows() != m || l.cols() != m || w.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: w.len(),
        });
    }
    let mut l2 = l.clone();
    let mut d2 = d.to_vec();
    let mut work = w.to_vec();
    rank1_kernel(l2.data_mut(), &mut d2, &mut work, m, phi == Phi::Update)?;
    Ok((l2, d2))
}

/// Rank-k update or downdate of an [`LdlState`], one K column at a time:
/// scale `D` by `(n-1)`, run one rank-1 pass per column of `K = Y - z·1ᵀ`
/// with `z = ȳ - √(n/(n+φk))(ȳ - x̄₁)`, rescale by `1/(n+φk-1)`, and carry
/// the mean and count along.
pub fn ldl_rank_k_modify(state: &LdlState, y: &DataMatrix, phi: Phi) -> Result<LdlState> {
    if y.rows() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: y.rows(),
        });
    }
    let (n, k, m) = (state.count, y.cols(), state.dim());
    if k == 0 {
        return Ok(state.clone());
    }
    if phi == Phi::Downdate && n < k + 2 {
        // the downdated covariance needs at least two remaining observations
        return Err(Error::RemoveTooMany { remove: k, have: n });
    }
    let mut l = state.l.clone();
    let mut d = state.d.clone();
    let mut mean = state.mean.clone();
    let mut count = state.count;
    ldl_rank_k_kernel(
        l.data_mut(),
        &mut d,
        m,
        &mut mean,
        &mut count,
        y.data(),
        k,
        phi == Phi::Update,
    )?;
    Ok(LdlState { count, mean, l, d })
}

/// Mixed rank-k modification: a single `(n1-1)` scaling, `k_u` update passes
/// over the columns of `K_u`, `k_d` downdate passes over the columns of
/// `K_d`, and a final `1/(n2-1)` scaling. Both factors are centered on the
/// mixed-coefficient vector `z`.
pub fn ldl_mixed_modify(
    state: &LdlState,
    y_add: &DataMatrix,
    y_remove: &DataMatrix,
    root: Root,
) -> Result<LdlState> {
    let m = state.dim();
    for y in [y_add, y_remove] {
        if y.rows() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: y.rows(),
            });
        }
    }
    let (n1, ku, kd) = (state.count, y_add.cols(), y_remove.cols());
    if ku == 0 && kd == 0 {
        return Ok(state.clone());
    }
    if kd > n1 || n1 + ku < kd + 2 {
        return Err(Error::RemoveTooMany {
            remove: kd,
            have: n1,
        });
    }
    let mut l = state.l.clone();
    let mut d = state.d.clone();
    let mut mean = state.mean.clone();
    let mut count = state.count;
    ldl_mixed_kernel(
        l.data_mut(),
        &mut d,
        m,
        &mut mean,
        &mut count,
        y_add.data(),
        ku,
        y_remove.data(),
        kd,
        root == Root::Plus,
    )?;
    Ok(LdlState { count, mean, l, d })
}

// ---------------------------------------------------------------------------
// Generic kernels (shared with the instrumented counting path)
// ---------------------------------------------------------------------------

pub(crate) fn ldl_factor_kernel<S: Scalar>(
    s: &[S],
    m: usize,
    l: &mut [S],
    d: &mut [S],
) -> Result<()> {
    let mut max_diag = 0.0f64;
    for i in 0..m {
        max_diag = max_diag.max(s[i * m + i].to_f64().abs());
    }
    let pivot_tol = 1e-13 * max_diag;
    for v in l.iter_mut() {
        *v = S::zero();
    }
    // v[p] = ℓ_jp · d_p scratch for the current row j
    let mut v = vec![S::zero(); m];
    for j in 0..m {
        let mut dj = s[j * m + j];
        for p in 0..j {
            v[p] = l[p * m + j] * d[p];
        }
        for p in 0..j {
            dj -= l[p * m + j] * v[p];
        }
        let pivot = dj.to_f64();
        if !pivot.is_finite() || pivot <= pivot_tol {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        d[j] = dj;
        l[j * m + j] = S::one();
        for i in (j + 1)..m {
            let mut acc = s[j * m + i];
            for p in 0..j {
                acc -= l[p * m + i] * v[p];
            }
            l[j * m + i] = acc / dj;
        }
    }
    Ok(())
}

/// One rank-1 pass of the factor-modification recurrence. `w` is consumed as
/// workspace. Errors leave `l`/`d` partially written; callers operate on a
/// private copy and publish only on success.
pub(crate) fn rank1_kernel<S: Scalar>(
    l: &mut [S],
    d: &mut [S],
    w: &mut [S],
    m: usize,
    update: bool,
) -> Result<()> {
    let mut alpha = if update { S::one() } else { -S::one() };
    for i in 0..m {
        let wi = w[i];
        if wi.is_zero() {
            continue;
        }
        let di = d[i];
        let wi2 = wi * wi;
        let denom = alpha * di + wi2;
        // denom = α·d'ᵢ with α < 0 on a healthy downdate pass; a
        // non-negative value (or NaN) means the new pivot is not positive
        let denom_f = denom.to_f64();
        if !update && (denom_f.is_nan() || denom_f >= 0.0) {
            return Err(Error::LostDefiniteness { index: i });
        }
        let gamma = wi / denom;
        let dnew = di + wi2 / alpha;
        if !dnew.is_finite() || !gamma.is_finite() || (!update && dnew.to_f64() <= 0.0) {
            return Err(Error::LostDefiniteness { index: i });
        }
        d[i] = dnew;
        alpha += wi2 / di;
        for p in (i + 1)..m {
            w[p] -= wi * l[i * m + p];
            let lw = gamma * w[p];
            l[i * m + p] += lw;
        }
    }
    Ok(())
}

/// Algorithm core for the covariance-aware rank-k factor modification, on
/// the raw factor buffers.
#[allow(clippy::too_many_arguments)]
pub(crate) fn ldl_rank_k_kernel<S: Scalar>(
    l: &mut [S],
    d: &mut [S],
    m: usize,
    mean: &mut Vec<S>,
    count: &mut usize,
    y: &[S],
    k: usize,
    update: bool,
) -> Result<()> {
    let n = *count;
    let scale = S::from_f64(n as f64 - 1.0);
    for v in d.iter_mut() {
        *v = *v * scale;
    }
    let n_after = if update { n + k } else { n - k };
    let c = (S::from_f64(n as f64) / S::from_f64(n_after as f64)).sqrt();
    let ybar = column_mean_kernel(y, m, k);
    // z = ȳ - c(ȳ - x̄₁); the K column materialized below is y_j - z
    let z: Vec<S> = ybar
        .iter()
        .zip(mean.iter())
        .map(|(&yb, &xb)| yb - c * (yb - xb))
        .collect();
    let mut w = vec![S::zero(); m];
    for j in 0..k {
        let col = &y[j * m..(j + 1) * m];
        for i in 0..m {
            w[i] = col[i] - z[i];
        }
        rank1_kernel(l, d, &mut w, m, update)?;
    }
    let unscale = S::from_f64(n_after as f64 - 1.0);
    for v in d.iter_mut() {
        *v = *v / unscale;
    }
    *mean = combine_mean_kernel(n, mean, k, &ybar, update);
    *count = n_after;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn ldl_mixed_kernel<S: Scalar>(
    l: &mut [S],
    d: &mut [S],
    m: usize,
    mean: &mut Vec<S>,
    count: &mut usize,
    y_add: &[S],
    ku: usize,
    y_remove: &[S],
    kd: usize,
    root_plus: bool,
) -> Result<()> {
    let n1 = *count;
    let n2 = n1 + ku - kd;
    let scale = S::from_f64(n1 as f64 - 1.0);
    for v in d.iter_mut() {
        *v = *v * scale;
    }
    let yu_bar = column_mean_kernel(y_add, m, ku);
    let yd_bar = column_mean_kernel(y_remove, m, kd);
    let xu = combine_mean_kernel(n1, mean, ku, &yu_bar, true);
    let x2 = combine_mean_kernel(n1 + ku, &xu, kd, &yd_bar, false);
    let (c, _) = mixed_coefficient_kernel::<S>(n1, n2, root_plus);
    let z: Vec<S> = mean
        .iter()
        .zip(&x2)
        .map(|(&a, &b)| a + c * (b - a))
        .collect();
    let mut w = vec![S::zero(); m];
    for j in 0..ku {
        let col = &y_add[j * m..(j + 1) * m];
        for i in 0..m {
            w[i] = col[i] - z[i];
        }
        rank1_kernel(l, d, &mut w, m, true)?;
    }
    for j in 0..kd {
        let col = &y_remove[j * m..(j + 1) * m];
        for i in 0..m {
            w[i] = col[i] - z[i];
        }
        rank1_kernel(l, d, &mut w, m, false)?;
    }
    let unscale = S::from_f64(n2 as f64 - 1.0);
    for v in d.iter_mut() {
        *v = *v / unscale;
    }
    *mean = x2;
    *count = n2;
    Ok(())
}

/// Forward substitution, diagonal scaling, back substitution, in place.
pub(crate) fn solve_kernel(l: &[f64], d: &[f64], x: &mut [f64], m: usize) {
    for i in 0..m {
        let mut acc = x[i];
        for j in 0..i {
            acc -= l[j * m + i] * x[j];
        }
        x[i] = acc;
    }
    for i in 0..m {
        x[i] /= d[i];
    }
    for i in (0..m).rev() {
        let mut acc = x[i];
        for j in (i + 1)..m {
            acc -= l[i * m + j] * x[j];
        }
        x[i] = acc;
    }
}
