//! Brute-force reference implementations used as ground truth by the
//! property suites. Intentionally slow and simple: every quantity is
//! recomputed from the literal column set, entry by entry, with no reuse.

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, Matrix};

/// One edit to a column multiset: append observations or remove them by
/// index into the current sample.
#[derive(Debug, Clone)]
pub enum Edit {
    Add(DataMatrix),
    Remove(Vec<usize>),
}

/// Ordered list of edits. Removal is by index, not by value match, so
/// duplicate columns stay unambiguous.
#[derive(Debug, Clone, Default)]
pub struct EditScript {
    pub edits: Vec<Edit>,
}

impl EditScript {
    pub fn new() -> Self {
        EditScript { edits: Vec::new() }
    }

    pub fn then_add(mut self, y: DataMatrix) -> Self {
        self.edits.push(Edit::Add(y));
        self
    }

    pub fn then_remove(mut self, indices: Vec<usize>) -> Self {
        self.edits.push(Edit::Remove(indices));
        self
    }
}

/// Mean, unnormalized scatter, and (when defined) covariance of a column set.
#[derive(Debug, Clone)]
pub struct OracleMoments {
    pub count: usize,
    pub mean: Vec<f64>,
    pub scatter: Matrix,
    pub covariance: Option<Matrix>,
}

/// Textbook two-pass mean/scatter/covariance. Each scatter entry is summed
/// independently over the columns (no symmetry shortcut), so this is a
/// genuinely different arithmetic path from the maintained states.
pub fn oracle_covariance(columns: &DataMatrix) -> OracleMoments {
    let m = columns.rows();
    let n = columns.cols();
    let mut mean = vec![0.0; m];
    for j in 0..n {
        let col = columns.col(j);
        for i in 0..m {
            mean[i] += col[i];
        }
    }
    if n > 0 {
        for v in mean.iter_mut() {
            *v /= n as f64;
        }
    }
    let mut scatter = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0.0;
            for c in 0..n {
                let col = columns.col(c);
                acc += (col[i] - mean[i]) * (col[j] - mean[j]);
            }
            scatter[(i, j)] = acc;
        }
    }
    let covariance = if n >= 2 {
        let mut s = scatter.clone();
        for v in s.data_mut() {
            *v /= (n - 1) as f64;
        }
        Some(s)
    } else {
        None
    };
    OracleMoments {
        count: n,
        mean,
        scatter,
        covariance,
    }
}

/// Requested edit for [`oracle_scatter_modify`].
#[derive(Debug, Clone, Copy)]
pub enum ScatterEdit<'a> {
    Append(&'a DataMatrix),
    Remove(&'a [usize]),
}

/// The raw product `A₂A₂ᵀ` computed along both routes of the append/remove
/// identity `A₂A₂ᵀ = A₁A₁ᵀ ± BBᵀ`. `direct` is the authoritative value; the
/// test harness asserts the two agree.
#[derive(Debug, Clone)]
pub struct ScatterModify {
    pub direct: Matrix,
    pub rank_form: Matrix,
}

pub fn oracle_scatter_modify(a1: &DataMatrix, edit: ScatterEdit<'_>) -> Result<ScatterModify> {
    match edit {
        ScatterEdit::Append(b) => {
            if b.rows() != a1.rows() {
                return Err(Error::DimensionMismatch {
                    expected: a1.rows(),
                    got: b.rows(),
                });
            }
            let a2 = a1.append(b)?;
            let direct = gram(&a2);
            let mut rank_form = gram(a1);
            add_assign(&mut rank_form, &gram(b), 1.0);
            Ok(ScatterModify { direct, rank_form })
        }
        ScatterEdit::Remove(indices) => {
            let (kept, removed) = a1.split_remove(indices)?;
            let direct = gram(&kept);
            let mut rank_form = gram(a1);
            add_assign(&mut rank_form, &gram(&removed), -1.0);
            Ok(ScatterModify { direct, rank_form })
        }
    }
}

/// Applies an edit script to a starting column set, producing the literal
/// edited column multiset.
pub fn oracle_apply(script: &EditScript, start: &DataMatrix) -> Result<DataMatrix> {
    let mut current = start.clone();
    for edit in &script.edits {
        match edit {
            Edit::Add(y) => {
                current = current.append(y)?;
            }
            Edit::Remove(indices) => {
                let (kept, _) = current.split_remove(indices)?;
                current = kept;
            }
        }
    }
    Ok(current)
}

/// `A·Aᵀ` with every entry summed independently.
fn gram(a: &DataMatrix) -> Matrix {
    let m = a.rows();
    let mut out = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0.0;
            for c in 0..a.cols() {
                let col = a.col(c);
                acc += col[i] * col[j];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

fn add_assign(target: &mut Matrix, other: &Matrix, scale: f64) {
    for (t, o) in target.data_mut().iter_mut().zip(other.data()) {
        *t += scale * o;
    }
}

/// Dense inverse by Gauss-Jordan elimination with partial pivoting.
/// Returns `None` for (numerically) singular input.
pub fn invert(mat: &Matrix) -> Option<Matrix> {
    let n = mat.rows();
    if mat.cols() != n {
        return None;
    }
    let mut a = mat.clone();
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let mut pivot_row = col;
        let mut best = a[(col, col)].abs();
        for r in (col + 1)..n {
            if a[(r, col)].abs() > best {
                best = a[(r, col)].abs();
                pivot_row = r;
            }
        }
        if best == 0.0 {
            return None;
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(pivot_row, j)];
                a[(pivot_row, j)] = tmp;
                let tmp = inv[(col, j)];
                inv[(col, j)] = inv[(pivot_row, j)];
                inv[(pivot_row, j)] = tmp;
            }
        }
        let p = a[(col, col)];
        for j in 0..n {
            a[(col, j)] /= p;
            inv[(col, j)] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[(r, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a[(r, j)] -= f * a[(col, j)];
                inv[(r, j)] -= f * inv[(col, j)];
            }
        }
    }
    Some(inv)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
/// Good to roughly machine precision for the small matrices the test suites
/// use.
pub fn symmetric_eigenvalues(mat: &Matrix) -> Vec<f64> {
    let n = mat.rows();
    assert_eq!(n, mat.cols());
    let mut a = mat.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * (1.0 + a.frobenius_norm()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::rel_frobenius_diff;

    fn dm(rows: usize, vals: &[f64]) -> DataMatrix {
        DataMatrix::new(rows, vals.len() / rows, vals.to_vec()).unwrap()
    }

    #[test]
    fn oracle_covariance_hand_sum() {
        let o = oracle_covariance(&dm(1, &[0.0, 2.0, 4.0]));
        assert_eq!(o.mean, vec![2.0]);
        assert_eq!(o.scatter[(0, 0)], 8.0);
        assert_eq!(o.covariance.unwrap()[(0, 0)], 4.0);
    }

    #[test]
    fn oracle_covariance_degenerate() {
        let one = oracle_covariance(&dm(2, &[1.0, 2.0]));
        assert_eq!(one.scatter.frobenius_norm(), 0.0);
        assert!(one.covariance.is_none());

        let equal = oracle_covariance(&dm(1, &[3.0, 3.0, 3.0]));
        assert_eq!(equal.scatter[(0, 0)], 0.0);
    }

    #[test]
    fn scatter_modify_identity_columns() {
        let a1 = dm(2, &[1.0, 0.0, 0.0, 1.0]);
        let out = oracle_scatter_modify(&a1, ScatterEdit::Remove(&[0])).unwrap();
        assert_eq!(out.direct[(0, 0)], 0.0);
        assert_eq!(out.direct[(1, 1)], 1.0);
        assert!(rel_frobenius_diff(&out.rank_form, &out.direct) < 1e-15);
    }

    #[test]
    fn scatter_modify_empty_append() {
        let a1 = dm(2, &[1.0, 2.0, 3.0, 4.0]);
        let out = oracle_scatter_modify(&a1, ScatterEdit::Append(&DataMatrix::empty(2))).unwrap();
        assert!(rel_frobenius_diff(&out.direct, &out.rank_form) < 1e-15);
    }

    #[test]
    fn scatter_modify_rejects_bad_index() {
        let a1 = dm(1, &[1.0, 2.0]);
        let err = oracle_scatter_modify(&a1, ScatterEdit::Remove(&[5])).unwrap_err();
        assert_eq!(err, Error::IndexError { index: 5, len: 2 });
    }

    #[test]
    fn apply_script_by_hand() {
        let start = dm(1, &[10.0, 11.0, 12.0, 13.0, 14.0]);
        let script = EditScript::new()
            .then_add(dm(1, &[20.0]))
            .then_remove(vec![0, 2])
            .then_add(dm(1, &[30.0, 31.0]));
        let out = oracle_apply(&script, &start).unwrap();
        assert_eq!(out.data(), &[11.0, 13.0, 14.0, 20.0, 30.0, 31.0]);

        let empty_script = EditScript::new();
        assert_eq!(oracle_apply(&empty_script, &start).unwrap(), start);

        let add_then_remove = EditScript::new().then_add(dm(1, &[20.0])).then_remove(vec![5]);
        assert_eq!(oracle_apply(&add_then_remove, &start).unwrap(), start);
    }

    #[test]
    fn invert_round_trip() {
        let m = Matrix::from_vec(2, 2, vec![4.0, 2.0, 2.0, 3.0]);
        let inv = invert(&m).unwrap();
        let mut prod = Matrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    prod[(i, j)] += m[(i, k)] * inv[(k, j)];
                }
            }
        }
        assert!(rel_frobenius_diff(&prod, &Matrix::identity(2)) < 1e-14);
        assert!(invert(&Matrix::zeros(2, 2)).is_none());
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let m = Matrix::from_vec(2, 2, vec![3.0, 0.0, 0.0, 1.0]);
        let e = symmetric_eigenvalues(&m);
        assert!((e[0] - 1.0).abs() < 1e-12);
        assert!((e[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_known_2x2() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3
        let m = Matrix::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]);
        let e = symmetric_eigenvalues(&m);
        assert!((e[0] - 1.0).abs() < 1e-12);
        assert!((e[1] - 3.0).abs() < 1e-12);
    }
}
