//! Scalar abstraction and the instrumented operation counter.
//!
//! All numerical kernels in this crate are generic over [`Scalar`]. Production
//! code instantiates them with `f64` (monomorphized, zero overhead); the
//! counting harness in [`crate::counts`] instantiates the same kernels with
//! [`Counted`], a wrapper that tallies every multiplication/division,
//! addition/subtraction, and square root into thread-local counters. Both
//! paths execute the identical arithmetic.

use std::cell::Cell;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Real scalar usable by the numerical kernels.
pub trait Scalar:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn is_zero(self) -> bool {
        self.to_f64() == 0.0
    }
    fn is_finite(self) -> bool {
        self.to_f64().is_finite()
    }
}

impl Scalar for f64 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline(always)]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

thread_local! {
    static MULTS: Cell<u64> = const { Cell::new(0) };
    static ADDS: Cell<u64> = const { Cell::new(0) };
    static SQRTS: Cell<u64> = const { Cell::new(0) };
}

/// Tally of arithmetic operations in a measured region.
///
/// Divisions count as multiplications and subtractions as additions; square
/// roots are tracked separately. Counters are monotone within a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounter {
    pub mults: u64,
    pub adds: u64,
    pub sqrts: u64,
}

impl OpCounter {
    /// Current value of the thread-local counters.
    pub fn snapshot() -> Self {
        OpCounter {
            mults: MULTS.with(|c| c.get()),
            adds: ADDS.with(|c| c.get()),
            sqrts: SQRTS.with(|c| c.get()),
        }
    }

    /// Counts accumulated since `self` was snapshotted.
    pub fn since(&self) -> Self {
        let now = Self::snapshot();
        OpCounter {
            mults: now.mults - self.mults,
            adds: now.adds - self.adds,
            sqrts: now.sqrts - self.sqrts,
        }
    }

    pub fn total(&self) -> u64 {
        self.mults + self.adds + self.sqrts
    }
}

/// Runs `f` and returns its result together with the operations it performed
/// on [`Counted`] values.
pub fn count_ops<R>(f: impl FnOnce() -> R) -> (R, OpCounter) {
    let before = OpCounter::snapshot();
    let r = f();
    (r, before.since())
}

#[inline(always)]
fn bump(cell: &'static std::thread::LocalKey<Cell<u64>>) {
    cell.with(|c| c.set(c.get() + 1));
}

/// `f64` wrapper whose arithmetic feeds the thread-local [`OpCounter`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Counted(pub f64);

impl Add for Counted {
    type Output = Counted;
    #[inline]
    fn add(self, rhs: Counted) -> Counted {
        bump(&ADDS);
        Counted(self.0 + rhs.0)
    }
}

impl Sub for Counted {
    type Output = Counted;
    #[inline]
    fn sub(self, rhs: Counted) -> Counted {
        bump(&ADDS);
        Counted(self.0 - rhs.0)
    }
}

impl Mul for Counted {
    type Output = Counted;
    #[inline]
    fn mul(self, rhs: Counted) -> Counted {
        bump(&MULTS);
        Counted(self.0 * rhs.0)
    }
}

impl Div for Counted {
    type Output = Counted;
    #[inline]
    fn div(self, rhs: Counted) -> Counted {
        bump(&MULTS);
        Counted(self.0 / rhs.0)
    }
}

impl Neg for Counted {
    type Output = Counted;
    #[inline]
    fn neg(self) -> Counted {
        Counted(-self.0)
    }
}

impl AddAssign for Counted {
    #[inline]
    fn add_assign(&mut self, rhs: Counted) {
        *self = *self + rhs;
    }
}

impl SubAssign for Counted {
    #[inline]
    fn sub_assign(&mut self, rhs: Counted) {
        *self = *self - rhs;
    }
}

impl Scalar for Counted {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Counted(v)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self.0
    }
    #[inline]
    fn sqrt(self) -> Self {
        bump(&SQRTS);
        Counted(self.0.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counted_arithmetic_tallies() {
        let (v, ops) = count_ops(|| {
            let a = Counted(3.0);
            let b = Counted(4.0);
            let s = a * a + b * b; // 2 mults, 1 add
            s.sqrt() // 1 sqrt
        });
        assert_eq!(v.0, 5.0);
        assert_eq!(
            ops,
            OpCounter {
                mults: 2,
                adds: 1,
                sqrts: 1
            }
        );
    }

    #[test]
    fn division_and_subtraction_fold_in() {
        let (_, ops) = count_ops(|| {
            let a = Counted(10.0);
            let b = Counted(2.0);
            a / b - b
        });
        assert_eq!(ops.mults, 1);
        assert_eq!(ops.adds, 1);
        assert_eq!(ops.sqrts, 0);
    }

    #[test]
    fn f64_path_is_uncounted() {
        let (_, ops) = count_ops(|| {
            let x: f64 = 2.0;
            x * x + x
        });
        assert_eq!(ops, OpCounter::default());
    }

    #[test]
    fn counters_are_monotone_within_region() {
        let before = OpCounter::snapshot();
        let _ = Counted(1.0) + Counted(2.0);
        let mid = before.since();
        let _ = Counted(1.0) * Counted(2.0);
        let after = before.since();
        assert!(after.adds >= mid.adds);
        assert!(after.mults >= mid.mults);
        assert!(after.total() > mid.total());
    }
}
