//! Instrumented flop counts for the incremental operations beside their
//! closed-form costs and the naive baselines.
//!
//! ```bash
//! cargo run --release --example operation_counts
//! ```

use covstream::counts::{count_report, loglog_slope, CountedOp};
use covstream::Result;

fn main() -> Result<()> {
    let seed = 6;

    println!("rank-k covariance update, k = 4:");
    println!(
        "{:>6} {:>12} {:>12} {:>6} {:>14} {:>8}",
        "m", "mults", "adds", "sqrts", "formula total", "delta"
    );
    for m in [16usize, 64, 256] {
        let r = count_report(CountedOp::CovUpdate, m, 50, 4, seed)?;
        println!(
            "{:>6} {:>12} {:>12} {:>6} {:>14} {:>+8}",
            m,
            r.incremental.mults,
            r.incremental.adds,
            r.incremental.sqrts,
            r.incremental_formula.total,
            r.incremental_delta()
        );
    }

    println!("\nthe counts do not depend on how many observations the state holds:");
    for n in [100usize, 100_000] {
        let r = count_report(CountedOp::CovUpdate, 32, n, 4, seed)?;
        println!(
            "  n = {:>6}: mults {} adds {} sqrts {}",
            n, r.incremental.mults, r.incremental.adds, r.incremental.sqrts
        );
    }

    println!("\nincremental vs naive totals at m = 32, k = 4:");
    for n in [1_000usize, 10_000, 100_000] {
        let r = count_report(CountedOp::CovUpdate, 32, n, 4, seed)?;
        println!(
            "  n = {:>6}: incremental {:>10} ops, recomputation {:>12} ops ({:>6.0}x)",
            n,
            r.incremental.total(),
            r.naive.total(),
            r.naive.total() as f64 / r.incremental.total() as f64
        );
    }

    let ms = [16usize, 32, 64, 128, 256];
    let mut incr = Vec::new();
    let mut rebuild = Vec::new();
    for &m in &ms {
        let cov = count_report(CountedOp::CovUpdate, m, 40, 10, seed)?;
        incr.push((m, cov.incremental.total()));
        let ldl = count_report(CountedOp::LdlUpdate, m, 3 * m + 10, 2, seed)?;
        rebuild.push((m, ldl.naive.total()));
    }
    println!("\ngrowth in m over m = 16..256 (log-log slopes):");
    println!("  incremental update: {:.3} (quadratic)", loglog_slope(&incr));
    println!("  ldl factor rebuild: {:.3} (cubic)", loglog_slope(&rebuild));

    println!("\nldl factor maintenance, m = 64, k = 2:");
    let r = count_report(CountedOp::LdlUpdate, 64, 200, 2, seed)?;
    println!(
        "  maintained: {} ops (formula {}, delta {:+})",
        r.incremental.total(),
        r.incremental_formula.total,
        r.incremental_delta()
    );
    println!(
        "  rebuild:    {} ops (~dimension cubed over three = {})",
        r.naive.total(),
        r.naive_formula.total
    );
    Ok(())
}
