//! Monotonicity thresholds: the first index from which one exponential-
//! polynomial term permanently dominates a multiple of another.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MtError {
    #[error("({0}, {1}) must be lexicographically greater than ({2}, {3})")]
    NotLexGreater(u64, u64, u64, u64),
}

/// `n^a * 0^n` is 0 for every n >= 0 (including n = 0); otherwise the plain
/// value. Exact integer arithmetic throughout.
fn term_value(b: u64, a: u64, n: u64) -> BigInt {
    if b == 0 {
        return BigInt::zero();
    }
    let base = BigInt::from(b).pow(n as u32);
    let poly = if a == 0 {
        BigInt::one()
    } else {
        BigInt::from(n).pow(a as u32)
    };
    base * poly
}

fn dominates(k: u64, hi: (u64, u64), lo: (u64, u64), n: u64) -> bool {
    term_value(hi.0, hi.1, n) > BigInt::from(k) * term_value(lo.0, lo.1, n)
}

/// The smallest `n0` such that `n^a1 * b1^n > k * n^a2 * b2^n` holds for all
/// `n >= n0`, for `(b1, a1) >lex (b2, a2)` and `k >= 1`.
///
/// The scan first finds the index `stable` from which the step ratio of the
/// two sides never shrinks again (an integer cross-multiplication test), so
/// that once the inequality holds at some `m >= stable` it holds forever;
/// the last failure below that point determines the answer.
pub fn monotonicity_threshold(k: u64, hi: (u64, u64), lo: (u64, u64)) -> Result<u64, MtError> {
    let (b1, a1) = hi;
    let (b2, a2) = lo;
    if hi <= lo {
        return Err(MtError::NotLexGreater(b1, a1, b2, a2));
    }
    assert!(k >= 1);

    // Degenerate right side: only positivity of the left side matters.
    if b2 == 0 {
        return Ok(if a1 == 0 { 0 } else { 1 });
    }

    // From this index on, lhs(n+1)/lhs(n) >= rhs(n+1)/rhs(n), i.e.
    // b1 * (n+1)^a1 * n^a2 >= b2 * (n+1)^a2 * n^a1. For a1 >= a2 that is
    // immediate for every n >= 1; otherwise the crossover is found by
    // scanning the cross-multiplied inequality, whose right side shrinks.
    let stable = if a1 >= a2 {
        1
    } else {
        let d = (a2 - a1) as u32;
        let mut n = 1u64;
        loop {
            let lhs = BigInt::from(b1) * BigInt::from(n).pow(d);
            let rhs = BigInt::from(b2) * BigInt::from(n + 1).pow(d);
            if lhs >= rhs {
                break n;
            }
            n += 1;
        }
    };

    let mut m = stable;
    while !dominates(k, hi, lo, m) {
        m += 1;
    }
    // Scan below for the last failure; the inequality holds at every index
    // in (last_failure, m] and, by the ratio argument, beyond m.
    let mut threshold = m;
    while threshold > 0 && dominates(k, hi, lo, threshold - 1) {
        threshold -= 1;
    }
    Ok(threshold)
}
