//! Clebsch-Gordan coefficients in the Condon-Shortley convention.
//!
//! Evaluated from Racah's closed formula in exact rational arithmetic; only
//! the final square root is taken in floating point. Angular momenta are
//! passed doubled so that half-integers are plain integers.

use std::cell::RefCell;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

thread_local! {
    static FACTORIALS: RefCell<Vec<BigInt>> = RefCell::new(vec![BigInt::one()]);
}

fn factorial(k: i64) -> BigInt {
    debug_assert!(k >= 0);
    let k = k as usize;
    FACTORIALS.with(|cell| {
        let mut table = cell.borrow_mut();
        while table.len() <= k {
            let next = table.last().unwrap() * BigInt::from(table.len());
            table.push(next);
        }
        table[k].clone()
    })
}

fn is_valid(two_j: i64, two_m: i64) -> bool {
    two_j >= 0 && two_m.abs() <= two_j && (two_j - two_m) % 2 == 0
}

/// ⟨j1 m1 j2 m2 | j m⟩ with every argument doubled (`two_j1 = 2·j1`, ...).
///
/// Returns 0 for any combination that violates the triangle rule, projection
/// bounds or m1 + m2 = m.
pub fn clebsch_gordan(two_j1: i64, two_m1: i64, two_j2: i64, two_m2: i64, two_j: i64, two_m: i64) -> f64 {
    if !is_valid(two_j1, two_m1) || !is_valid(two_j2, two_m2) || !is_valid(two_j, two_m) {
        return 0.0;
    }
    if two_m1 + two_m2 != two_m {
        return 0.0;
    }
    if two_j > two_j1 + two_j2 || two_j < (two_j1 - two_j2).abs() || (two_j1 + two_j2 + two_j) % 2 != 0 {
        return 0.0;
    }

    // Every combination below is an integer by the checks above.
    let h = |x: i64| x / 2;
    let j1pj2mj = h(two_j1 + two_j2 - two_j);
    let j1mm1 = h(two_j1 - two_m1);
    let j2pm2 = h(two_j2 + two_m2);
    let jmj2pm1 = h(two_j - two_j2 + two_m1);
    let jmj1mm2 = h(two_j - two_j1 - two_m2);

    let k_min = 0.max(-jmj2pm1).max(-jmj1mm2);
    let k_max = j1pj2mj.min(j1mm1).min(j2pm2);
    if k_min > k_max {
        return 0.0;
    }

    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let den = factorial(k)
            * factorial(j1pj2mj - k)
            * factorial(j1mm1 - k)
            * factorial(j2pm2 - k)
            * factorial(jmj2pm1 + k)
            * factorial(jmj1mm2 + k);
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return 0.0;
    }

    let triangle = BigRational::new(
        BigInt::from(two_j + 1)
            * factorial(h(two_j + two_j1 - two_j2))
            * factorial(h(two_j - two_j1 + two_j2))
            * factorial(j1pj2mj),
        factorial(h(two_j1 + two_j2 + two_j) + 1),
    );
    let projections = factorial(h(two_j + two_m))
        * factorial(h(two_j - two_m))
        * factorial(j1mm1)
        * factorial(h(two_j1 + two_m1))
        * factorial(h(two_j2 - two_m2))
        * factorial(j2pm2);

    let squared = triangle * BigRational::from_integer(projections) * &sum * &sum;
    let magnitude = squared.to_f64().expect("squared coefficient is at most one").sqrt();
    if sum.is_negative() {
        -magnitude
    } else {
        magnitude
    }
}
