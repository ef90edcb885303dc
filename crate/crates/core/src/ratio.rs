//! Exact rational arithmetic helpers shared by every module.

use alloc::string::String;
use alloc::string::ToString;

use num::bigint::BigInt;
use num::rational::Ratio;
use num::{One, Signed, ToPrimitive, Zero};

/// The scalar used everywhere: an arbitrary-precision rational.
pub type Rat = Ratio<BigInt>;

/// Shorthand for an integer-valued rational.
pub fn rat(n: i64) -> Rat {
    Ratio::from_integer(BigInt::from(n))
}

/// Shorthand for `n/d`.
pub fn ratio(n: i64, d: i64) -> Rat {
    Ratio::new(BigInt::from(n), BigInt::from(d))
}

/// Exact conversion of a finite float. Every finite `f64` is a dyadic
/// rational, so this never loses information.
pub fn from_f64(x: f64) -> Option<Rat> {
    Rat::from_float(x)
}

/// Nearest-float rendering for reports.
pub fn to_f64(x: &Rat) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Rounds to the nearest multiple of `grid`, halves away from zero.
/// Used to quantize IPC values and benchmark coefficients.
pub fn round_to_grid(x: &Rat, grid: &Rat) -> Rat {
    assert!(grid.is_positive(), "grid step must be positive");
    (x / grid).round() * grid
}

/// `|a - b| <= tol * max(|a|, |b|)`, the relative comparison used whenever
/// measured quantities are tested for equality.
pub fn approx_eq_rel(a: &Rat, b: &Rat, tol: &Rat) -> bool {
    let diff = (a - b).abs();
    let scale = a.abs().max(b.abs());
    diff <= tol * scale
}

/// Renders `n/d`, or just `n` for integers.
pub fn display(x: &Rat) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        let mut s = x.numer().to_string();
        s.push('/');
        s.push_str(&x.denom().to_string());
        s
    }
}

/// Decimal rendering with enough digits for log files; exact values should
/// always travel as numerator/denominator pairs instead.
pub fn display_decimal(x: &Rat) -> String {
    let f = to_f64(x);
    let mut s = alloc::format!("{f}");
    if !s.contains('.') && !s.contains('e') && !s.contains("NaN") && !s.contains("inf") {
        s.push_str(".0");
    }
    s
}

pub fn is_zero(x: &Rat) -> bool {
    x.is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rounding_matches_benchmark_coefficient_examples() {
        let grid = ratio(1, 20);
        // 0.06 rounds down to 0.05 on the 1/20 grid, 1 stays 1: the a^1 b^20
        // coefficient pair.
        assert_eq!(round_to_grid(&ratio(6, 100), &grid), ratio(1, 20));
        assert_eq!(round_to_grid(&rat(1), &grid), rat(1));
        assert_eq!(round_to_grid(&ratio(3, 2), &grid), ratio(3, 2));
        // 4/3 = 26.66../20 rounds to 27/20.
        assert_eq!(round_to_grid(&ratio(4, 3), &grid), ratio(27, 20));
    }

    #[test]
    fn float_round_trip_is_exact() {
        let x = from_f64(0.1).unwrap();
        assert_eq!(to_f64(&x), 0.1);
        assert_eq!(from_f64(2.0).unwrap(), rat(2));
    }

    #[test]
    fn display_forms() {
        assert_eq!(display(&ratio(1, 3)), "1/3");
        assert_eq!(display(&rat(-4)), "-4");
        assert_eq!(display_decimal(&rat(2)), "2.0");
        assert_eq!(display_decimal(&ratio(3, 2)), "1.5");
    }
}
