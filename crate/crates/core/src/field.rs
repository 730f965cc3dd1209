//! Recoding field size.

use crate::error::{Error, Result};

/// Size of the finite field used for recoding coefficients.
///
/// `Infinite` models the q → ∞ limit in which random linear combinations
/// are independent with probability one; many closed forms collapse to
/// `min` expressions in that regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldSize {
    /// GF(q) for a prime power q ≥ 2.
    Finite(u64),
    /// The q → ∞ limit.
    Infinite,
}

impl FieldSize {
    /// Validated constructor for a finite field size.
    pub fn finite(q: u64) -> Result<Self> {
        if q < 2 || !is_prime_power(q) {
            return Err(Error::InvalidField(format!(
                "{q} is not a prime power >= 2"
            )));
        }
        Ok(FieldSize::Finite(q))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, FieldSize::Infinite)
    }

    /// q as f64; +∞ for the infinite field.
    pub fn as_f64(&self) -> f64 {
        match self {
            FieldSize::Finite(q) => *q as f64,
            FieldSize::Infinite => f64::INFINITY,
        }
    }

    /// q^e evaluated in doubles. Overflow saturates to +∞, which downstream
    /// divisions turn into a zero probability.
    pub fn pow(&self, e: i32) -> f64 {
        match self {
            FieldSize::Finite(q) => (*q as f64).powi(e),
            FieldSize::Infinite => match e.cmp(&0) {
                std::cmp::Ordering::Greater => f64::INFINITY,
                std::cmp::Ordering::Equal => 1.0,
                std::cmp::Ordering::Less => 0.0,
            },
        }
    }
}

impl std::fmt::Display for FieldSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FieldSize::Finite(q) => write!(f, "{q}"),
            FieldSize::Infinite => write!(f, "inf"),
        }
    }
}

fn is_prime_power(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut p = 0u64;
    let mut d = 2u64;
    let mut m = n;
    while d * d <= m {
        if m % d == 0 {
            p = d;
            break;
        }
        d += 1;
    }
    if p == 0 {
        return true; // n itself is prime
    }
    while m % p == 0 {
        m /= p;
    }
    m == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_powers_accepted() {
        for q in [2u64, 3, 4, 5, 8, 9, 16, 27, 243, 256, 65536] {
            assert!(FieldSize::finite(q).is_ok(), "q = {q}");
        }
    }

    #[test]
    fn non_prime_powers_rejected() {
        for q in [0u64, 1, 6, 10, 12, 100, 65535] {
            assert!(FieldSize::finite(q).is_err(), "q = {q}");
        }
    }

    #[test]
    fn pow_saturates() {
        let q = FieldSize::Finite(2);
        assert!(q.pow(4000).is_infinite());
        assert_eq!(q.pow(0), 1.0);
        assert_eq!(q.pow(-1), 0.5);
        assert_eq!(FieldSize::Infinite.pow(-3), 0.0);
        assert_eq!(FieldSize::Infinite.pow(0), 1.0);
    }
}
