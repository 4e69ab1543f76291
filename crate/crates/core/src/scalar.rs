//! Numeric back-ends for path sums: exact rationals and doubles.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NumericMode {
    /// Arbitrary-precision rationals; every identity holds exactly.
    Exact,
    /// IEEE double precision, for bulk statistics.
    #[default]
    Float,
}

impl std::str::FromStr for NumericMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" | "rational" => Ok(NumericMode::Exact),
            "float" | "double" | "f64" => Ok(NumericMode::Float),
            other => Err(format!("unknown numeric mode `{other}` (expected exact|float)")),
        }
    }
}

impl std::fmt::Display for NumericMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NumericMode::Exact => "exact",
            NumericMode::Float => "float",
        })
    }
}

/// Field operations needed by the perturbative and combinatorial engines.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    const MODE: NumericMode;

    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }

    fn recip(&self) -> Self {
        Self::one() / self.clone()
    }

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// Zero test used for degeneracy detection. Exact for rationals.
    fn is_negligible(&self) -> bool {
        self.is_zero()
    }
}

impl Scalar for f64 {
    const MODE: NumericMode = NumericMode::Float;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    const MODE: NumericMode = NumericMode::Exact;

    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn to_f64(&self) -> f64 {
        // Direct conversion of huge numerators/denominators overflows; fall
        // back to a scaled quotient.
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            let n = self.numer().to_f64().unwrap_or(f64::NAN);
            let d = self.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }
}

/// Exact rational as a plain `num/den` string.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}
