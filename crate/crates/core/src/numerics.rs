//! Small numerical helpers shared across the crate: compensated summation
//! and a sign/log-magnitude representation for quantities whose natural
//! scale over- or underflows `f64`.

/// Kahan compensated accumulator.
///
/// The theta-type series evaluated in this crate have alternating-sign
/// terms of comparable magnitude; plain summation loses digits exactly
/// where the truncation bounds promise them.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let y = value - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// A real number stored as `sign * exp(ln_abs)`.
///
/// Character numerators and denominators at small `y` have magnitudes like
/// `exp(-pi^2/(2y))`, far below `f64::MIN_POSITIVE` for the parameter
/// ranges the convergence experiments need. Ratios of such quantities are
/// perfectly well conditioned, so we carry sign and log magnitude
/// separately and only exponentiate at the end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    /// -1.0, 0.0 or 1.0
    pub sign: f64,
    /// natural log of the absolute value; ignored when `sign == 0`
    pub ln_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        sign: 0.0,
        ln_abs: f64::NEG_INFINITY,
    };

    pub fn new(sign: f64, ln_abs: f64) -> Self {
        if sign == 0.0 {
            Self::ZERO
        } else {
            Self {
                sign: sign.signum(),
                ln_abs,
            }
        }
    }

    pub fn from_f64(v: f64) -> Self {
        if v == 0.0 {
            Self::ZERO
        } else {
            Self {
                sign: v.signum(),
                ln_abs: v.abs().ln(),
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        self.sign * self.ln_abs.exp()
    }

    pub fn mul(self, other: SignedLog) -> SignedLog {
        if self.sign == 0.0 || other.sign == 0.0 {
            return Self::ZERO;
        }
        SignedLog {
            sign: self.sign * other.sign,
            ln_abs: self.ln_abs + other.ln_abs,
        }
    }

    pub fn div(self, other: SignedLog) -> SignedLog {
        debug_assert!(other.sign != 0.0, "division by exact zero");
        if self.sign == 0.0 {
            return Self::ZERO;
        }
        SignedLog {
            sign: self.sign * other.sign,
            ln_abs: self.ln_abs - other.ln_abs,
        }
    }

    pub fn scale(self, factor: f64) -> SignedLog {
        self.mul(SignedLog::from_f64(factor))
    }
}

/// Sums `terms` of the form `(coefficient, exponent)` meaning
/// `coefficient * exp(exponent)`, returning the result as a `SignedLog`.
/// The largest exponent is factored out so the accumulation itself happens
/// on O(1) numbers.
pub fn sum_scaled_exp(terms: &[(f64, f64)]) -> SignedLog {
    let max_e = terms
        .iter()
        .filter(|(c, _)| *c != 0.0)
        .map(|(_, e)| *e)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_e == f64::NEG_INFINITY {
        return SignedLog::ZERO;
    }
    let mut acc = KahanSum::new();
    for &(c, e) in terms {
        if c != 0.0 {
            acc.add(c * (e - max_e).exp());
        }
    }
    let s = acc.value();
    if s == 0.0 {
        SignedLog::ZERO
    } else {
        SignedLog::new(s.signum(), s.abs().ln() + max_e)
    }
}

/// log(sinh(z)) for z > 0, stable for both tiny and huge z.
pub fn ln_sinh(z: f64) -> f64 {
    assert!(z > 0.0);
    if z > 350.0 {
        z - std::f64::consts::LN_2
    } else {
        z.sinh().ln()
    }
}
