//! Exact integer arithmetic for integral weights of the affine algebra of
//! type A1^(1): the invariant bilinear form, dominance, the bar projection
//! and the affine Weyl group action.
//!
//! A weight `n*L0 + (x/2)*a1 + d*delta` is stored as the integer triple
//! `(level, alpha1_index, delta_depth) = (n, x, d)`. Storing twice the
//! alpha1 coefficient keeps all three coordinates integral.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// An integral weight of A1^(1) in the (level, alpha1_index, delta_depth)
/// coordinates. Value type with structural equality; used as a hash key by
/// the tensor decomposition tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Weight {
    /// coefficient n of Lambda_0; equals (delta, w)
    pub level: i64,
    /// x such that the alpha_1 component is (x/2) alpha_1
    pub alpha1_index: i64,
    /// coefficient d of delta
    pub delta_depth: i64,
}

/// rho = 2 Lambda_0 + (1/2) alpha_1.
pub const RHO: Weight = Weight {
    level: 2,
    alpha1_index: 1,
    delta_depth: 0,
};

/// Lambda_0, the basic fundamental weight.
pub const LAMBDA0: Weight = Weight {
    level: 1,
    alpha1_index: 0,
    delta_depth: 0,
};

/// The null root delta = alpha_0 + alpha_1.
pub const DELTA: Weight = Weight {
    level: 0,
    alpha1_index: 0,
    delta_depth: 1,
};

/// alpha_1 as a weight.
pub const ALPHA1: Weight = Weight {
    level: 0,
    alpha1_index: 2,
    delta_depth: 0,
};

/// Index of a simple root of A1^(1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimpleRoot {
    Alpha0,
    Alpha1,
}

impl Weight {
    pub const fn new(level: i64, alpha1_index: i64, delta_depth: i64) -> Self {
        Weight {
            level,
            alpha1_index,
            delta_depth,
        }
    }

    /// The level (delta, w).
    pub fn level_of(&self) -> i64 {
        self.level
    }

    /// Dominance: 0 <= x <= n. Depth plays no role.
    pub fn is_dominant(&self) -> bool {
        0 <= self.alpha1_index && self.alpha1_index <= self.level
    }

    /// Twice the invariant bilinear form, exact in integers:
    /// 2(v,w) = 2(n d' + d n') + x x'.
    pub fn twice_pairing(&self, other: &Weight) -> i64 {
        2 * (self.level * other.delta_depth + self.delta_depth * other.level)
            + self.alpha1_index * other.alpha1_index
    }

    /// The invariant bilinear form (v, w) = n d' + d n' + x x'/2.
    /// Half-integers are exact in f64 for the ranges handled here.
    pub fn pairing(&self, other: &Weight) -> f64 {
        self.twice_pairing(other) as f64 / 2.0
    }

    /// Affine translation t_k: (n, x, d) -> (n, x + 2kn, d - kx - k^2 n).
    pub fn weyl_translate(&self, k: i64) -> Weight {
        Weight {
            level: self.level,
            alpha1_index: self.alpha1_index + 2 * k * self.level,
            delta_depth: self.delta_depth - k * self.alpha1_index - k * k * self.level,
        }
    }

    /// Simple reflection. s_1 maps x -> -x; s_0 maps (n,x,d) -> (n, 2n-x, d-n+x).
    pub fn weyl_reflect(&self, root: SimpleRoot) -> Weight {
        match root {
            SimpleRoot::Alpha1 => Weight {
                level: self.level,
                alpha1_index: -self.alpha1_index,
                delta_depth: self.delta_depth,
            },
            SimpleRoot::Alpha0 => Weight {
                level: self.level,
                alpha1_index: 2 * self.level - self.alpha1_index,
                delta_depth: self.delta_depth - self.level + self.alpha1_index,
            },
        }
    }

    /// Projection on span{Lambda_0, alpha_1}: zeroes the delta coefficient.
    pub fn project_bar(&self) -> Weight {
        Weight {
            delta_depth: 0,
            ..*self
        }
    }

    pub fn add(&self, other: &Weight) -> Weight {
        Weight {
            level: self.level + other.level,
            alpha1_index: self.alpha1_index + other.alpha1_index,
            delta_depth: self.delta_depth + other.delta_depth,
        }
    }

    pub fn sub(&self, other: &Weight) -> Weight {
        Weight {
            level: self.level - other.level,
            alpha1_index: self.alpha1_index - other.alpha1_index,
            delta_depth: self.delta_depth - other.delta_depth,
        }
    }

    pub fn scaled(&self, c: i64) -> Weight {
        Weight {
            level: c * self.level,
            alpha1_index: c * self.alpha1_index,
            delta_depth: c * self.delta_depth,
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}*L0 + ({}/2)*a1 + {}*delta",
            self.level, self.alpha1_index, self.delta_depth
        )
    }
}

impl FromStr for Weight {
    type Err = Error;

    /// Parses the rendering produced by `Display`:
    /// `"n*L0 + (x/2)*a1 + d*delta"`. Whitespace around the `+` signs is
    /// flexible; each coordinate may carry a leading minus.
    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::Parse(format!("malformed weight: {s:?}"));
        let mut parts = s.split('+').map(str::trim);
        let lvl = parts
            .next()
            .and_then(|p| p.strip_suffix("*L0"))
            .ok_or_else(bad)?
            .trim()
            .parse::<i64>()
            .map_err(|_| bad())?;
        let a1 = parts
            .next()
            .and_then(|p| p.strip_suffix("*a1"))
            .and_then(|p| p.trim().strip_prefix('('))
            .and_then(|p| p.strip_suffix("/2)"))
            .ok_or_else(bad)?
            .parse::<i64>()
            .map_err(|_| bad())?;
        let d = parts
            .next()
            .and_then(|p| p.strip_suffix("*delta"))
            .ok_or_else(bad)?
            .trim()
            .parse::<i64>()
            .map_err(|_| bad())?;
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(Weight::new(lvl, a1, d))
    }
}
