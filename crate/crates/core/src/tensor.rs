//! Branching multiplicities m_lambda(beta) of V(beta) inside
//! V(Lambda_0) (x) V(lambda), computed two independent ways: an
//! alternating Weyl-group sum over weight multiplicities of the basic
//! module, and a formal-series oracle that divides Weyl-Kac numerators by
//! the denominator in exact integer arithmetic and peels highest weights
//! from the product character.

use std::collections::{BTreeMap, HashMap};

use crate::characters::weight_mult_basic;
use crate::error::{Error, Result};
use crate::weights::{Weight, LAMBDA0, RHO};

/// Decomposition of V(Lambda_0) (x) V(source) up to a delta-depth cut
/// measured relative to the top component source + Lambda_0.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub source: Weight,
    /// dominant beta -> positive multiplicity
    pub entries: BTreeMap<Weight, u64>,
    pub depth_cut: i64,
}

/// adaptive Weyl scan stops after this many consecutive zero terms
const ZERO_RUN: i64 = 3;
/// hard cap on the scan range
const K_CAP: i64 = 10_000;

fn check_level(lambda: &Weight, beta: &Weight) -> Result<()> {
    if !lambda.is_dominant() {
        return Err(Error::NotDominant(lambda.to_string()));
    }
    if lambda.level < 1 {
        return Err(Error::UnsupportedLevel(lambda.level));
    }
    if beta.level != lambda.level + 1 {
        return Err(Error::LevelMismatch {
            expected: lambda.level + 1,
            got: beta.level,
        });
    }
    Ok(())
}

/// Multiplicity of V(beta) in V(Lambda_0) (x) V(lambda): the alternating
/// sum over W = {t_k, t_k s_1} of the basic-module multiplicity of
/// beta + rho - w(lambda + rho). The support in k is finite; the scan
/// stops once both signatures vanish for three consecutive k on each side
/// and the support condition is checked to fail at the boundary.
pub fn branching_mult(lambda: &Weight, beta: &Weight) -> Result<u64> {
    check_level(lambda, beta)?;
    if !beta.is_dominant() {
        return Ok(0);
    }
    let shifted = lambda.add(&RHO);
    let target = beta.add(&RHO);
    let mut total: i128 = 0;
    for dir in [1i64, -1] {
        let mut zero_run = 0i64;
        let mut k = if dir == 1 { 0 } else { -1 };
        loop {
            let plus = target.sub(&shifted.weyl_translate(k));
            let minus = target.sub(
                &shifted
                    .weyl_reflect(crate::weights::SimpleRoot::Alpha1)
                    .weyl_translate(k),
            );
            let mp = weight_mult_basic(&plus)? as i128;
            let mm = weight_mult_basic(&minus)? as i128;
            total += mp - mm;
            if mp == 0 && mm == 0 {
                zero_run += 1;
                if zero_run >= ZERO_RUN {
                    // boundary assertion: the level-1 support condition
                    // d <= -(x/2)^2 must already fail for both signatures
                    debug_assert!(support_gone(&plus) && support_gone(&minus));
                    break;
                }
            } else {
                zero_run = 0;
            }
            k += dir;
            if k.abs() > K_CAP {
                return Err(Error::OracleTruncation(format!(
                    "Weyl scan exceeded |k| = {K_CAP} at beta = {beta}"
                )));
            }
        }
    }
    if total < 0 {
        return Err(Error::MultiplicityOverflow(format!(
            "negative multiplicity {total} at beta = {beta}"
        )));
    }
    u64::try_from(total).map_err(|_| Error::MultiplicityOverflow(beta.to_string()))
}

fn support_gone(mu: &Weight) -> bool {
    // a level-1 weight lies in the basic module only if 4d + x^2 <= 0
    mu.level != 1 || 4 * mu.delta_depth + mu.alpha1_index * mu.alpha1_index > 0
}

/// All components of V(Lambda_0) (x) V(lambda) whose delta-depth is within
/// `depth_cut` of the top component lambda + Lambda_0.
pub fn decompose(lambda: &Weight, depth_cut: i64) -> Result<Decomposition> {
    if !lambda.is_dominant() {
        return Err(Error::NotDominant(lambda.to_string()));
    }
    if lambda.level < 1 {
        return Err(Error::UnsupportedLevel(lambda.level));
    }
    assert!(depth_cut >= 0);
    let mut entries = BTreeMap::new();
    let kmax = (depth_cut as f64).sqrt() as i64;
    for k in -kmax..=kmax {
        let x = lambda.alpha1_index + 2 * k;
        if x < 0 || x > lambda.level + 1 {
            continue;
        }
        for s in 0..=(depth_cut - k * k) {
            // candidate beta = lambda + (Lambda_0 + k a1 - (k^2+s) delta)
            let beta = Weight::new(lambda.level + 1, x, lambda.delta_depth - (k * k + s));
            let m = branching_mult(lambda, &beta)?;
            if m > 0 {
                entries.insert(beta, m);
            }
        }
    }
    Ok(Decomposition {
        source: *lambda,
        entries,
        depth_cut,
    })
}

/// Formal power series on the weight lattice, exponents stored relative to
/// a highest weight as (alpha1-index offset, depth offset <= 0).
type Series = HashMap<(i64, i64), i64>;

/// Formal character of V(nu) relative to nu (coefficient of nu is 1),
/// complete down to depth offset -depth, with |x offset| <= xbound.
/// Computed by dividing the Weyl-Kac numerator by the denominator in the
/// monomial order (depth descending, then x descending).
fn formal_char(nu: &Weight, depth: i64, xbound: i64) -> Series {
    // numerator of nu: t_k gives (+1, dx = 2kq, dd = -kp - k^2 q);
    // t_k s_1 gives (-1, dx = 2kq - 2p, dd = kp - k^2 q);
    // the denominator is the numerator at the trivial weight, (p,q)=(1,2)
    let alternating = |p: i64, q: i64| -> Series {
        let mut out: Series = HashMap::new();
        let mut k = 0i64;
        loop {
            let mut hit = false;
            let range: &[i64] = if k == 0 { &[0] } else { &[k, -k] };
            for &kk in range {
                let dd1 = -kk * p - kk * kk * q;
                if dd1 >= -depth {
                    *out.entry((2 * kk * q, dd1)).or_insert(0) += 1;
                    hit = true;
                }
                let dd2 = kk * p - kk * kk * q;
                if dd2 >= -depth {
                    *out.entry((2 * kk * q - 2 * p, dd2)).or_insert(0) -= 1;
                    hit = true;
                }
            }
            if !hit && k > 0 {
                break;
            }
            k += 1;
        }
        out
    };
    let num = alternating(nu.alpha1_index + 1, nu.level + 2);
    let den = alternating(1, 2);
    // long division: leading term of den is +1 at (0,0); every other den
    // term has strictly lower (depth, x) order, so coefficients resolve in
    // a single sweep
    let den_rest: Vec<((i64, i64), i64)> = den
        .iter()
        .filter(|(&key, &c)| key != (0, 0) && c != 0)
        .map(|(&key, &c)| (key, c))
        .collect();
    let mut quot: Series = HashMap::new();
    for dd in (-depth..=0).rev() {
        for dx in (-xbound..=xbound).rev() {
            let mut c = *num.get(&(dx, dd)).unwrap_or(&0);
            for &((ex, ed), dc) in &den_rest {
                let rx = dx - ex;
                let rd = dd - ed;
                if rd <= 0 && rd >= -depth {
                    c -= dc * quot.get(&(rx, rd)).copied().unwrap_or(0);
                }
            }
            if c != 0 {
                quot.insert((dx, dd), c);
            }
        }
    }
    quot
}

/// Independent oracle: verifies and returns the decomposition of
/// ch_{Lambda_0} * ch_lambda by expanding all characters as formal series
/// and peeling highest weights from the product, with a final
/// zero-residual check of the identity coefficient by coefficient.
pub fn char_product_oracle(lambda: &Weight, depth: i64) -> Result<Decomposition> {
    if !lambda.is_dominant() {
        return Err(Error::NotDominant(lambda.to_string()));
    }
    if lambda.level < 1 || lambda.level > 6 {
        return Err(Error::UnsupportedLevel(lambda.level));
    }
    assert!((0..=10).contains(&depth));
    let xbound = lambda.alpha1_index + 2 * depth + 2;
    // basic character from the explicit weight list, independent of the
    // Weyl-Kac division
    let mut basic: Series = HashMap::new();
    let kb = (depth as f64).sqrt() as i64;
    for k in -kb..=kb {
        for s in 0..=(depth - k * k) {
            basic.insert(
                (2 * k, -(k * k + s)),
                weight_mult_basic(&Weight::new(1, 2 * k, -(k * k + s)))? as i64,
            );
        }
    }
    let lam_series = formal_char(lambda, depth, xbound);
    // product, relative to lambda + Lambda_0
    let mut product: Series = HashMap::new();
    for (&(ax, ad), &ac) in &basic {
        for (&(bx, bd), &bc) in &lam_series {
            if ad + bd >= -depth {
                *product.entry((ax + bx, ad + bd)).or_insert(0) += ac * bc;
            }
        }
    }
    // peel highest weights: scan depth offsets top down, x descending
    let top = lambda.add(&LAMBDA0);
    let mut entries = BTreeMap::new();
    for dd in (-depth..=0).rev() {
        for dx in (-xbound..=xbound).rev() {
            let m = product.get(&(dx, dd)).copied().unwrap_or(0);
            if m == 0 {
                continue;
            }
            let beta = Weight::new(top.level, top.alpha1_index + dx, top.delta_depth + dd);
            if m < 0 || !beta.is_dominant() {
                return Err(Error::OracleTruncation(format!(
                    "peel found coefficient {m} at non-highest-weight position {beta}"
                )));
            }
            let beta_series = formal_char(&beta, depth + dd, xbound);
            for (&(bx, bd), &bc) in &beta_series {
                if dd + bd >= -depth {
                    *product.entry((dx + bx, dd + bd)).or_insert(0) -= m * bc;
                }
            }
            entries.insert(beta, m as u64);
        }
    }
    if let Some((&key, &c)) = product.iter().find(|(_, &c)| c != 0) {
        return Err(Error::OracleTruncation(format!(
            "nonzero residual {c} at offset {key:?}"
        )));
    }
    Ok(Decomposition {
        source: *lambda,
        entries,
        depth_cut: depth,
    })
}
