//! Partition numbers, weight multiplicities of the basic representation,
//! and numerical evaluation of characters at points i*a*alpha_1 + y*Lambda_0
//! (and at real tilts) through the explicit theta-type series.
//!
//! Both the numerator and the denominator of the character formula are
//! instances of the series in `series` after the substitution
//! X = y(x+1)/2, T = y(n+2)/2, a_tilde = 2a/y; the denominator is the
//! numerator of the trivial highest weight, (X, T) = (y/2, y).

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::numerics::SignedLog;
use crate::series::{self, SeriesEval};
use crate::weights::Weight;

/// Largest s with p(s) representable in u64.
pub const PARTITION_EXACT_MAX: usize = 416;
/// Hard cap on partition arguments (table cost guard).
pub const PARTITION_CAP: usize = 10_000;

fn exact_table() -> &'static Vec<u64> {
    static TABLE: OnceLock<Vec<u64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut p = vec![0u64; PARTITION_EXACT_MAX + 1];
        p[0] = 1;
        for n in 1..=PARTITION_EXACT_MAX {
            let mut acc: i128 = 0;
            let mut k = 1i64;
            loop {
                let g1 = (k * (3 * k - 1) / 2) as usize;
                let g2 = (k * (3 * k + 1) / 2) as usize;
                if g1 > n {
                    break;
                }
                let sign = if k % 2 == 1 { 1i128 } else { -1i128 };
                acc += sign * p[n - g1] as i128;
                if g2 <= n {
                    acc += sign * p[n - g2] as i128;
                }
                k += 1;
            }
            p[n] = u64::try_from(acc).expect("pentagonal recurrence stays positive");
        }
        p
    })
}

/// p(s) by the pentagonal-number recurrence, exact.
pub fn partition_count(s: usize) -> Result<u64> {
    if s > PARTITION_CAP {
        return Err(Error::PartitionCap(s, PARTITION_CAP));
    }
    if s > PARTITION_EXACT_MAX {
        return Err(Error::PartitionOverflow(s, PARTITION_EXACT_MAX));
    }
    Ok(exact_table()[s])
}

/// Multiplicity of mu as a weight of the basic representation: nonzero only
/// for mu = Lambda_0 + k*alpha_1 - (k^2+s)*delta, where it equals p(s).
pub fn weight_mult_basic(mu: &Weight) -> Result<u64> {
    match basic_partition_index(mu) {
        Some(s) => partition_count(s),
        None => Ok(0),
    }
}

/// For a level-1 weight of shape Lambda_0 + k*alpha_1 - (k^2+s)*delta
/// returns s; None when mu is not of that shape.
pub fn basic_partition_index(mu: &Weight) -> Option<usize> {
    if mu.level != 1 || mu.alpha1_index % 2 != 0 {
        return None;
    }
    let k = mu.alpha1_index / 2;
    let s = -(mu.delta_depth + k * k);
    if s < 0 {
        None
    } else {
        Some(s as usize)
    }
}

/// Evaluation point i*a*alpha_1 + y*Lambda_0.
#[derive(Debug, Clone, Copy)]
pub struct CharPoint {
    pub a: f64,
    /// must be positive (convergence region)
    pub y: f64,
}

/// Truncation control for all character series.
#[derive(Debug, Clone, Copy)]
pub struct SeriesControl {
    /// absolute tail tolerance
    pub eps: f64,
    /// hard safety bound on summation ranges
    pub k_max_cap: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            eps: 1e-12,
            k_max_cap: 1_000_000,
        }
    }
}

/// below this |a| the degenerate (a -> 0) branch is used
pub const A_SWITCH: f64 = 1e-8;

fn check_lambda(lambda: &Weight) -> Result<()> {
    if !lambda.is_dominant() {
        return Err(Error::NotDominant(lambda.to_string()));
    }
    if lambda.level < 1 {
        return Err(Error::UnsupportedLevel(lambda.level));
    }
    Ok(())
}

fn check_terms(eval: &SeriesEval, ctrl: &SeriesControl) -> Result<()> {
    if eval.terms_used > ctrl.k_max_cap {
        return Err(Error::OracleTruncation(format!(
            "series needed {} terms, cap {}",
            eval.terms_used, ctrl.k_max_cap
        )));
    }
    Ok(())
}

/// Numerator series of the character of the dominant weight (n, x, *) at
/// (a, y), ignoring any delta-depth: for a != 0 this is
/// sum_k sin(a(x+1) + 2ak(n+2)) e^{-y(k(x+1) + k^2(n+2))}; in the a -> 0
/// branch the sine is replaced by its linear coefficient, which rescales
/// the series by 2/(a*y) -- the rescaling cancels in every ratio, so the
/// degenerate branch returns the a-linear coefficient
/// (y/2) * sum_k (x+1 + 2k(n+2)) e^{...} instead.
pub fn char_numerator_log(lambda: &Weight, pt: &CharPoint, ctrl: &SeriesControl) -> Result<SignedLog> {
    check_lambda(lambda)?;
    if pt.y <= 0.0 {
        return Err(Error::NonPositiveY(pt.y));
    }
    let bx = pt.y * (lambda.alpha1_index + 1) as f64 / 2.0;
    let bt = pt.y * (lambda.level + 2) as f64 / 2.0;
    let eval = if pt.a.abs() < A_SWITCH {
        series::theta_lin(bx, bt, ctrl.eps)
    } else {
        series::theta_sin(2.0 * pt.a / pt.y, bx, bt, ctrl.eps)
    };
    check_terms(&eval, ctrl)?;
    Ok(eval.value)
}

/// Denominator series: the numerator at the trivial weight, (X,T) = (y/2, y).
pub fn char_denominator_log(pt: &CharPoint, ctrl: &SeriesControl) -> Result<SignedLog> {
    if pt.y <= 0.0 {
        return Err(Error::NonPositiveY(pt.y));
    }
    let eval = if pt.a.abs() < A_SWITCH {
        series::theta_lin(pt.y / 2.0, pt.y, ctrl.eps)
    } else {
        series::theta_sin(2.0 * pt.a / pt.y, pt.y / 2.0, pt.y, ctrl.eps)
    };
    check_terms(&eval, ctrl)?;
    // cancellation guard: the value must not sit too far below the peak term
    if eval.value.sign == 0.0 || (eval.value.ln_abs - eval.ln_peak).exp() < 10.0 * ctrl.eps {
        return Err(Error::IllConditioned(
            (eval.value.ln_abs - eval.ln_peak).exp(),
            10.0 * ctrl.eps,
        ));
    }
    Ok(eval.value)
}

/// ch_lambda at i*a*alpha_1 + y*Lambda_0 as sign + log magnitude. A
/// delta-depth d on lambda contributes the exact factor e^{d y}.
pub fn char_eval_log(lambda: &Weight, pt: &CharPoint, ctrl: &SeriesControl) -> Result<SignedLog> {
    let num = char_numerator_log(lambda, pt, ctrl)?;
    let den = char_denominator_log(pt, ctrl)?;
    let mut r = num.div(den);
    if r.sign != 0.0 {
        r.ln_abs += lambda.delta_depth as f64 * pt.y;
    }
    Ok(r)
}

/// ch_lambda as a plain f64. The values at the points used here are real:
/// both branches of the formula produce real series.
pub fn char_eval(lambda: &Weight, pt: &CharPoint, ctrl: &SeriesControl) -> Result<f64> {
    Ok(char_eval_log(lambda, pt, ctrl)?.to_f64())
}

/// Normalized ratio ch_lambda(a, y) / ch_lambda(0, y); modulus <= 1, exactly
/// 1 at a = 0, even in a. Depth factors cancel.
pub fn char_ratio(lambda: &Weight, a: f64, y: f64, ctrl: &SeriesControl) -> Result<f64> {
    if a.abs() < A_SWITCH {
        check_lambda(lambda)?;
        if y <= 0.0 {
            return Err(Error::NonPositiveY(y));
        }
        return Ok(1.0);
    }
    let at = CharPoint { a, y };
    let zero = CharPoint { a: 0.0, y };
    let num_a = char_numerator_log(lambda, &at, ctrl)?;
    let num_0 = char_numerator_log(lambda, &zero, ctrl)?;
    let den_a = char_denominator_log(&at, ctrl)?;
    let den_0 = char_denominator_log(&zero, ctrl)?;
    // (N_a / N_0) * (D_0 / D_a); the degenerate branch carries an a-linear
    // rescaling that is identical in numerator and denominator positions
    // only when both use the same branch, which holds here (same a)
    Ok(num_a.div(num_0).mul(den_0.div(den_a)).to_f64())
}

/// Character at a real tilt h = (h1*alpha_1 + h2*Lambda_0)/2, h2 > 0:
/// numerator 2*sum_k sinh((h1/y)(X+2kT)) e^{-2(kX+k^2 T)} with y = h2/2.
/// The factor 2 cancels in the ratio with the denominator, which uses the
/// same form at the trivial weight, so it is kept on both.
pub fn char_eval_tilt_log(lambda: &Weight, h1: f64, h2: f64, ctrl: &SeriesControl) -> Result<SignedLog> {
    check_lambda(lambda)?;
    if h2 <= 0.0 {
        return Err(Error::BadTilt(h2));
    }
    let y = h2 / 2.0;
    let num = tilt_series(lambda.alpha1_index, lambda.level, h1, y, ctrl)?;
    let den = tilt_series(0, 0, h1, y, ctrl)?;
    if den.sign == 0.0 {
        return Err(Error::IllConditioned(0.0, 10.0 * ctrl.eps));
    }
    let mut r = num.div(den);
    if r.sign != 0.0 {
        r.ln_abs += lambda.delta_depth as f64 * y;
    }
    Ok(r)
}

fn tilt_series(x: i64, n: i64, h1: f64, y: f64, ctrl: &SeriesControl) -> Result<SignedLog> {
    let bx = y * (x + 1) as f64 / 2.0;
    let bt = y * (n + 2) as f64 / 2.0;
    let eval = if h1 == 0.0 {
        series::theta_lin(bx, bt, ctrl.eps)
    } else {
        series::theta_sinh(h1 / y, bx, bt, ctrl.eps)
    };
    check_terms(&eval, ctrl)?;
    Ok(eval.value)
}

/// Independent oracle for ch_{Lambda_0}(y Lambda_0): sum over the explicit
/// weight list with partition multiplicities,
/// (sum_k e^{-y k^2}) * prod_{m>=1} (1 - e^{-y m})^{-1}.
pub fn weight_sum_oracle(y: f64, eps: f64) -> f64 {
    assert!(y > 0.0);
    let kmax = ((1.0 / eps).ln() / y).sqrt().ceil() as i64 + 2;
    let mut theta = 0.0;
    for k in -kmax..=kmax {
        theta += (-y * (k * k) as f64).exp();
    }
    let mmax = ((1.0 / eps).ln() / y).ceil() as i64 + 2;
    let mut ln_prod = 0.0;
    for m in 1..=mmax {
        ln_prod -= (-(y * m as f64)).exp_m1().abs().ln();
    }
    theta * ln_prod.exp()
}
