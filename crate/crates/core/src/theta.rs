//! The theta-series space-time harmonic functions phi_a and phi_0, their
//! scaled variant phi_0^(c), the factorized family a = n*pi/t, finite
//! difference harmonicity residuals, and the drift d/dx log phi_0 used by
//! the conditioned diffusion.

use std::f64::consts::PI;

use crate::characters::{self, SeriesControl};
use crate::error::{Error, Result};
use crate::numerics::{ln_sinh, SignedLog};
use crate::series::{self, Regime};
use crate::weights::Weight;

/// Argument (x, t) of the phi functions, t > 0.
#[derive(Debug, Clone, Copy)]
pub struct SpaceTimePoint {
    pub x: f64,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: f64, t: f64) -> Result<Self> {
        if t <= 0.0 {
            return Err(Error::NonPositiveTime(t));
        }
        Ok(SpaceTimePoint { x, t })
    }
}

/// A phi evaluation with its numerical provenance. `value` is the plain
/// f64 and underflows to 0 when the log magnitude is below -745;
/// `value_log` is always meaningful.
#[derive(Debug, Clone, Copy)]
pub struct PhiEval {
    pub value: f64,
    pub value_log: SignedLog,
    pub regime: Regime,
    pub terms_used: usize,
    pub tail_bound: f64,
}

fn wrap(value_log: SignedLog, eval: &series::SeriesEval) -> PhiEval {
    PhiEval {
        value: value_log.to_f64(),
        value_log,
        regime: eval.regime,
        terms_used: eval.terms_used,
        tail_bound: eval.tail_bound,
    }
}

/// sinh arguments beyond this overflow the direct prefactor
pub const SINH_OVERFLOW: f64 = 700.0;

/// phi_a(x,t) = (pi / sinh(a pi)) * sum_k sin(ax + 2kat) e^{-2(kx+k^2 t)}.
/// Even in a; a = 0 dispatches to phi0.
pub fn phi(a: f64, p: &SpaceTimePoint, eps: f64) -> Result<PhiEval> {
    if p.t <= 0.0 {
        return Err(Error::NonPositiveTime(p.t));
    }
    if a == 0.0 {
        return phi0(p, eps);
    }
    if a.abs() * PI > SINH_OVERFLOW {
        return Err(Error::SinhOverflow(a.abs() * PI));
    }
    let eval = series::theta_sin(a, p.x, p.t, eps);
    let prefactor = SignedLog::new(a.signum(), PI.ln() - ln_sinh(a.abs() * PI));
    Ok(wrap(eval.value.mul(prefactor), &eval))
}

/// phi_0(x,t) = sum_k (x + 2kt) e^{-2(kx+k^2 t)} = lim_{a->0} phi_a.
pub fn phi0(p: &SpaceTimePoint, eps: f64) -> Result<PhiEval> {
    if p.t <= 0.0 {
        return Err(Error::NonPositiveTime(p.t));
    }
    let eval = series::theta_lin(p.x, p.t, eps);
    Ok(wrap(eval.value, &eval))
}

/// phi_{n pi / t}(x,t) through the factorized identity
/// (pi / sinh(n pi^2 / t)) * sin(n pi x / t) * e(x,t); the ratio is formed
/// in log space, so it stays finite where the generic entry point would
/// reject the sinh argument.
pub fn phi_factorized(n: u32, p: &SpaceTimePoint, eps: f64) -> Result<f64> {
    Ok(phi_factorized_log(n, p, eps)?.to_f64())
}

pub fn phi_factorized_log(n: u32, p: &SpaceTimePoint, eps: f64) -> Result<SignedLog> {
    if p.t <= 0.0 {
        return Err(Error::NonPositiveTime(p.t));
    }
    assert!(n >= 1);
    let s = (n as f64 * PI * p.x / p.t).sin();
    let e = series::theta_plain(p.x, p.t, eps);
    let prefactor = SignedLog::new(1.0, PI.ln() - ln_sinh(n as f64 * PI * PI / p.t));
    Ok(SignedLog::from_f64(s).mul(prefactor).mul(e.value))
}

/// Finite-difference residual of the space-time harmonicity PDE
/// (1/2 d^2/dx^2 + d/dt) phi_a = -(a^2/2) phi_a, second order in `step`.
pub fn harmonicity_residual(a: f64, p: &SpaceTimePoint, step: f64) -> Result<f64> {
    let margin = p.x.min(p.t - p.x).min(p.t) / 4.0;
    if step >= margin {
        return Err(Error::StepTooLarge { step, margin });
    }
    let eps = 1e-14;
    let f = |x: f64, t: f64| -> Result<f64> {
        Ok(phi(a, &SpaceTimePoint { x, t }, eps)?.value)
    };
    let center = f(p.x, p.t)?;
    let dxx = (f(p.x + step, p.t)? - 2.0 * center + f(p.x - step, p.t)?) / (step * step);
    let dt = (f(p.x, p.t + step)? - f(p.x, p.t - step)?) / (2.0 * step);
    Ok((0.5 * dxx + dt + 0.5 * a * a * center).abs())
}

/// phi_0^(c)(x,t) = phi_0(c x, c^2 t), 0 < c < 1.
pub fn phi0_scaled(c: f64, p: &SpaceTimePoint, eps: f64) -> Result<f64> {
    Ok(phi0_scaled_log(c, p, eps)?.to_f64())
}

pub fn phi0_scaled_log(c: f64, p: &SpaceTimePoint, eps: f64) -> Result<SignedLog> {
    if !(0.0 < c && c < 1.0) {
        return Err(Error::OutsideDomain(format!("slope c = {c} not in (0,1)")));
    }
    if p.t <= 0.0 {
        return Err(Error::NonPositiveTime(p.t));
    }
    Ok(series::theta_lin(c * p.x, c * c * p.t, eps).value)
}

/// d/dx log phi_0 at (x, t), 0 < x < t; the drift of the conditioned
/// diffusion. Computed from the term-wise differentiated series in the
/// active regime.
pub fn log_derivative_x(p: &SpaceTimePoint, eps: f64) -> Result<f64> {
    if !(0.0 < p.x && p.x < p.t) {
        return Err(Error::OutsideDomain(format!(
            "x = {} not in (0, t = {})",
            p.x, p.t
        )));
    }
    let num = series::theta_lin_dx(p.x, p.t, eps);
    let den = series::theta_lin(p.x, p.t, eps);
    if den.value.sign <= 0.0 {
        return Err(Error::IllConditioned(den.value.to_f64(), 0.0));
    }
    Ok(num.value.div(den.value).to_f64())
}

/// The finite-n character ratio and its claimed limit: returns
/// (ch ratio at lambda_n = [nt] L0 + [nx]/2 a1 evaluated at (a/n, 2/n),
///  phi_a(x,t) / phi_0(x,t)).
pub fn char_limit_check(n: u32, t: f64, x: f64, a: f64) -> Result<(f64, f64)> {
    if !(0.0 < x && x < t) {
        return Err(Error::OutsideDomain(format!("x = {x} not in (0, t = {t})")));
    }
    let nf = n as f64;
    let lam = Weight::new((nf * t).floor() as i64, (nf * x).floor() as i64, 0);
    let ctrl = SeriesControl::default();
    let ratio = characters::char_ratio(&lam, a / nf, 2.0 / nf, &ctrl)?;
    let limit = if a == 0.0 {
        1.0
    } else {
        let p = SpaceTimePoint { x, t };
        let eps = 1e-14;
        phi(a, &p, eps)?
            .value_log
            .div(phi0(&p, eps)?.value_log)
            .to_f64()
    };
    Ok((ratio, limit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::KahanSum;

    const EPS: f64 = 1e-13;

    #[test]
    fn boundary_zeros() {
        for &a in &[0.5, 2.0] {
            for &t in &[0.3, 1.0, 3.0] {
                for &x in &[0.0, t] {
                    let v = phi(a, &SpaceTimePoint { x, t }, EPS).unwrap().value;
                    assert!(v.abs() <= 1e-10, "a={a} x={x} t={t}: {v}");
                }
            }
        }
        for &t in &[0.3, 1.0, 3.0] {
            assert!(phi0(&SpaceTimePoint { x: 0.0, t }, EPS).unwrap().value.abs() <= 1e-10);
            assert!(phi0(&SpaceTimePoint { x: t, t }, EPS).unwrap().value.abs() <= 1e-10);
        }
    }

    #[test]
    fn phi0_positive_inside() {
        for &t in &[0.5, 1.0, 4.0] {
            for &f in &[0.1, 0.5, 0.9] {
                let v = phi0(&SpaceTimePoint { x: f * t, t }, EPS).unwrap();
                assert!(v.value_log.sign > 0.0, "t={t} x={}", f * t);
            }
        }
    }

    #[test]
    fn phi_continuous_at_zero_a() {
        for &t in &[0.7, 2.0] {
            let p = SpaceTimePoint { x: 0.4 * t, t };
            let base = phi0(&p, EPS).unwrap().value;
            let near = phi(1e-6, &p, EPS).unwrap().value;
            assert!((near - base).abs() <= 1e-8 * base.abs());
        }
    }

    #[test]
    fn factorized_family_matches_generic() {
        let p = SpaceTimePoint { x: 0.4, t: 1.0 };
        for n in 1u32..=3 {
            let a = n as f64 * PI / p.t;
            let generic = phi(a, &p, EPS).unwrap().value;
            let fact = phi_factorized(n, &p, EPS).unwrap();
            assert!(
                (generic - fact).abs() <= 1e-9 * generic.abs(),
                "n={n}: {generic} vs {fact}"
            );
        }
        // zeros and sign alternation of the sin factor
        let t = 1.3;
        for n in 1u32..=3 {
            for j in 0..=n {
                let x = j as f64 * t / n as f64;
                assert!(phi_factorized(n, &SpaceTimePoint { x, t }, EPS).unwrap().abs() <= 1e-12);
            }
            let mut last_sign = 0.0;
            for j in 0..n {
                let x = (j as f64 + 0.5) * t / n as f64;
                let s = phi_factorized_log(n, &SpaceTimePoint { x, t }, EPS).unwrap().sign;
                assert!(s != 0.0 && s != last_sign);
                last_sign = s;
            }
        }
    }

    #[test]
    fn poisson_identities() {
        // direct sums (well converged at these t) against the explicitly
        // written resummed right-hand sides
        for &a in &[0.5, 1.0, 2.0] {
            for &t in &[0.5, 1.0, 2.0, 4.0] {
                for i in 1..=9 {
                    let x = 0.1 * i as f64 * t;
                    let mut lhs_sin = KahanSum::new();
                    let mut lhs_lin = KahanSum::new();
                    for k in -60..=60i64 {
                        let kf = k as f64;
                        let w = (-2.0 * (kf * x + kf * kf * t)).exp();
                        lhs_sin.add((a * x + 2.0 * kf * t * a).sin() * w);
                        lhs_lin.add((x + 2.0 * kf * t) * w);
                    }
                    let mut rhs_sin = KahanSum::new();
                    let mut rhs_lin = KahanSum::new();
                    for k in 1..=60i64 {
                        let kf = k as f64;
                        let w = (PI / (2.0 * t)).sqrt() * (-kf * kf * PI * PI / (2.0 * t)).exp();
                        // the k and -k summands coincide
                        rhs_sin.add(2.0 * w * (kf * PI * a).sinh() * (kf * PI * x / t).sin());
                        rhs_lin.add(2.0 * w * kf * PI * (kf * PI * x / t).sin());
                    }
                    let pre_sin = (x * x / (2.0 * t) - a * a * t / 2.0).exp();
                    let pre_lin = (x * x / (2.0 * t)).exp();
                    let scale = lhs_sin.value().abs().max(1e-300);
                    assert!(
                        (lhs_sin.value() - pre_sin * rhs_sin.value()).abs() <= 1e-10 * scale,
                        "sin identity a={a} t={t} x={x}"
                    );
                    assert!(
                        (lhs_lin.value() - pre_lin * rhs_lin.value()).abs()
                            <= 1e-10 * lhs_lin.value().abs(),
                        "lin identity t={t} x={x}"
                    );
                }
            }
        }
    }

    #[test]
    fn jacobi_theta_identity() {
        for &t in &[0.1, 1.0, 10.0] {
            for i in 0..10 {
                let x = 0.1 * i as f64;
                let mut lhs = KahanSum::new();
                for n in -200..=200i64 {
                    lhs.add((-(n as f64 + x).powi(2) / t).exp());
                }
                let mut rhs = KahanSum::new();
                for n in -200..=200i64 {
                    let nf = n as f64;
                    rhs.add((2.0 * nf * PI * x).cos() * (-nf * nf * PI * PI * t).exp());
                }
                let l = lhs.value() / (PI * t).sqrt();
                assert!((l - rhs.value()).abs() <= 1e-12 * rhs.value().abs().max(1.0), "t={t} x={x}");
            }
        }
    }

    #[test]
    fn per_summand_harmonicity_exponent() {
        // e^{i(ax+2kat) - 2(kx+k^2 t) + a^2 t/2} = e^{(ia-2k)x - (ia-2k)^2 t/2}
        // compared as (real, imaginary) exponent pairs
        let (a, x, t) = (1.3, 0.7, 0.9);
        for k in -3..=3i64 {
            let kf = k as f64;
            let lhs_re = -2.0 * (kf * x + kf * kf * t) + a * a * t / 2.0;
            let lhs_im = a * x + 2.0 * kf * a * t;
            // (ia-2k)^2 = -a^2 - 4iak + 4k^2
            let rhs_re = -2.0 * kf * x - 0.5 * (-a * a + 4.0 * kf * kf) * t;
            let rhs_im = a * x - 0.5 * (-4.0 * a * kf) * t;
            assert!((lhs_re - rhs_re).abs() <= 1e-12);
            assert!((lhs_im - rhs_im).abs() <= 1e-12);
        }
    }

    #[test]
    fn harmonicity_residuals() {
        let p = SpaceTimePoint { x: 0.5, t: 1.0 };
        for &a in &[0.0, 1.0, PI] {
            let r = harmonicity_residual(a, &p, 1e-3).unwrap();
            assert!(r <= 1e-5, "a={a}: {r}");
            // Richardson order across {4h, 2h, h}
            let h = 2e-3;
            let r1 = harmonicity_residual(a, &p, 4.0 * h).unwrap();
            let r2 = harmonicity_residual(a, &p, 2.0 * h).unwrap();
            let r3 = harmonicity_residual(a, &p, h).unwrap();
            let o1 = (r1 / r2).log2();
            let o2 = (r2 / r3).log2();
            assert!(o1 >= 1.9 && o2 >= 1.9, "a={a}: orders {o1} {o2}");
        }
        assert!(matches!(
            harmonicity_residual(1.0, &p, 0.2),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn ratio_bound_on_interior() {
        for &a in &[0.5, 1.0, 2.0] {
            for &t in &[0.5, 1.0, 2.0] {
                for i in 1..=9 {
                    let p = SpaceTimePoint { x: 0.1 * i as f64 * t, t };
                    let r = phi(a, &p, EPS).unwrap().value / phi0(&p, EPS).unwrap().value;
                    assert!(r.abs() <= 1.0 + 1e-10, "a={a} t={t} x={}: {r}", p.x);
                }
            }
        }
    }

    #[test]
    fn phi0_midline_symmetry_fails() {
        // The x -> t - x symmetry of phi_0 does NOT hold (the conditioning
        // cone is one-sided in time); this scan documents the measured
        // asymmetry so no caller relies on drift antisymmetry.
        let mut max_rel: f64 = 0.0;
        for &t in &[0.8, 1.0, 2.5] {
            for i in 1..=4 {
                let x = 0.1 * i as f64 * t;
                let a = phi0(&SpaceTimePoint { x, t }, EPS).unwrap().value;
                let b = phi0(&SpaceTimePoint { x: t - x, t }, EPS).unwrap().value;
                max_rel = max_rel.max(((a - b) / a).abs());
            }
        }
        assert!(max_rel > 0.1, "symmetry unexpectedly holds: {max_rel}");
    }

    #[test]
    fn drift_matches_finite_difference_and_diverges_at_zero() {
        let p = SpaceTimePoint { x: 0.3, t: 1.0 };
        let h = 1e-5;
        let fd = (phi0(&SpaceTimePoint { x: p.x + h, t: p.t }, EPS).unwrap().value.ln()
            - phi0(&SpaceTimePoint { x: p.x - h, t: p.t }, EPS).unwrap().value.ln())
            / (2.0 * h);
        let got = log_derivative_x(&p, EPS).unwrap();
        assert!((got - fd).abs() <= 1e-6 * fd.abs().max(1.0));
        // blow-up toward the lower boundary, with positive sign
        let near = log_derivative_x(&SpaceTimePoint { x: 1e-4, t: 1.0 }, EPS).unwrap();
        assert!(near > 1e3);
        assert!(log_derivative_x(&SpaceTimePoint { x: 0.0, t: 1.0 }, EPS).is_err());
    }

    #[test]
    fn scaled_phi0_boundaries_and_small_c_ratio() {
        let eps = 1e-14;
        for &c in &[0.3, 0.05] {
            for &t in &[1.0, 5.0] {
                assert!(phi0_scaled(c, &SpaceTimePoint { x: 0.0, t }, eps).unwrap().abs() <= 1e-300);
                // zero at x = ct, relative to the interior scale
                let b = phi0_scaled_log(c, &SpaceTimePoint { x: c * t, t }, eps).unwrap();
                let mid = phi0_scaled_log(c, &SpaceTimePoint { x: c * t / 2.0, t }, eps).unwrap();
                assert!(b.sign == 0.0 || b.ln_abs < mid.ln_abs + (1e-10f64).ln());
            }
        }
        // ratio limit toward the interval kernel factor; the rate is O(c)
        // with constant ~ pi^2 t^2 / 2u^3, so 1e-3 needs c ~ 1e-4
        let (x, u, t) = (0.5, 1.0, 1.0);
        let y = 0.7;
        let want = ((PI * y / u).sin() / (PI * x / u).sin()) * (PI * PI * t / (2.0 * u * u)).exp();
        let ratio_at = |c: f64| {
            let num = phi0_scaled_log(c, &SpaceTimePoint { x: y, t: t + u / c }, eps).unwrap();
            let den = phi0_scaled_log(c, &SpaceTimePoint { x, t: u / c }, eps).unwrap();
            num.div(den).to_f64()
        };
        assert!((ratio_at(1e-2) - want).abs() <= 6e-2 * want.abs());
        assert!((ratio_at(1e-4) - want).abs() <= 1e-3 * want.abs());
    }

    #[test]
    fn character_ratio_limit() {
        let (t, x, a) = (1.0, 0.5, 1.0);
        let (ratio, limit) = char_limit_check(400, t, x, a).unwrap();
        assert!((ratio - limit).abs() <= 1e-2, "{ratio} vs {limit}");
        let (r0, l0) = char_limit_check(100, t, x, 0.0).unwrap();
        assert_eq!((r0, l0), (1.0, 1.0));
        // the monotonicity scan sits off the midline, where the O(1/n)
        // term is ~1e-6 instead of below f64 noise
        let mut last = f64::INFINITY;
        for &n in &[100u32, 200, 400] {
            let (r, l) = char_limit_check(n, t, 0.3, a).unwrap();
            let d = (r - l).abs();
            assert!(d < last, "n={n}: {d} !< {last}");
            last = d;
        }
    }

    #[test]
    fn sinh_overflow_policy() {
        let p = SpaceTimePoint { x: 0.4, t: 0.01 };
        // a = n pi / t with tiny t overflows the generic prefactor
        assert!(matches!(
            phi(PI / 0.01, &p, EPS),
            Err(Error::SinhOverflow(_))
        ));
        // the factorized route stays finite in log space
        let v = phi_factorized_log(1, &p, EPS).unwrap();
        assert!(v.ln_abs.is_finite());
    }
}
