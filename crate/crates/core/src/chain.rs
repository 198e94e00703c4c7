//! The character-tilted random walk on integral weights and the Markov
//! chain on dominant weights, with three views of the same kernel: the
//! full-depth transition row built from tensor decompositions, a sampler,
//! and an exact closed form for the row projected to (level, x) in which
//! the Euler-product factors cancel (no depth truncation at all).

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::characters::{self, SeriesControl};
use crate::error::{Error, Result};
use crate::numerics::{sum_scaled_exp, KahanSum, SignedLog};
use crate::series;
use crate::tensor;
use crate::weights::{Weight, LAMBDA0};

/// Real tilt h = (h1*alpha_1 + h2*Lambda_0)/2; the main-theorem
/// specialization is h1 = 0, h2 = 4/n.
#[derive(Debug, Clone, Copy)]
pub struct TiltVector {
    pub h1: f64,
    pub h2: f64,
}

impl TiltVector {
    pub fn flat(h2: f64) -> Self {
        TiltVector { h1: 0.0, h2 }
    }

    /// y = h2/2, the delta-direction decay rate
    pub fn y(&self) -> f64 {
        self.h2 / 2.0
    }
}

/// The tilted increment law on the weights of the basic module:
/// P(k, s) proportional to p(s) e^{k h1 - (h2/2)(k^2 + s)}, factorized as
/// g(k) * r(s). g is tabulated; r is sampled exactly through the
/// geometric part-count representation of the Euler product, so no p(s)
/// table is needed beyond the exact range.
#[derive(Debug, Clone)]
pub struct StepDistribution {
    pub tilt: TiltVector,
    pub k_cut: i64,
    /// depth bound with tail mass below the build tolerance (diagnostic)
    pub s_cut: i64,
    /// truncated mass outside the k and part-size cuts
    pub defect: f64,
    /// g(k) for k in [-k_cut, k_cut], normalized
    k_probs: Vec<f64>,
    k_cdf: Vec<f64>,
    /// q^m for part sizes m = 1..=m_cut, q = e^{-h2/2}
    part_q: Vec<f64>,
}

pub fn build_step_distribution(tilt: TiltVector, eps: f64) -> Result<StepDistribution> {
    if tilt.h2 <= 0.0 {
        return Err(Error::BadTilt(tilt.h2));
    }
    let y = tilt.y();
    let k_cut = (tilt.h1.abs() / (2.0 * y) + ((1.0 / eps).ln() / y).sqrt()).ceil() as i64 + 2;
    let mut k_probs: Vec<f64> = (-k_cut..=k_cut)
        .map(|k| {
            let kf = k as f64;
            (kf * tilt.h1 - y * kf * kf).exp()
        })
        .collect();
    let norm: f64 = k_probs.iter().sum();
    // k-tail bound: next term over the one-sided geometric minorant
    let kf = (k_cut + 1) as f64;
    let defect_k = 2.0 * (kf * tilt.h1.abs() - y * kf * kf).exp()
        / (1.0 - (-y).exp()).max(f64::MIN_POSITIVE)
        / norm;
    for p in &mut k_probs {
        *p /= norm;
    }
    let mut k_cdf = Vec::with_capacity(k_probs.len());
    let mut acc = KahanSum::new();
    for &p in &k_probs {
        acc.add(p);
        k_cdf.push(acc.value());
    }
    // part sizes: P(part of size m appears) = q^m; cut where the union
    // bound over the neglected sizes is below eps
    let q = (-y).exp();
    let m_cut = ((1.0 / eps).ln() / y).ceil() as usize + 2;
    let part_q: Vec<f64> = (1..=m_cut).map(|m| q.powi(m as i32)).collect();
    let defect_s = q.powi(m_cut as i32 + 1) / (1.0 - q);
    let defect = defect_k + defect_s;
    Ok(StepDistribution {
        tilt,
        k_cut,
        s_cut: depth_cut_for(y, eps),
        defect,
        k_probs,
        k_cdf,
        part_q,
    })
}

impl StepDistribution {
    /// analytic k-marginal
    pub fn k_prob(&self, k: i64) -> f64 {
        if k.abs() > self.k_cut {
            0.0
        } else {
            self.k_probs[(k + self.k_cut) as usize]
        }
    }

    /// analytic mean of s: sum_m m q^m / (1 - q^m)
    pub fn s_mean(&self) -> f64 {
        self.part_q
            .iter()
            .enumerate()
            .map(|(i, &qm)| (i + 1) as f64 * qm / (1.0 - qm))
            .sum()
    }

    /// analytic variance of k
    pub fn k_variance(&self) -> f64 {
        let mean: f64 = self
            .k_probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (i as i64 - self.k_cut) as f64 * p)
            .sum();
        self.k_probs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let k = (i as i64 - self.k_cut) as f64;
                (k - mean) * (k - mean) * p
            })
            .sum()
    }
}

/// One increment Lambda_0 + k alpha_1 - (k^2 + s) delta from the tilted
/// law: k by inverse CDF, s by exact geometric part counts.
pub fn sample_walk_step<R: Rng>(dist: &StepDistribution, rng: &mut R) -> Weight {
    let u: f64 = rng.gen();
    let idx = dist.k_cdf.partition_point(|&c| c < u);
    let k = idx.min(dist.k_probs.len() - 1) as i64 - dist.k_cut;
    let mut s = 0i64;
    for (i, &qm) in dist.part_q.iter().enumerate() {
        let m = (i + 1) as i64;
        // geometric count of parts of size m: P(j) = (1 - q^m) q^{m j}
        let v: f64 = rng.gen();
        let j = (v.ln() / qm.ln()).floor() as i64;
        s += m * j.max(0);
    }
    Weight::new(1, 2 * k, -(k * k + s))
}

/// Smallest relative depth cut D whose neglected row mass, bounded by
/// sum_{d>D} p(d)(2 sqrt(d)+2) e^{-y d} with ln p(d) <= pi sqrt(2d/3),
/// is below eps.
pub fn depth_cut_for(y: f64, eps: f64) -> i64 {
    let term = |d: f64| -> f64 { -y * d + std::f64::consts::PI * (2.0 * d / 3.0).sqrt() + (2.0 * d.sqrt() + 2.0).ln() };
    let mut d = 0f64;
    // move past the maximum of the bound, then walk until the remaining
    // geometric-dominated tail is small
    loop {
        let t = term(d);
        if t < eps.ln() && term(d + 1.0) < t {
            // crude tail sum
            let mut tail = 0.0;
            let mut dd = d;
            loop {
                let t = term(dd).exp();
                tail += t;
                if t < eps * 1e-3 || dd > d + 10_000.0 {
                    break;
                }
                dd += 1.0;
            }
            if tail < eps {
                return d as i64;
            }
        }
        d += 1.0;
        if d > 1e6 {
            return d as i64;
        }
    }
}

/// A normalized transition row of the dominant-weight chain.
#[derive(Debug, Clone)]
pub struct TransitionRow {
    pub state: Weight,
    /// (target, probability, multiplicity)
    pub targets: Vec<(Weight, f64, u64)>,
    /// |1 - raw row sum| before renormalization
    pub defect: f64,
}

/// Full-depth transition row: probability of beta is
/// m_state(beta) ch_beta(h) / (ch_state(h) ch_{Lambda_0}(h)).
pub fn transition_row(
    state: &Weight,
    tilt: &TiltVector,
    depth_cut: i64,
    ctrl: &SeriesControl,
) -> Result<TransitionRow> {
    if tilt.h2 <= 0.0 {
        return Err(Error::BadTilt(tilt.h2));
    }
    let decomp = tensor::decompose(state, depth_cut)?;
    let ch_state = characters::char_eval_tilt_log(state, tilt.h1, tilt.h2, ctrl)?;
    let ch_basic = characters::char_eval_tilt_log(&LAMBDA0, tilt.h1, tilt.h2, ctrl)?;
    let denom = ch_state.mul(ch_basic);
    let mut targets = Vec::with_capacity(decomp.entries.len());
    let mut sum = KahanSum::new();
    for (beta, &m) in &decomp.entries {
        let p = characters::char_eval_tilt_log(beta, tilt.h1, tilt.h2, ctrl)?
            .div(denom)
            .scale(m as f64)
            .to_f64();
        sum.add(p);
        targets.push((*beta, p, m));
    }
    let defect = (1.0 - sum.value()).abs();
    if defect > 1e-6 {
        return Err(Error::DepthCutTooSmall {
            defect,
            limit: 1e-6,
            depth_cut,
        });
    }
    let norm = sum.value();
    for t in &mut targets {
        t.1 /= norm;
    }
    Ok(TransitionRow {
        state: *state,
        targets,
        defect,
    })
}

/// Exact projected row for a flat tilt (h1 = 0): the probability that the
/// alpha1-index moves by 2k from a state with coordinates (level, x).
/// Closed form with all partition/Euler factors cancelled:
/// q(k) = (N_{level+1, x+2k} / N_{level, x}) * W_k / theta(y), where N is
/// the a->0 character numerator series and W_k the alternating Weyl sum
/// of Gaussian terms. Returns (k, probability) pairs over the dominant
/// range, which carries all of the mass exactly.
pub fn projected_transition_row(
    level: i64,
    x: i64,
    y: f64,
    ctrl: &SeriesControl,
) -> Result<Vec<(i64, f64)>> {
    if y <= 0.0 {
        return Err(Error::NonPositiveY(y));
    }
    if x < 0 || x > level {
        return Err(Error::NotDominant(format!("(level {level}, x {x})")));
    }
    if level < 1 {
        return Err(Error::UnsupportedLevel(level));
    }
    let n_state = series::theta_lin(y * (x + 1) as f64 / 2.0, y * (level + 2) as f64 / 2.0, ctrl.eps).value;
    // theta(y) = sum_k e^{-y k^2}, all terms positive
    let kmax = ((1.0 / ctrl.eps).ln() / y).sqrt().ceil() as i64 + 2;
    let mut theta = KahanSum::new();
    for k in -kmax..=kmax {
        theta.add((-y * (k * k) as f64).exp());
    }
    let mut out = Vec::new();
    let mut total = KahanSum::new();
    let k_lo = -(x / 2) - (x % 2);
    let k_hi = (level + 1 - x) / 2 + (level + 1 - x) % 2;
    for k in k_lo..=k_hi {
        let xt = x + 2 * k;
        if xt < 0 || xt > level + 1 {
            continue;
        }
        let w = weyl_row_weight(level, x, k, y);
        if w.sign == 0.0 {
            continue;
        }
        let n_target =
            series::theta_lin(y * (xt + 1) as f64 / 2.0, y * (level + 3) as f64 / 2.0, ctrl.eps).value;
        let p = n_target.div(n_state).mul(w).to_f64() / theta.value();
        total.add(p);
        out.push((k, p));
    }
    let defect = (1.0 - total.value()).abs();
    if defect > 1e-8 {
        return Err(Error::DepthCutTooSmall {
            defect,
            limit: 1e-8,
            depth_cut: -1,
        });
    }
    // exact renormalization of the residual rounding
    for t in &mut out {
        t.1 /= total.value();
    }
    Ok(out)
}

/// W_k = sum_j [e^{-y c+_j} - e^{-y c-_j}] with
/// c+_j = j(x+1) + j^2(n+2) + (k - j(n+2))^2,
/// c-_j = -j(x+1) + j^2(n+2) + (x+1+k - j(n+2))^2.
fn weyl_row_weight(level: i64, x: i64, k: i64, y: f64) -> SignedLog {
    let p = x + 1;
    let q = level + 2;
    let mut terms: Vec<(f64, f64)> = Vec::new();
    let mut j = 0i64;
    loop {
        let mut alive = false;
        let js: &[i64] = if j == 0 { &[0] } else { &[j, -j] };
        for &jj in js {
            let m = k - jj * q;
            let c_plus = jj * p + jj * jj * q + m * m;
            let mp = p + k - jj * q;
            let c_minus = -jj * p + jj * jj * q + mp * mp;
            let e_plus = -y * c_plus as f64;
            let e_minus = -y * c_minus as f64;
            if e_plus > -746.0 {
                terms.push((1.0, e_plus));
                alive = true;
            }
            if e_minus > -746.0 {
                terms.push((-1.0, e_minus));
                alive = true;
            }
        }
        if !alive && j > 0 {
            break;
        }
        j += 1;
    }
    sum_scaled_exp(&terms)
}

/// A sampled trajectory of the dominant-weight chain.
#[derive(Debug, Clone)]
pub struct ChainPath {
    pub states: Vec<Weight>,
    pub tilt: TiltVector,
    pub seed: u64,
}

/// Samples the full-depth chain row by row. Rows are memoized by
/// (level, alpha1_index): the transition probabilities and relative target
/// offsets do not depend on the absolute delta-depth of the state.
pub fn sample_chain(
    start: &Weight,
    tilt: &TiltVector,
    steps: usize,
    depth_cut: i64,
    seed: u64,
) -> Result<ChainPath> {
    let mut cache: HashMap<(i64, i64), Vec<(i64, i64, f64)>> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_chain_with_cache(start, tilt, steps, depth_cut, seed, &mut rng, &mut cache)
}

pub(crate) fn sample_chain_with_cache(
    start: &Weight,
    tilt: &TiltVector,
    steps: usize,
    depth_cut: i64,
    seed: u64,
    rng: &mut ChaCha8Rng,
    cache: &mut HashMap<(i64, i64), Vec<(i64, i64, f64)>>,
) -> Result<ChainPath> {
    if !start.is_dominant() {
        return Err(Error::NotDominant(start.to_string()));
    }
    let ctrl = SeriesControl::default();
    let mut states = Vec::with_capacity(steps + 1);
    let mut current = *start;
    states.push(current);
    for _ in 0..steps {
        let key = (current.level, current.alpha1_index);
        if !cache.contains_key(&key) {
            let base = Weight::new(current.level, current.alpha1_index, 0);
            let row = transition_row(&base, tilt, depth_cut, &ctrl)?;
            let rel: Vec<(i64, i64, f64)> = row
                .targets
                .iter()
                .map(|(b, p, _)| (b.alpha1_index - base.alpha1_index, b.delta_depth, *p))
                .collect();
            cache.insert(key, rel);
        }
        let row = &cache[&key];
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = row.len() - 1;
        for (i, &(_, _, p)) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = i;
                break;
            }
        }
        let (dx, dd, _) = row[chosen];
        current = Weight::new(current.level + 1, current.alpha1_index + dx, current.delta_depth + dd);
        states.push(current);
    }
    Ok(ChainPath {
        states,
        tilt: *tilt,
        seed,
    })
}

/// Immutable table of projected rows for the scaled chain: every
/// (level, x) reachable from the start in the given number of steps.
pub struct ProjectedKernel {
    start_level: i64,
    steps: usize,
    /// rows[step][(x - x_min) / 2] = cdf over k offsets, paired with k_lo
    rows: HashMap<(i64, i64), (Vec<f64>, i64)>,
}

impl ProjectedKernel {
    pub fn build(start_level: i64, start_x: i64, steps: usize, y: f64) -> Result<Self> {
        let ctrl = SeriesControl::default();
        let mut rows = HashMap::new();
        for step in 0..steps {
            let level = start_level + step as i64;
            // x keeps the parity of the start
            let mut x = start_x % 2;
            while x <= level {
                let row = projected_transition_row(level, x, y, &ctrl)?;
                let k_lo = row.first().map(|&(k, _)| k).unwrap_or(0);
                let mut cdf = Vec::with_capacity(row.len());
                let mut acc = KahanSum::new();
                for &(_, p) in &row {
                    acc.add(p);
                    cdf.push(acc.value());
                }
                rows.insert((level, x), (cdf, k_lo));
                x += 2;
            }
        }
        Ok(ProjectedKernel {
            start_level,
            steps,
            rows,
        })
    }

    /// One full projected trajectory (level, x) from x0 at the start level.
    pub fn sample_path<R: Rng>(&self, x0: i64, rng: &mut R) -> Vec<(i64, i64)> {
        let mut out = Vec::with_capacity(self.steps + 1);
        let mut x = x0;
        out.push((self.start_level, x));
        for s in 0..self.steps {
            let level = self.start_level + s as i64;
            x = self.step(level, x, rng);
            out.push((level + 1, x));
        }
        out
    }

    fn step<R: Rng>(&self, level: i64, x: i64, rng: &mut R) -> i64 {
        let (cdf, k_lo) = &self.rows[&(level, x)];
        let u: f64 = rng.gen();
        let idx = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
        x + 2 * (k_lo + idx as i64)
    }

    /// Exact one-step propagation of a distribution over x at `level`.
    pub fn propagate(&self, level: i64, dist: &HashMap<i64, f64>) -> HashMap<i64, f64> {
        let mut out: HashMap<i64, f64> = HashMap::new();
        for (&x, &p) in dist {
            let (cdf, k_lo) = &self.rows[&(level, x)];
            let mut last = 0.0;
            for (i, &c) in cdf.iter().enumerate() {
                let q = c - last;
                last = c;
                if q > 0.0 {
                    *out.entry(x + 2 * (k_lo + i as i64)).or_insert(0.0) += p * q;
                }
            }
        }
        out
    }
}

/// Monte-Carlo sample of the scaled readout (1/n) * alpha1_index after
/// [nt] steps of the chain started at [nu] Lambda_0 + [xn] (1/2) alpha_1
/// with tilt h = (2/n) Lambda_0, using the exact projected kernel.
/// Per-path RNG streams are derived from the master seed, so the result
/// is independent of the parallel schedule.
pub fn scaled_chain_marginal(
    n: u32,
    t: f64,
    x: f64,
    u: f64,
    paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(0.0 < x && x < u) {
        return Err(Error::OutsideDomain(format!("x = {x} not in (0, u = {u})")));
    }
    if n < 10 {
        return Err(Error::Config(format!("n = {n} below minimum 10")));
    }
    let nf = n as f64;
    let start_level = (nf * u).floor() as i64;
    let start_x = (nf * x).floor() as i64;
    let steps = (nf * t).floor() as usize;
    let y = 2.0 / nf;
    let kernel = ProjectedKernel::build(start_level, start_x, steps, y)?;
    let out: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(path as u64 + 1);
            let mut level = start_level;
            let mut xv = start_x;
            for _ in 0..steps {
                xv = kernel.step(level, xv, &mut rng);
                level += 1;
            }
            xv as f64 / nf
        })
        .collect();
    Ok(out)
}

/// Exact marginal of the scaled readout: deterministic propagation of the
/// full distribution through the projected kernel. Returns (z, probability)
/// pairs.
pub fn scaled_chain_exact_marginal(n: u32, t: f64, x: f64, u: f64) -> Result<Vec<(f64, f64)>> {
    if !(0.0 < x && x < u) {
        return Err(Error::OutsideDomain(format!("x = {x} not in (0, u = {u})")));
    }
    let nf = n as f64;
    let start_level = (nf * u).floor() as i64;
    let start_x = (nf * x).floor() as i64;
    let steps = (nf * t).floor() as usize;
    let y = 2.0 / nf;
    let kernel = ProjectedKernel::build(start_level, start_x, steps, y)?;
    let mut dist: HashMap<i64, f64> = HashMap::new();
    dist.insert(start_x, 1.0);
    for step in 0..steps {
        dist = kernel.propagate(start_level + step as i64, &dist);
    }
    let mut out: Vec<(f64, f64)> = dist.into_iter().map(|(xv, p)| (xv as f64 / nf, p)).collect();
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(out)
}
