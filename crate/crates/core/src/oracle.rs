//! Reference implementations for verification. Nothing here calls the code
//! path it checks: the outage is sampled from the raw channels, the search
//! objective is coded from the channel set directly, and the plain solvers
//! have their own loops.

use std::f64::consts::TAU;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::manifold::{exp_map, Q2Options, UpsilonSurrogate};
use crate::pg::{D1Options, SurrogatePair};
use crate::rng::{complex_normal, complex_normal_vector, shard, stream, Purpose};
use crate::types::PhaseVector;
use crate::{CVector, Complex64};

/// Central-difference gradient in the crate's convention
/// (`df/dRe + i df/dIm` per coordinate).
pub fn fd_gradient<F: Fn(&CVector) -> f64>(f: F, x: &CVector, h: f64) -> CVector {
    let mut g = CVector::zeros(x.len());
    let mut probe = x.clone();
    for m in 0..x.len() {
        let orig = probe[m];
        probe[m] = orig + Complex64::new(h, 0.0);
        let fp = f(&probe);
        probe[m] = orig - Complex64::new(h, 0.0);
        let fm = f(&probe);
        probe[m] = orig + Complex64::new(0.0, h);
        let gp = f(&probe);
        probe[m] = orig - Complex64::new(0.0, h);
        let gm = f(&probe);
        probe[m] = orig;
        g[m] = Complex64::new((fp - fm) / (2.0 * h), (gp - gm) / (2.0 * h));
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub p: f64,
    /// Half-width of the 95% normal-approximation interval.
    pub ci_half_width: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn contains(&self, x: f64) -> bool {
        (x - self.p).abs() <= self.ci_half_width
    }
}

/// Monte Carlo outage of eavesdropper `j`: draws `g_r`, `g_d` from their
/// Gaussians and counts `log2(1 + SNR_j) > D`. Samples are split over 64
/// shards with independent streams.
pub fn mc_sop(
    cs: &ChannelSet,
    j: usize,
    w: &CVector,
    theta: &PhaseVector,
    d: f64,
    n_samples: usize,
    seed: u64,
) -> McEstimate {
    const SHARDS: usize = 64;
    let refl = theta.reflection();
    let hw = &cs.h * w;
    let reflected = CVector::from_fn(cs.n_elements(), |m, _| refl[m] * hw[m]);
    let sr = (cs.alpha_1 * cs.alpha_r_eve[j]).sqrt();
    let sd = cs.alpha_d_eve[j].sqrt();
    let hits: usize = (0..SHARDS)
        .into_par_iter()
        .map(|s| {
            let n = n_samples / SHARDS + usize::from(s < n_samples % SHARDS);
            let mut rng = shard(seed, j as u64, s as u64);
            let mut count = 0;
            for _ in 0..n {
                let mut y = Complex64::new(0.0, 0.0);
                for m in 0..reflected.len() {
                    y += complex_normal(&mut rng, cs.mu_r2[j]).conj() * reflected[m] * sr;
                }
                for k in 0..w.len() {
                    y += complex_normal(&mut rng, cs.mu_d2[j]).conj() * w[k] * sd;
                }
                let snr = y.norm_sqr() / cs.sigma2_eve;
                if (1.0 + snr).log2() > d {
                    count += 1;
                }
            }
            count
        })
        .sum();
    let p = hits as f64 / n_samples as f64;
    McEstimate {
        p,
        ci_half_width: 1.96 * (p * (1.0 - p) / n_samples as f64).sqrt(),
        samples: n_samples,
    }
}

/// Secure EE of pair `(k, j)` coded straight from the channel
/// set, bits/s/Hz/W.
pub fn reference_ee(cfg: &SystemConfig, cs: &ChannelSet, k: usize, j: usize, w: &CVector, theta: &[f64]) -> f64 {
    let hw = &cs.h * w;
    let mut ris = Complex64::new(0.0, 0.0);
    let mut reflected = 0.0;
    for m in 0..cs.n_elements() {
        let t = Complex64::from_polar(1.0, theta[m]);
        ris += cs.h_r[k][m].conj() * t * hw[m];
        reflected += (t * hw[m]).norm_sqr();
    }
    let gain = (cs.alpha_1 * cs.alpha_r[k]).sqrt() * ris + cs.alpha_d[k].sqrt() * cs.h_d[k].dotc(w);
    let snr = gain.norm_sqr() / cs.sigma2_user;
    let kappa1 = cs.alpha_1 * cs.alpha_r_eve[j] * cs.mu_r2[j] / cs.sigma2_eve;
    let kappa2 = cs.alpha_d_eve[j] * cs.mu_d2[j] / cs.sigma2_eve;
    let eve = (kappa1 * reflected + kappa2 * w.norm_squared()) * (1.0 / cfg.sop_bounds[k]).ln();
    let rate = ((1.0 + snr).log2() - (1.0 + eve).log2()).max(0.0);
    let power = w.norm_squared() * cfg.inv_eta
        + cfg.p_a
        + cfg.n_users as f64 * cfg.p_c
        + cfg.n_elements as f64 * cfg.p_s;
    rate / power
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub w: CVector,
    pub theta: Vec<f64>,
    pub objective: f64,
}

/// Random feasible samples, then coordinate polishing of the best `n_starts`.
///
/// Polishing alternates a 256-point grid over each reflection phase with a
/// pattern search on every real and imaginary coordinate of `w`, projected back
/// onto the power ball, and a 1-D search over the beam power.
pub fn multistart_search(
    cfg: &SystemConfig,
    cs: &ChannelSet,
    k: usize,
    j: usize,
    n_starts: usize,
    n_samples: usize,
    seed: u64,
) -> SearchResult {
    let (n, m) = (cs.n_antennas(), cs.n_elements());
    let eval = |w: &CVector, t: &[f64]| reference_ee(cfg, cs, k, j, w, t);
    let mut rng = stream(seed, cs.trial, Purpose::Oracle);
    let mut pool: Vec<SearchResult> = Vec::new();
    for _ in 0..n_samples {
        let dir = complex_normal_vector(&mut rng, n, 1.0);
        let r: f64 = rng.random();
        let w = &dir * Complex64::from((cfg.p_max * r).sqrt() / dir.norm());
        let theta: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..TAU)).collect();
        let objective = eval(&w, &theta);
        pool.push(SearchResult { w, theta, objective });
    }
    pool.sort_by(|a, b| b.objective.total_cmp(&a.objective));
    pool.truncate(n_starts.max(1));

    let project = |w: CVector| {
        let n2 = w.norm_squared();
        if n2 > cfg.p_max {
            w * Complex64::from((cfg.p_max / n2).sqrt())
        } else {
            w
        }
    };
    pool.into_iter()
        .map(|mut s| {
            let mut scale = cfg.p_max.sqrt() * 0.25;
            for _sweep in 0..60 {
                for mi in 0..m {
                    for g in 0..256 {
                        let mut t = s.theta.clone();
                        t[mi] = TAU * g as f64 / 256.0;
                        let val = eval(&s.w, &t);
                        if val > s.objective {
                            s.theta = t;
                            s.objective = val;
                        }
                    }
                }
                for ni in 0..n {
                    for delta in [
                        Complex64::new(scale, 0.0),
                        Complex64::new(-scale, 0.0),
                        Complex64::new(0.0, scale),
                        Complex64::new(0.0, -scale),
                    ] {
                        let mut w = s.w.clone();
                        w[ni] += delta;
                        let w = project(w);
                        let val = eval(&w, &s.theta);
                        if val > s.objective {
                            s.w = w;
                            s.objective = val;
                        }
                    }
                }
                for g in 1..=64 {
                    let f = g as f64 / 64.0;
                    let w = project(&s.w * Complex64::from(f * cfg.p_max.sqrt() / s.w.norm().max(f64::MIN_POSITIVE)));
                    let val = eval(&w, &s.theta);
                    if val > s.objective {
                        s.w = w;
                        s.objective = val;
                    }
                }
                scale *= 0.7;
            }
            s
        })
        .max_by(|a, b| a.objective.total_cmp(&b.objective))
        .expect("at least one start")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlainResult<T> {
    pub x: T,
    pub value: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

fn phi(sp: &SurrogatePair, gamma: f64, w: &CVector) -> Option<f64> {
    let x = sp.value(w);
    (x > 0.0).then(|| 2.0 * gamma * x.sqrt() - gamma * gamma * sp.power.total_power(w))
}

fn phi_grad(sp: &SurrogatePair, gamma: f64, w: &CVector) -> CVector {
    let (x, gx) = sp.value_grad(w);
    gx * Complex64::from(gamma / x.sqrt()) - w * Complex64::from(2.0 * gamma * gamma * sp.power.inv_eta)
}

/// Projected gradient ascent on `Phi` without momentum; same line search and
/// stopping rule as the accelerated solver.
pub fn plain_pg(sp: &SurrogatePair, gamma: f64, x0: &CVector, opts: &D1Options) -> PlainResult<CVector> {
    let arm = &opts.armijo;
    let mut x = x0.clone();
    let mut val = phi(sp, gamma, &x).expect("start inside the domain");
    let mut trace = vec![val];
    let mut last: Option<f64> = None;
    let mut iterations = 0;
    for i in 0..opts.max_inner_iters {
        iterations = i + 1;
        let g = phi_grad(sp, gamma, &x);
        let gn = g.norm();
        let mut s = last.map_or(arm.initial_step * sp.p_max.sqrt() / gn.max(f64::MIN_POSITIVE), |s| 2.0 * s);
        let mut next = None;
        if gn > 0.0 {
            for _ in 0..=arm.max_backtracks {
                let mut c = &x + &g * Complex64::from(s);
                let n2 = c.norm_squared();
                if n2 > sp.p_max {
                    c *= Complex64::from((sp.p_max / n2).sqrt());
                }
                if let Some(p) = phi(sp, gamma, &c) {
                    if p >= val + arm.slope / s * (&c - &x).norm_squared() {
                        next = Some((c, p));
                        break;
                    }
                }
                s *= arm.shrink;
            }
        }
        let old = val;
        if let Some((c, p)) = next {
            x = c;
            val = p;
            last = Some(s);
        }
        trace.push(val);
        if (val - old).abs() / old.abs().max(f64::MIN_POSITIVE) < opts.tolerance {
            break;
        }
    }
    PlainResult { x, value: val, iterations, trace }
}

/// Riemannian gradient ascent `z <- exp_z(S grad)` on the phase surrogate,
/// halving `S` when a step would decrease it.
pub fn plain_riemannian(surr: &UpsilonSurrogate, z0: &CVector, opts: &Q2Options) -> PlainResult<CVector> {
    let mut s = opts.step_fraction / surr.lipschitz().max(f64::MIN_POSITIVE);
    let mut z = z0.clone();
    let mut val = surr.value(&z);
    let mut trace = vec![val];
    let mut iterations = 0;
    for i in 0..opts.max_inner_iters {
        iterations = i + 1;
        let g = surr.tangent_grad(&z);
        let old = val;
        for _ in 0..=opts.max_backtracks {
            let c = exp_map(&z, &(&g * Complex64::from(s)));
            let v = surr.value(&c);
            if v >= val {
                z = c;
                val = v;
                break;
            }
            s *= 0.5;
        }
        trace.push(val);
        if (val - old).abs() / old.abs().max(f64::MIN_POSITIVE) < opts.tolerance {
            break;
        }
    }
    PlainResult { x: z, value: val, iterations, trace }
}

/// One oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub quantity: String,
    pub oracle_value: f64,
    pub library_value: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    /// Passes when the relative error is within `tolerance`.
    pub fn relative(quantity: impl Into<String>, oracle: f64, library: f64, samples: usize, tolerance: f64) -> Self {
        let abs_error = (oracle - library).abs();
        let rel_error = abs_error / oracle.abs().max(f64::MIN_POSITIVE);
        Self {
            quantity: quantity.into(),
            oracle_value: oracle,
            library_value: library,
            abs_error,
            rel_error,
            samples,
            tolerance,
            pass: rel_error <= tolerance,
        }
    }
}

pub fn write_reports<W: Write>(reports: &[OracleReport], out: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for r in reports {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}
