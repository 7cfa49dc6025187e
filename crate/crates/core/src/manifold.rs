//! Phase update for a fixed beamformer.
//!
//! The feasible set of `v` is a product of `M + 1` unit circles. Each
//! path-following round replaces the rate `Upsilon(v)` by a minorant
//! `Upsilon_hat` tight at the anchor and climbs it with an accelerated
//! Riemannian method: an interpolated point `q`, a geodesic gradient step from
//! `q`, and an auxiliary sequence `d` that carries the momentum.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::objective::{LeakageV, LogMajorant, RateMinorant, SecrecyContext};
use crate::{CVector, Complex64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Q2Options {
    pub tolerance: f64,
    pub max_pfp_rounds: usize,
    pub max_inner_iters: usize,
    /// Shrinkage parameter of the accelerated scheme.
    pub beta: f64,
    /// Step `S = step_fraction / L_g`.
    pub step_fraction: f64,
    /// Step halvings allowed when a step fails to increase the surrogate.
    pub max_backtracks: usize,
}

impl Default for Q2Options {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_pfp_rounds: 50,
            max_inner_iters: 500,
            beta: 0.1,
            step_fraction: 0.9,
            max_backtracks: 40,
        }
    }
}

/// `grad - Re(grad o conj(z)) o z`: the tangential part of a Euclidean gradient.
pub fn riemannian_grad(egrad: &CVector, z: &CVector) -> CVector {
    CVector::from_fn(z.len(), |m, _| {
        let r = (egrad[m] * z[m].conj()).re;
        egrad[m] - z[m] * r
    })
}

/// Per-entry geodesic `z_m cos|c_m| + (c_m/|c_m|) sin|c_m|`.
pub fn exp_map(z: &CVector, c: &CVector) -> CVector {
    CVector::from_fn(z.len(), |m, _| {
        let r = c[m].norm();
        let p = if r == 0.0 {
            z[m]
        } else {
            z[m] * r.cos() + c[m] * (r.sin() / r)
        };
        p / p.norm()
    })
}

/// Per-entry inverse of [`exp_map`]: `i a_m z_m` with `a_m` the principal
/// argument of `d_m conj(z_m)`. Antipodal entries take `a_m = +pi`.
pub fn inv_exp_map(z: &CVector, d: &CVector) -> CVector {
    CVector::from_fn(z.len(), |m, _| {
        let mut a = (d[m] * z[m].conj()).arg();
        if a <= -PI {
            a = PI;
        }
        Complex64::new(0.0, a) * z[m]
    })
}

/// Entries where `d_m = -z_m` and the inverse map had to pick a branch.
pub fn antipodal_entries(z: &CVector, d: &CVector) -> Vec<usize> {
    (0..z.len()).filter(|&m| (d[m] + z[m]).norm() < 1e-12).collect()
}

/// Minorant of `Upsilon` at anchor `v_t` for fixed `w`, with `a = A_k w`,
/// `s = v^H a` and `c = v_t^H a`.
#[derive(Debug, Clone)]
pub struct UpsilonSurrogate {
    pub a: CVector,
    pub rate: RateMinorant,
    pub leak: LeakageV,
    pub majorant: LogMajorant,
}

/// `Upsilon(v) = log2((1 + |v^H A_k w|^2 / sigma^2) / (1 + L))`.
pub fn upsilon(ctx: &SecrecyContext, w: &CVector, v: &CVector) -> f64 {
    ctx.rate(w, v)
}

pub fn build_upsilon_surrogate(ctx: &SecrecyContext, w: &CVector, v_t: &CVector) -> UpsilonSurrogate {
    let a = &ctx.eff.a * w;
    let leak = ctx.leakage_in_v(w);
    let lt = leak.value(v_t);
    UpsilonSurrogate {
        rate: RateMinorant::new(v_t.dotc(&a), ctx.sigma2),
        a,
        leak,
        majorant: LogMajorant { lt },
    }
}

impl UpsilonSurrogate {
    pub fn value(&self, v: &CVector) -> f64 {
        self.rate.value(v.dotc(&self.a)) - self.majorant.value(self.leak.value(v))
    }

    pub fn value_grad(&self, v: &CVector) -> (f64, CVector) {
        let s = v.dotc(&self.a);
        let (l, gl) = self.leak.value_grad(v);
        let val = self.rate.value(s) - self.majorant.value(l);
        let grad = &self.a * self.rate.coef(s).conj() - gl * Complex64::from(self.majorant.slope());
        (val, grad)
    }

    pub fn euclidean_grad(&self, v: &CVector) -> CVector {
        self.value_grad(v).1
    }

    /// Tangential gradient with the trailing direct-path entry held at 1.
    pub fn tangent_grad(&self, v: &CVector) -> CVector {
        let mut g = riemannian_grad(&self.euclidean_grad(v), v);
        let last = g.len() - 1;
        g[last] = Complex64::new(0.0, 0.0);
        g
    }

    /// Lipschitz bound for the Riemannian gradient over the reflecting
    /// entries (the trailing entry is fixed).
    ///
    /// Along a tangent direction the Riemannian Hessian is the Euclidean one
    /// minus `Re(egrad_m conj z_m)` per entry, so the bound is the Euclidean
    /// curvature plus the largest reflecting entry of the Euclidean gradient
    /// over the whole manifold (using `|v^H a| <= ||a||_1`).
    pub fn lipschitz(&self) -> f64 {
        let m = self.a.len() - 1;
        let slope = self.majorant.slope();
        let a_l1: f64 = self.a.iter().map(|x| x.norm()).sum();
        let coef_max = 2.0 * self.rate.xhat.norm() / (self.rate.sigma2 * LN_2) + self.rate.curvature() * a_l1;
        let leak_entry = match &self.leak {
            LeakageV::Diagonal { d, .. } => d.iter().take(m).map(|x| 2.0 * x).fold(0.0, f64::max),
            LeakageV::RankOne { c, scale } => {
                let c_l1: f64 = c.iter().map(|x| x.norm()).sum();
                c.iter().take(m).map(|x| 2.0 * scale * x.norm() * c_l1).fold(0.0, f64::max)
            }
        };
        let a_max = self.a.iter().take(m).map(|x| x.norm()).fold(0.0, f64::max);
        let a_sq: f64 = self.a.iter().take(m).map(|x| x.norm_sqr()).sum();
        let euclidean = self.rate.curvature() * a_sq + self.leak.curvature_bound() * slope;
        euclidean + a_max * coef_max + slope * leak_entry
    }

    /// Smallest per-entry concavity of the signal penalty, `min_m c |a_m|^2`.
    pub fn concavity(&self) -> f64 {
        let c = self.rate.curvature();
        self.a.iter().map(|x| c * x.norm_sqr()).fold(f64::INFINITY, f64::min)
    }
}

/// Iterates of the accelerated scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldState {
    pub z: CVector,
    pub d: CVector,
    pub q: CVector,
    pub step: f64,
    pub beta: f64,
    pub u_g: f64,
    pub l_g: f64,
    pub value: f64,
    /// Steps where momentum was dropped.
    pub fallbacks: usize,
}

impl ManifoldState {
    pub fn new(surr: &UpsilonSurrogate, z0: &CVector, opts: &Q2Options) -> Self {
        let l_g = surr.lipschitz().max(f64::MIN_POSITIVE);
        let u_g = surr.concavity().clamp(1e-8 * l_g, l_g);
        Self {
            z: z0.clone(),
            d: z0.clone(),
            q: z0.clone(),
            step: opts.step_fraction / l_g,
            beta: opts.beta,
            u_g,
            l_g,
            value: surr.value(z0),
            fallbacks: 0,
        }
    }
}

fn momentum_points(surr: &UpsilonSurrogate, st: &ManifoldState, d: &CVector) -> (CVector, CVector, CVector) {
    let (beta, u, s) = (st.beta, st.u_g, st.step);
    let rho = (beta * beta + 4.0 * (1.0 + beta) * u * s).sqrt();
    let q = exp_map(&st.z, &(inv_exp_map(&st.z, d) * Complex64::from((rho - beta) / (2.0 + rho + beta))));
    let gq = surr.tangent_grad(&q);
    let d_next = exp_map(
        &q,
        &(inv_exp_map(&q, d) * Complex64::from((2.0 - rho + beta) / (2.0 * (1.0 + beta)))
            + &gq * Complex64::from((rho + beta) / (2.0 * u * (1.0 + beta)))),
    );
    let z_next = exp_map(&q, &(&gq * Complex64::from(s)));
    (q, d_next, z_next)
}

/// One accelerated step. If it lowers the surrogate, the step is retried from
/// `z` without momentum and the step size is halved until it does not.
pub fn accelerated_step(surr: &UpsilonSurrogate, st: &ManifoldState, opts: &Q2Options) -> Result<ManifoldState> {
    let mut next = st.clone();
    let (q, d, z) = momentum_points(surr, st, &st.d);
    let val = surr.value(&z);
    if !val.is_finite() {
        return Err(Error::NonFinite {
            stage: "accelerated_step",
            iteration: 0,
            dump: format!("z={:?} d={:?}", st.z.as_slice(), st.d.as_slice()),
        });
    }
    if val >= st.value {
        next.q = q;
        next.d = d;
        next.z = z;
        next.value = val;
        return Ok(next);
    }
    next.fallbacks += 1;
    for _ in 0..=opts.max_backtracks {
        let (q, d, z) = momentum_points(surr, &next, &st.z);
        let val = surr.value(&z);
        if val >= st.value {
            next.q = q;
            next.d = d;
            next.z = z;
            next.value = val;
            return Ok(next);
        }
        next.step *= 0.5;
    }
    next.q = st.z.clone();
    next.d = st.z.clone();
    Ok(next)
}

#[derive(Debug, Clone)]
pub struct Q2Result {
    pub v: CVector,
    /// `Upsilon(v)` in bits/s/Hz.
    pub objective: f64,
    /// Objective at the start and after every path-following round.
    pub trace: Vec<f64>,
    /// Surrogate values of every inner solve, in call order.
    pub inner_traces: Vec<Vec<f64>>,
    pub inner_iters: Vec<usize>,
    pub fallbacks: usize,
    pub converged: bool,
}

impl Q2Result {
    pub fn total_inner_iters(&self) -> usize {
        self.inner_iters.iter().sum()
    }
}

fn relative_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(f64::MIN_POSITIVE)
}

/// Maximizes the surrogate from the anchor; returns the final state, the
/// trace of surrogate values and the iteration count.
pub fn climb_surrogate(surr: &UpsilonSurrogate, z0: &CVector, opts: &Q2Options) -> Result<(ManifoldState, Vec<f64>, usize)> {
    let mut st = ManifoldState::new(surr, z0, opts);
    let mut trace = vec![st.value];
    let mut iters = 0;
    for l in 0..opts.max_inner_iters {
        iters = l + 1;
        let old = st.value;
        st = accelerated_step(surr, &st, opts).map_err(|e| match e {
            Error::NonFinite { stage, dump, .. } => Error::NonFinite { stage, iteration: l, dump },
            other => other,
        })?;
        trace.push(st.value);
        if relative_change(st.value, old) < opts.tolerance {
            break;
        }
    }
    Ok((st, trace, iters))
}

/// Solves the phase subproblem for fixed `w`, starting at `v_init`.
pub fn solve_q2(ctx: &SecrecyContext, w: &CVector, v_init: &CVector, opts: &Q2Options) -> Result<Q2Result> {
    let mut v = v_init.clone();
    let mut obj = upsilon(ctx, w, &v);
    let mut trace = vec![obj];
    let mut inner_traces = Vec::new();
    let mut inner_iters = Vec::new();
    let mut fallbacks = 0;
    let mut converged = false;

    for _t in 0..opts.max_pfp_rounds {
        let surr = build_upsilon_surrogate(ctx, w, &v);
        let (st, tr, it) = climb_surrogate(&surr, &v, opts)?;
        inner_traces.push(tr);
        inner_iters.push(it);
        fallbacks += st.fallbacks;
        let new_obj = upsilon(ctx, w, &st.z);
        if !(new_obj >= obj) {
            converged = true;
            break;
        }
        let done = relative_change(new_obj, obj) < opts.tolerance;
        v = st.z;
        obj = new_obj;
        trace.push(obj);
        if done {
            converged = true;
            break;
        }
    }

    Ok(Q2Result {
        v,
        objective: obj,
        trace,
        inner_traces,
        inner_iters,
        fallbacks,
        converged,
    })
}
