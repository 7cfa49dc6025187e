//! Beamformer update for fixed phases.
//!
//! Three nested loops:
//!
//! * `t`: path-following. The rate `f(w)` is replaced by `R1(w) - R2(w)`, a
//!   concave minorant tight at the anchor `w_t`.
//! * `l`: quadratic transform of `X / P` with `X = R1 - R2`, giving
//!   `Phi(w) = 2 gamma sqrt(X(w)) - gamma^2 P(w)` and the update
//!   `gamma = sqrt(X) / P`.
//! * `i`: projected gradient ascent on `Phi` over the power ball, with
//!   Nesterov momentum and an Armijo line search.

use crate::error::{Error, Result};
use crate::objective::{LeakageW, LogMajorant, RateMinorant, SecrecyContext};
use crate::types::PowerModel;
use crate::{CVector, Complex64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoOptions {
    /// First trial step, in units of `sqrt(p_max) / ||grad||`.
    pub initial_step: f64,
    pub shrink: f64,
    pub slope: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoOptions {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            slope: 1e-4,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D1Options {
    pub tolerance: f64,
    pub max_pfp_rounds: usize,
    pub max_qt_rounds: usize,
    pub max_inner_iters: usize,
    pub armijo: ArmijoOptions,
    /// `false` gives plain projected gradient.
    pub momentum: bool,
}

impl Default for D1Options {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_pfp_rounds: 50,
            max_qt_rounds: 50,
            max_inner_iters: 500,
            armijo: ArmijoOptions::default(),
            momentum: true,
        }
    }
}

/// `R1` and `R2` at a fixed anchor, plus what `Phi` needs.
#[derive(Debug, Clone)]
pub struct SurrogatePair {
    /// `A_k^H v`, so the signal is `h^H w`.
    pub h: CVector,
    pub rate: RateMinorant,
    pub leak: LeakageW,
    pub majorant: LogMajorant,
    pub power: PowerModel,
    pub p_max: f64,
}

pub fn build_surrogate(ctx: &SecrecyContext, v: &CVector, w_t: &CVector) -> SurrogatePair {
    let h = ctx.eff.a.ad_mul(v);
    let leak = ctx.leakage_in_w(v);
    let lt = leak.value(w_t);
    SurrogatePair {
        rate: RateMinorant::new(h.dotc(w_t), ctx.sigma2),
        h,
        leak,
        majorant: LogMajorant { lt },
        power: ctx.power,
        p_max: ctx.p_max,
    }
}

impl SurrogatePair {
    pub fn r1(&self, w: &CVector) -> f64 {
        self.rate.value(self.h.dotc(w))
    }

    pub fn r2(&self, w: &CVector) -> f64 {
        self.majorant.value(self.leak.value(w))
    }

    /// `X = R1 - R2`.
    pub fn value(&self, w: &CVector) -> f64 {
        self.r1(w) - self.r2(w)
    }

    pub fn value_grad(&self, w: &CVector) -> (f64, CVector) {
        let x = self.h.dotc(w);
        let (l, gl) = self.leak.value_grad(w);
        let val = self.rate.value(x) - self.majorant.value(l);
        let grad = &self.h * self.rate.coef(x) - gl * Complex64::from(self.majorant.slope());
        (val, grad)
    }

    /// Surrogate ratio `X / P`.
    pub fn ratio(&self, w: &CVector) -> f64 {
        self.value(w) / self.power.total_power(w)
    }
}

/// `Phi(w) = 2 gamma sqrt(X) - gamma^2 P(w)` and its gradient
/// `gamma grad X / sqrt(X) - 2 gamma^2 w / eta`.
pub fn phi_value_and_gradient(sp: &SurrogatePair, gamma: f64, w: &CVector) -> Result<(f64, CVector)> {
    let (x, gx) = sp.value_grad(w);
    if !(x > 0.0) {
        return Err(Error::SurrogateNonpositive(x));
    }
    let sx = x.sqrt();
    let phi = 2.0 * gamma * sx - gamma * gamma * sp.power.total_power(w);
    let grad = gx * Complex64::from(gamma / sx) - w * Complex64::from(2.0 * gamma * gamma * sp.power.inv_eta);
    Ok((phi, grad))
}

fn phi_value(sp: &SurrogatePair, gamma: f64, w: &CVector) -> Option<f64> {
    let x = sp.value(w);
    (x > 0.0).then(|| 2.0 * gamma * x.sqrt() - gamma * gamma * sp.power.total_power(w))
}

/// Euclidean projection onto `{||x||^2 <= p_max}`.
pub fn project_ball(x: &CVector, p_max: f64) -> CVector {
    let n2 = x.norm_squared();
    if n2 <= p_max {
        x.clone()
    } else {
        x * Complex64::from((p_max / n2).sqrt())
    }
}

/// `a_{i+1}` from `a_i`.
pub fn momentum_next(a: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * a * a).sqrt()) / 2.0
}

fn relative_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(f64::MIN_POSITIVE)
}

/// One inner iteration, for traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgStep {
    pub phi: f64,
    pub step: f64,
    pub grad_norm: f64,
    pub restarted: bool,
}

#[derive(Debug, Clone)]
pub struct PgResult {
    pub x: CVector,
    pub phi: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `Phi` at the start and after every iteration.
    pub phi_trace: Vec<f64>,
    pub steps: Vec<PgStep>,
}

/// Maximizes `Phi` over the power ball from `x0`.
///
/// The extrapolated point is `f = x_i + ((a_{i-1} - 1)/a_i)(x_i - x_{i-1})`.
/// When `f` leaves the domain of `Phi` or scores below `x_i`, momentum is reset
/// and the step is taken from `x_i`, so the returned trace never decreases.
pub fn accelerated_pg(sp: &SurrogatePair, gamma: f64, x0: &CVector, opts: &D1Options) -> Result<PgResult> {
    let (phi0, _) = phi_value_and_gradient(sp, gamma, x0)?;
    let arm = &opts.armijo;
    let mut x = x0.clone();
    let mut x_prev = x0.clone();
    let mut phi_x = phi0;
    let mut a_prev = 1.0;
    let mut last_step: Option<f64> = None;
    let mut trace = vec![phi0];
    let mut steps = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for i in 0..opts.max_inner_iters {
        iterations = i + 1;
        let a = momentum_next(a_prev);
        let mut restarted = false;
        let (f, phi_f, grad) = {
            let beta = if opts.momentum { (a_prev - 1.0) / a } else { 0.0 };
            let cand = if beta > 0.0 {
                Some(&x + (&x - &x_prev) * Complex64::from(beta))
            } else {
                None
            };
            match cand.and_then(|f| match phi_value_and_gradient(sp, gamma, &f) {
                Ok((p, g)) if p >= phi_x => Some((f, p, g)),
                _ => None,
            }) {
                Some(t) => t,
                None => {
                    restarted = beta > 0.0;
                    let (p, g) = phi_value_and_gradient(sp, gamma, &x)?;
                    (x.clone(), p, g)
                }
            }
        };
        if restarted {
            a_prev = 1.0;
        } else {
            a_prev = a;
        }
        let gnorm = grad.norm();
        if !gnorm.is_finite() || !phi_f.is_finite() {
            return Err(Error::NonFinite {
                stage: "accelerated_pg",
                iteration: i,
                dump: format!("phi={phi_f} x={:?}", f.as_slice()),
            });
        }

        let mut s = match last_step {
            Some(s) => 2.0 * s,
            None if gnorm > 0.0 => arm.initial_step * sp.p_max.sqrt() / gnorm,
            None => 0.0,
        };
        let mut accepted = None;
        if gnorm > 0.0 {
            for _ in 0..=arm.max_backtracks {
                let cand = project_ball(&(&f + &grad * Complex64::from(s)), sp.p_max);
                if let Some(p) = phi_value(sp, gamma, &cand) {
                    let moved = (&cand - &f).norm_squared();
                    if p >= phi_f + arm.slope / s * moved {
                        accepted = Some((cand, p));
                        break;
                    }
                }
                s *= arm.shrink;
            }
        }
        let (next, phi_next) = match accepted {
            Some(t) => {
                last_step = Some(s);
                t
            }
            None => (x.clone(), phi_x),
        };
        steps.push(PgStep {
            phi: phi_next,
            step: if last_step.is_some() { s } else { 0.0 },
            grad_norm: gnorm,
            restarted,
        });
        x_prev = std::mem::replace(&mut x, next);
        let old = phi_x;
        phi_x = phi_next;
        trace.push(phi_x);
        if relative_change(phi_x, old) < opts.tolerance {
            converged = true;
            break;
        }
    }

    Ok(PgResult {
        x,
        phi: phi_x,
        iterations,
        converged,
        phi_trace: trace,
        steps,
    })
}

/// Starting beamformer with positive rate, at power `p_max / 4`.
///
/// Rate positivity `|h^H w|^2 / sigma^2 > L(w)` is invariant to scaling `w`, so
/// only the direction matters. Maximum-ratio transmission is tried first, then
/// the direction maximizing `|h^H u|^2 / L(u)`.
pub fn initial_beamformer(ctx: &SecrecyContext, v: &CVector) -> Option<CVector> {
    let h = ctx.eff.a.ad_mul(v);
    let scale = |u: CVector| {
        let n = u.norm();
        (n > 0.0 && n.is_finite()).then(|| u * Complex64::from(ctx.p_max.sqrt() / 2.0 / n))
    };
    let positive = |w: &CVector| ctx.rate(w, v) > 0.0;
    if let Some(w) = scale(h.clone()) {
        if positive(&w) {
            return Some(w);
        }
    }
    let u = match ctx.leakage_in_w(v) {
        LeakageW::Statistical { h: hh, weights, c1, c2 } => {
            let n = h.len();
            let weighted = crate::CMatrix::from_fn(hh.nrows(), n, |r, c| hh[(r, c)] * weights[r]);
            let b = hh.ad_mul(&weighted) * Complex64::from(c1) + crate::CMatrix::identity(n, n) * Complex64::from(c2);
            b.lu().solve(&h)?
        }
        LeakageW::RankOne { g, .. } => {
            let gg = g.norm_squared();
            if gg > 0.0 {
                &h - &g * (g.dotc(&h) / gg)
            } else {
                h.clone()
            }
        }
    };
    scale(u).filter(positive)
}

#[derive(Debug, Clone)]
pub struct D1Result {
    pub w: CVector,
    /// Rate over power at `w`, bits/s/Hz/W.
    pub objective: f64,
    /// Objective at the start and after every path-following round.
    pub trace: Vec<f64>,
    /// `X / P` per quadratic-transform round, one vector per path-following round.
    pub qt_traces: Vec<Vec<f64>>,
    /// `Phi` traces of every inner solve, in call order.
    pub inner_traces: Vec<Vec<f64>>,
    pub inner_iters: Vec<usize>,
    pub converged: bool,
    /// False when no beamformer with positive secrecy rate was found; `w` is 0.
    pub positive_rate: bool,
}

impl D1Result {
    pub fn total_inner_iters(&self) -> usize {
        self.inner_iters.iter().sum()
    }
}

/// Solves the beamformer subproblem for fixed phases `v`.
///
/// `w_init` is used when it is feasible and gives a positive rate; otherwise
/// the start comes from [`initial_beamformer`].
pub fn solve_d1(ctx: &SecrecyContext, v: &CVector, w_init: Option<&CVector>, opts: &D1Options) -> Result<D1Result> {
    if let Some(w) = w_init {
        let norm_sq = w.norm_squared();
        if !crate::types::is_within_power(norm_sq, ctx.p_max) {
            return Err(Error::InfeasibleBeamformer {
                norm_sq,
                p_max: ctx.p_max,
            });
        }
    }
    let start = match w_init {
        Some(w) if ctx.rate(w, v) > 0.0 => Some(project_ball(w, ctx.p_max)),
        _ => initial_beamformer(ctx, v),
    };
    let Some(mut w) = start else {
        let zero = CVector::zeros(ctx.n_antennas());
        return Ok(D1Result {
            w: zero,
            objective: 0.0,
            trace: vec![0.0],
            qt_traces: Vec::new(),
            inner_traces: Vec::new(),
            inner_iters: Vec::new(),
            converged: true,
            positive_rate: false,
        });
    };

    let mut obj = ctx.ratio(&w, v);
    let mut trace = vec![obj];
    let mut qt_traces = Vec::new();
    let mut inner_traces = Vec::new();
    let mut inner_iters = Vec::new();
    let mut converged = false;

    for _t in 0..opts.max_pfp_rounds {
        let sp = build_surrogate(ctx, v, &w);
        let mut x = w.clone();
        let mut ratio = sp.ratio(&x);
        let mut qt = vec![ratio];
        for _l in 0..opts.max_qt_rounds {
            let gamma = sp.value(&x).sqrt() / sp.power.total_power(&x);
            let res = accelerated_pg(&sp, gamma, &x, opts)?;
            inner_iters.push(res.iterations);
            inner_traces.push(res.phi_trace);
            x = res.x;
            let new_ratio = sp.ratio(&x);
            qt.push(new_ratio);
            let done = relative_change(new_ratio, ratio) < opts.tolerance;
            ratio = new_ratio;
            if done {
                break;
            }
        }
        qt_traces.push(qt);
        let new_obj = ctx.ratio(&x, v);
        if !(new_obj >= obj) {
            converged = true;
            break;
        }
        let done = relative_change(new_obj, obj) < opts.tolerance;
        w = x;
        obj = new_obj;
        trace.push(obj);
        if done {
            converged = true;
            break;
        }
    }

    Ok(D1Result {
        w,
        objective: obj,
        trace,
        qt_traces,
        inner_traces,
        inner_iters,
        converged,
        positive_rate: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_trial;
    use crate::config::RawConfig;
    use crate::objective::SecrecyContext;
    use crate::oracle::fd_gradient;
    use crate::rng::{complex_normal_vector, random_phases, stream, Purpose};
    use crate::types::PhaseVector;

    fn ctx(n: usize, m: usize, seed: u64) -> SecrecyContext {
        let mut raw = RawConfig::default();
        raw.system.n_antennas = n;
        raw.system.n_elements = m;
        raw.system.n_users = 1;
        raw.system.n_eves = 1;
        let cfg = raw.validate().unwrap();
        let cs = generate_trial(&cfg, seed).unwrap();
        SecrecyContext::new(&cfg, &cs, 0, 0)
    }

    fn ball_point(n: usize, p_max: f64, rng: &mut impl rand::Rng) -> CVector {
        let w = complex_normal_vector(rng, n, 1.0);
        let r: f64 = rng.random::<f64>().sqrt();
        &w * Complex64::from(r * p_max.sqrt() / w.norm())
    }

    #[test]
    fn momentum_sequence() {
        assert!((momentum_next(1.0) - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        let mut a = 1.0;
        for _ in 0..20 {
            let b = momentum_next(a);
            assert!(b > a);
            a = b;
        }
    }

    #[test]
    fn projection_cases() {
        let p = 2.0;
        let x = CVector::from_element(1, Complex64::new(1.0, 0.0));
        assert_eq!(project_ball(&x, p), x);
        let y = CVector::from_element(1, Complex64::new(0.0, 2.0 * p.sqrt()));
        assert!((project_ball(&y, p).norm() - p.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn surrogate_tight_and_below() {
        let c = ctx(4, 4, 3);
        let mut rng = stream(3, 0, Purpose::Oracle);
        let v = PhaseVector::normalized(random_phases(&mut rng, 5)).v;
        let wt = ball_point(4, c.p_max, &mut rng);
        let sp = build_surrogate(&c, &v, &wt);
        assert!((sp.value(&wt) - c.rate(&wt, &v)).abs() < 1e-9);
        for _ in 0..100 {
            let w = ball_point(4, c.p_max, &mut rng);
            assert!(c.rate(&w, &v) >= sp.value(&w) - 1e-9);
        }
    }

    #[test]
    fn phi_gradient_matches_finite_differences() {
        let c = ctx(4, 4, 5);
        let v = PhaseVector::ones(4).v;
        let w0 = initial_beamformer(&c, &v).unwrap();
        let sp = build_surrogate(&c, &v, &w0);
        let gamma = sp.value(&w0).sqrt() / sp.power.total_power(&w0);
        let (_, g) = phi_value_and_gradient(&sp, gamma, &w0).unwrap();
        let h = 1e-6 * c.p_max.sqrt();
        let fd = fd_gradient(|x| phi_value_and_gradient(&sp, gamma, x).unwrap().0, &w0, h);
        assert!((&g - &fd).norm() / g.norm() < 1e-5);
    }

    #[test]
    fn zero_gamma_is_flat() {
        let c = ctx(3, 3, 1);
        let v = PhaseVector::ones(3).v;
        let w0 = initial_beamformer(&c, &v).unwrap();
        let sp = build_surrogate(&c, &v, &w0);
        let (p, g) = phi_value_and_gradient(&sp, 0.0, &w0).unwrap();
        assert_eq!(p, 0.0);
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn quadratic_transform_fixed_point() {
        let c = ctx(3, 3, 2);
        let v = PhaseVector::ones(3).v;
        let w0 = initial_beamformer(&c, &v).unwrap();
        let sp = build_surrogate(&c, &v, &w0);
        let (x, p) = (sp.value(&w0), sp.power.total_power(&w0));
        let (phi, _) = phi_value_and_gradient(&sp, x.sqrt() / p, &w0).unwrap();
        assert!((phi - x / p).abs() <= 1e-12 * (x / p));
    }

    #[test]
    fn nonpositive_surrogate_is_an_error() {
        let c = ctx(3, 3, 2);
        let v = PhaseVector::ones(3).v;
        let w0 = initial_beamformer(&c, &v).unwrap();
        let sp = build_surrogate(&c, &v, &w0);
        let zero = CVector::zeros(3);
        assert!(matches!(
            phi_value_and_gradient(&sp, 1.0, &zero),
            Err(Error::SurrogateNonpositive(_))
        ));
    }

    #[test]
    fn d1_trace_nondecreasing_and_feasible() {
        for seed in 0..5 {
            let c = ctx(6, 6, seed);
            let v = PhaseVector::ones(6).v;
            let res = solve_d1(&c, &v, None, &D1Options::default()).unwrap();
            assert!(res.positive_rate);
            assert!(res.w.norm_squared() <= c.p_max * (1.0 + 1e-12));
            for pair in res.trace.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-8);
            }
            for t in &res.inner_traces {
                for pair in t.windows(2) {
                    assert!(pair[1] >= pair[0] - 1e-8 * pair[0].abs());
                }
            }
        }
    }

    #[test]
    fn zero_start_is_reanchored() {
        let v = PhaseVector::ones(4).v;
        let c = (0..).map(|s| ctx(4, 4, s)).find(|c| initial_beamformer(c, &v).is_some()).unwrap();
        let res = solve_d1(&c, &v, Some(&CVector::zeros(4)), &D1Options::default()).unwrap();
        assert!(res.positive_rate);
        assert!(res.objective > 0.0);
    }

    #[test]
    fn stationary_start_returns_in_one_iteration() {
        let c = ctx(3, 3, 4);
        let v = PhaseVector::ones(3).v;
        let w = solve_d1(&c, &v, None, &D1Options { tolerance: 1e-12, ..Default::default() }).unwrap().w;
        let sp = build_surrogate(&c, &v, &w);
        let gamma = sp.value(&w).sqrt() / sp.power.total_power(&w);
        // Polish to a stationary point of Phi first.
        let tight = D1Options { tolerance: 0.0, max_inner_iters: 2000, ..Default::default() };
        let x = accelerated_pg(&sp, gamma, &w, &tight).unwrap().x;
        let again = accelerated_pg(&sp, gamma, &x, &D1Options::default()).unwrap();
        assert_eq!(again.iterations, 1);
        assert!((&again.x - &x).norm() <= 1e-9 * x.norm());
    }
}
