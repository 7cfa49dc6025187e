//! Alternating maximization per (user, eavesdropper) pair, parallel solve of
//! all pairs with worst-pair selection, baselines and phase quantization.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::channel::ChannelSet;
use crate::config::{PhaseInit, SystemConfig};
use crate::error::{Error, Result};
use crate::manifold::{solve_q2, Q2Options};
use crate::objective::{contexts, overall_objective, Leakage, ObjectiveValue, SecrecyContext};
use crate::pg::{solve_d1, D1Options};
use crate::rng::{random_phases, stream, Purpose};
use crate::types::{Beamformer, PhaseVector};
use crate::{CVector, Complex64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmOptions {
    pub tolerance: f64,
    pub max_rounds: usize,
    pub d1: D1Options,
    pub q2: Q2Options,
}

impl Default for AmOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_rounds: 50,
            d1: D1Options::default(),
            q2: Q2Options::default(),
        }
    }
}

/// One alternating round.
#[derive(Debug, Clone, PartialEq)]
pub struct AmRound {
    /// Beamformer-step objective after every path-following round.
    pub d1_trace: Vec<f64>,
    /// `Phi` traces of the beamformer inner solves.
    pub d1_inner_traces: Vec<Vec<f64>>,
    pub d1_inner_iters: usize,
    /// Phase-step rate after every path-following round.
    pub q2_trace: Vec<f64>,
    /// Surrogate traces of the phase inner solves.
    pub q2_inner_traces: Vec<Vec<f64>>,
    pub q2_inner_iters: Vec<usize>,
    pub d1_ms: f64,
    pub q2_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemResult {
    pub k: usize,
    pub j: usize,
    pub w: CVector,
    /// Canonical phases (last entry 1).
    pub v: CVector,
    /// Solver objective (rate over power under the modeled leakage, clamped at
    /// 0) after every round, bits/s/Hz/W.
    pub trace: Vec<f64>,
    pub rounds: Vec<AmRound>,
    pub converged: bool,
    /// False when no beamformer with positive rate exists for this pair.
    pub positive_rate: bool,
    pub wall_ms: f64,
}

impl SubproblemResult {
    pub fn objective(&self) -> f64 {
        *self.trace.last().unwrap_or(&0.0)
    }

    pub fn am_rounds(&self) -> usize {
        self.rounds.len()
    }
}

fn relative_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(f64::MIN_POSITIVE)
}

fn infeasible_result(ctx: &SecrecyContext, v: &CVector, started: Instant) -> SubproblemResult {
    SubproblemResult {
        k: ctx.k,
        j: ctx.j,
        w: CVector::zeros(ctx.n_antennas()),
        v: PhaseVector { v: v.clone() }.canonical().v,
        trace: vec![0.0],
        rounds: Vec::new(),
        converged: true,
        positive_rate: false,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    }
}

fn mrt_beam(ctx: &SecrecyContext, v: &CVector) -> CVector {
    let h = ctx.eff.a.ad_mul(v);
    let n = h.norm();
    if n == 0.0 {
        return h;
    }
    h * Complex64::from(ctx.p_max.sqrt() / n)
}

/// Which blocks the alternation updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Blocks {
    Both,
    BeamformerOnly,
}

fn alternate(ctx: &SecrecyContext, v_init: &CVector, opts: &AmOptions, blocks: Blocks) -> Result<SubproblemResult> {
    let started = Instant::now();
    let mut v = v_init.clone();
    let mut w: Option<CVector> = None;
    let mut trace = Vec::new();
    let mut rounds = Vec::new();
    let mut converged = false;

    for _r in 0..opts.max_rounds {
        let t0 = Instant::now();
        let mut d1 = solve_d1(ctx, &v, w.as_ref(), &opts.d1)?;
        if !d1.positive_rate && w.is_none() && blocks == Blocks::Both {
            // No beam gives a positive rate at these phases: align the phases
            // to the MRT beam once and retry.
            let probe = mrt_beam(ctx, &v);
            v = solve_q2(ctx, &probe, &v, &opts.q2)?.v;
            d1 = solve_d1(ctx, &v, None, &opts.d1)?;
        }
        let d1_ms = t0.elapsed().as_secs_f64() * 1e3;
        if !d1.positive_rate {
            if w.is_none() {
                return Ok(infeasible_result(ctx, &v, started));
            }
            break;
        }
        let mut round = AmRound {
            d1_inner_iters: d1.total_inner_iters(),
            d1_trace: d1.trace,
            d1_inner_traces: d1.inner_traces,
            q2_trace: Vec::new(),
            q2_inner_traces: Vec::new(),
            q2_inner_iters: Vec::new(),
            d1_ms,
            q2_ms: 0.0,
        };
        let new_w = d1.w;
        if blocks == Blocks::Both {
            let t1 = Instant::now();
            let q2 = solve_q2(ctx, &new_w, &v, &opts.q2)?;
            round.q2_ms = t1.elapsed().as_secs_f64() * 1e3;
            round.q2_trace = q2.trace;
            round.q2_inner_traces = q2.inner_traces;
            round.q2_inner_iters = q2.inner_iters;
            v = q2.v;
        }
        w = Some(new_w);
        let obj = ctx.ratio(w.as_ref().unwrap(), &v).max(0.0);
        rounds.push(round);
        let done = match trace.last() {
            Some(&prev) => relative_change(obj, prev) < opts.tolerance,
            None => blocks == Blocks::BeamformerOnly,
        };
        trace.push(obj);
        if done {
            converged = true;
            break;
        }
    }

    let w = w.unwrap_or_else(|| CVector::zeros(ctx.n_antennas()));
    Ok(SubproblemResult {
        k: ctx.k,
        j: ctx.j,
        w,
        v: PhaseVector { v }.canonical().v,
        trace,
        rounds,
        converged,
        positive_rate: true,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Alternates beamformer and phase updates from `v_init` until the objective
/// settles.
pub fn solve_subproblem(ctx: &SecrecyContext, v_init: &CVector, opts: &AmOptions) -> Result<SubproblemResult> {
    alternate(ctx, v_init, opts, Blocks::Both).map_err(|e| Error::Subproblem {
        k: ctx.k,
        j: ctx.j,
        source: Box::new(e),
    })
}

/// Outcome of one scheme on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub scheme: SchemeKind,
    pub subproblems: Vec<SubproblemResult>,
    /// Pair with the smallest score.
    pub selected: (usize, usize),
    /// That smallest score, bits/s/Hz/W: the pair's optimized objective, or
    /// for the ignore-uncertainty and quantized schemes the pair's statistical
    /// objective at the deployed solution.
    pub min_objective: f64,
    pub w: Beamformer,
    pub theta: PhaseVector,
    /// Worst-pair secure EE actually achieved by `(w, theta)`.
    pub achieved: ObjectiveValue,
    pub achieved_pair: (usize, usize),
    pub converged: bool,
    pub wall_ms: f64,
}

impl SolveReport {
    /// `min_objective` in bits/J.
    pub fn min_ee_bits_per_joule(&self, bandwidth_hz: f64) -> f64 {
        self.min_objective * bandwidth_hz
    }

    pub fn mean_am_rounds(&self) -> f64 {
        let n = self.subproblems.len().max(1);
        self.subproblems.iter().map(|s| s.am_rounds() as f64).sum::<f64>() / n as f64
    }
}

/// How a pair's solution is scored before min-selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scoring {
    /// The subproblem's own final objective.
    Own,
    /// The statistical objective of the pair at the solution.
    Statistical,
    /// The statistical objective after snapping the phases to `L` levels.
    Quantized(u32),
}

fn deployed_phases(sub: &SubproblemResult, scoring: Scoring) -> PhaseVector {
    let v = PhaseVector { v: sub.v.clone() };
    match scoring {
        Scoring::Quantized(levels) => quantize_phases(&v, levels),
        _ => v,
    }
}

fn select(
    scheme: SchemeKind,
    statistical: &[SecrecyContext],
    subproblems: Vec<SubproblemResult>,
    scoring: Scoring,
    started: Instant,
) -> Result<SolveReport> {
    let scores: Vec<f64> = subproblems
        .iter()
        .zip(statistical)
        .map(|(s, ctx)| match scoring {
            Scoring::Own => s.objective(),
            _ => ctx.ratio(&s.w, &deployed_phases(s, scoring).v).max(0.0),
        })
        .collect();
    let mut best = 0;
    for (i, &score) in scores.iter().enumerate() {
        if score < scores[best] {
            best = i;
        }
    }
    let sel = &subproblems[best];
    let w = Beamformer {
        w: crate::pg::project_ball(&sel.w, statistical[best].p_max),
    };
    let theta = deployed_phases(sel, scoring);
    let (achieved, achieved_pair) = overall_objective(statistical, &w, &theta)?;
    Ok(SolveReport {
        scheme,
        selected: (sel.k, sel.j),
        min_objective: scores[best],
        w,
        theta,
        achieved,
        achieved_pair,
        converged: subproblems.iter().all(|s| s.converged),
        subproblems,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

fn initial_phases(cfg: &SystemConfig, cs: &ChannelSet) -> CVector {
    match cfg.phase_init {
        PhaseInit::Ones => PhaseVector::ones(cs.n_elements()).v,
        PhaseInit::Random => random_reflection(cs, Purpose::RandomPhases),
    }
}

fn random_reflection(cs: &ChannelSet, purpose: Purpose) -> CVector {
    let mut rng = stream(cs.seed, cs.trial, purpose);
    let mut v = random_phases(&mut rng, cs.n_elements() + 1);
    let last = v.len() - 1;
    v[last] = Complex64::new(1.0, 0.0);
    v
}

fn solve_all(ctxs: &[SecrecyContext], v0: &CVector, opts: &AmOptions, blocks: Blocks) -> Result<Vec<SubproblemResult>> {
    ctxs.par_iter()
        .map(|ctx| {
            alternate(ctx, v0, opts, blocks).map_err(|e| Error::Subproblem {
                k: ctx.k,
                j: ctx.j,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Solves every pair in parallel and keeps the worst. Results do not depend on
/// the size of the thread pool.
pub fn solve_p2(cfg: &SystemConfig, cs: &ChannelSet) -> Result<SolveReport> {
    solve_p2_with(cfg, cs, &cfg.am)
}

pub fn solve_p2_with(cfg: &SystemConfig, cs: &ChannelSet, opts: &AmOptions) -> Result<SolveReport> {
    let started = Instant::now();
    let ctxs = contexts(cfg, cs);
    let subs = solve_all(&ctxs, &initial_phases(cfg, cs), opts, Blocks::Both)?;
    select(SchemeKind::Proposed, &ctxs, subs, Scoring::Own, started)
}

/// Snaps every reflection phase to the nearest multiple of `2 pi / L` (ties
/// to the lower index) after rotating the last entry to 1.
pub fn quantize_phases(v: &PhaseVector, levels: u32) -> PhaseVector {
    let step = TAU / levels as f64;
    let snapped: Vec<f64> = v
        .reflection_phases()
        .iter()
        .map(|t| {
            let idx = ((t / step) - 0.5).ceil().rem_euclid(levels as f64);
            idx * step
        })
        .collect();
    PhaseVector::from_reflection_phases(&snapped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Proposed,
    /// Random phases, beamformer only.
    Rps,
    /// Identity phases, beamformer only.
    Fps,
    /// Optimize against one drawn eavesdropper realization as if it were known.
    IgnoreUncertainty,
    /// Proposed solution with phases snapped to `L` levels.
    Quantized(u32),
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeKind::Proposed => write!(f, "proposed"),
            SchemeKind::Rps => write!(f, "rps"),
            SchemeKind::Fps => write!(f, "fps"),
            SchemeKind::IgnoreUncertainty => write!(f, "ignore-uncertainty"),
            SchemeKind::Quantized(l) => write!(f, "quantized-{l}"),
        }
    }
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "proposed" => Ok(SchemeKind::Proposed),
            "rps" => Ok(SchemeKind::Rps),
            "fps" => Ok(SchemeKind::Fps),
            "ignore-uncertainty" => Ok(SchemeKind::IgnoreUncertainty),
            _ => s
                .strip_prefix("quantized-")
                .and_then(|l| l.parse::<u32>().ok())
                .filter(|l| *l >= 2)
                .map(SchemeKind::Quantized)
                .ok_or_else(|| format!("unknown scheme `{s}`")),
        }
    }
}

/// Runs one scheme on one trial. Every scheme is scored by the worst-pair
/// secure EE under the statistical eavesdropper model.
pub fn run_scheme(kind: SchemeKind, cfg: &SystemConfig, cs: &ChannelSet) -> Result<SolveReport> {
    let started = Instant::now();
    let ctxs = contexts(cfg, cs);
    match kind {
        SchemeKind::Proposed => solve_p2(cfg, cs),
        SchemeKind::Fps => {
            let subs = solve_all(&ctxs, &PhaseVector::ones(cs.n_elements()).v, &cfg.am, Blocks::BeamformerOnly)?;
            select(kind, &ctxs, subs, Scoring::Own, started)
        }
        SchemeKind::Rps => {
            let v0 = random_reflection(cs, Purpose::RandomPhases);
            let subs = solve_all(&ctxs, &v0, &cfg.am, Blocks::BeamformerOnly)?;
            select(kind, &ctxs, subs, Scoring::Own, started)
        }
        SchemeKind::IgnoreUncertainty => {
            let mut rng = stream(cs.seed, cs.trial, Purpose::EveRealization);
            let eves: Vec<_> = (0..cs.n_eves()).map(|j| cs.draw_eve_channel(j, &mut rng)).collect();
            let perfect: Vec<SecrecyContext> = ctxs
                .iter()
                .map(|c| SecrecyContext {
                    leakage: Leakage::Perfect {
                        g: eves[c.j].clone(),
                        sigma2: cs.sigma2_eve,
                    },
                    ..c.clone()
                })
                .collect();
            let subs = solve_all(&perfect, &initial_phases(cfg, cs), &cfg.am, Blocks::Both)?;
            select(kind, &ctxs, subs, Scoring::Statistical, started)
        }
        SchemeKind::Quantized(levels) => {
            let subs = solve_all(&ctxs, &initial_phases(cfg, cs), &cfg.am, Blocks::Both)?;
            select(kind, &ctxs, subs, Scoring::Quantized(levels), started)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_trial;
    use crate::config::RawConfig;

    fn cfg(n: usize, m: usize, k: usize, j: usize) -> SystemConfig {
        let mut raw = RawConfig::default();
        raw.system.n_antennas = n;
        raw.system.n_elements = m;
        raw.system.n_users = k;
        raw.system.n_eves = j;
        raw.validate().unwrap()
    }

    #[test]
    fn quantization_snaps_and_ties_low() {
        let q = quantize_phases(&PhaseVector::from_reflection_phases(&[0.3]), 4);
        assert!(q.reflection_phases()[0].abs() < 1e-12);
        let q = quantize_phases(&PhaseVector::from_reflection_phases(&[std::f64::consts::PI / 4.0]), 4);
        assert!(q.reflection_phases()[0].abs() < 1e-12);
        let q = quantize_phases(&PhaseVector::from_reflection_phases(&[TAU - 0.1]), 4);
        assert!(q.reflection_phases()[0].abs() < 1e-12);
        let q = quantize_phases(&PhaseVector::from_reflection_phases(&[2.0]), 4);
        assert!((q.reflection_phases()[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert_eq!(q.v[1], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn quantization_ignores_common_rotation() {
        let v = PhaseVector::from_reflection_phases(&[0.3, 1.0, 2.5]);
        let rotated = PhaseVector {
            v: v.v.map(|z| z * Complex64::from_polar(1.0, 0.9)),
        };
        assert!((quantize_phases(&v, 8).v - quantize_phases(&rotated, 8).v).camax() < 1e-12);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [
            SchemeKind::Proposed,
            SchemeKind::Rps,
            SchemeKind::Fps,
            SchemeKind::IgnoreUncertainty,
            SchemeKind::Quantized(4),
        ] {
            assert_eq!(s.to_string().parse::<SchemeKind>().unwrap(), s);
        }
        assert!("quantized-1".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn single_pair_matches_subproblem() {
        let c = cfg(4, 4, 1, 1);
        let cs = generate_trial(&c, 3).unwrap();
        let rep = solve_p2(&c, &cs).unwrap();
        let ctx = SecrecyContext::new(&c, &cs, 0, 0);
        let sub = solve_subproblem(&ctx, &PhaseVector::ones(4).v, &c.am).unwrap();
        assert_eq!(rep.subproblems[0].trace, sub.trace);
        assert_eq!(rep.selected, (0, 0));
        // Signal and leakage nearly cancel at this SNR, so rounding is amplified.
        assert!((rep.achieved.ee_per_hz - sub.objective()).abs() <= 1e-6 * sub.objective(), "{} {}", rep.achieved.ee_per_hz, sub.objective());
    }

    #[test]
    fn am_trace_monotone() {
        let c = cfg(5, 5, 2, 2);
        let cs = generate_trial(&c, 4).unwrap();
        let rep = solve_p2(&c, &cs).unwrap();
        for s in &rep.subproblems {
            for p in s.trace.windows(2) {
                assert!(p[1] >= p[0] - 1e-8);
            }
        }
        let min = rep.subproblems.iter().map(|s| s.objective()).fold(f64::INFINITY, f64::min);
        assert_eq!(rep.min_objective, min);
    }

    #[test]
    fn every_scheme_is_feasible() {
        let c = cfg(4, 4, 2, 2);
        let cs = generate_trial(&c, 5).unwrap();
        for kind in [
            SchemeKind::Proposed,
            SchemeKind::Rps,
            SchemeKind::Fps,
            SchemeKind::IgnoreUncertainty,
            SchemeKind::Quantized(2),
        ] {
            let rep = run_scheme(kind, &c, &cs).unwrap();
            assert!(rep.w.norm_sq() <= c.p_max * (1.0 + 1e-12));
            assert!(rep.theta.max_modulus_error() < 1e-12);
            assert!(rep.achieved.ee_per_hz >= 0.0);
        }
    }
}
