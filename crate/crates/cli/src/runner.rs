//! Trial loop, aggregation and CSV output.

use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use risee::channel::generate_trial_at;
use risee::orchestrator::{SolveReport, SubproblemResult};
use risee::{run_scheme, RawConfig, SchemeKind};
use serde::Serialize;

use crate::experiment::{ExperimentSpec, Sweep};
use crate::overrides::apply_set;

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub sweep: String,
    pub value: String,
    pub scheme: String,
    pub mean_ee_bits_per_joule: f64,
    pub std: f64,
    pub trials: usize,
    pub mean_am_iters: f64,
    pub mean_wall_ms: f64,
    /// Worst-pair EE of the selected beamformer and phases over all pairs.
    pub mean_achieved_ee_bits_per_joule: f64,
    pub mean_ms_per_pg_iter: f64,
    pub mean_ms_per_manifold_iter: f64,
}

/// One row of `traces.csv`: a single objective value of trial 0's selected
/// subproblem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub sweep: String,
    pub value: String,
    pub scheme: String,
    /// `am`, `d1`, `d1_inner`, `q2` or `q2_inner`.
    pub layer: &'static str,
    pub round: usize,
    pub call: usize,
    pub iteration: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy)]
struct TrialStats {
    ee: f64,
    achieved: f64,
    am_iters: f64,
    wall_ms: f64,
    pg: (f64, usize),
    manifold: (f64, usize),
}

fn per_iteration_times(subs: &[SubproblemResult]) -> ((f64, usize), (f64, usize)) {
    let mut pg = (0.0, 0);
    let mut mf = (0.0, 0);
    for r in subs.iter().flat_map(|s| &s.rounds) {
        pg.0 += r.d1_ms;
        pg.1 += r.d1_inner_iters;
        mf.0 += r.q2_ms;
        mf.1 += r.q2_inner_iters.iter().sum::<usize>();
    }
    (pg, mf)
}

fn stats(rep: &SolveReport, bandwidth_hz: f64) -> TrialStats {
    let (pg, manifold) = per_iteration_times(&rep.subproblems);
    TrialStats {
        ee: rep.min_ee_bits_per_joule(bandwidth_hz),
        achieved: rep.achieved.ee_bits_per_joule,
        am_iters: rep.mean_am_rounds(),
        wall_ms: rep.wall_ms,
        pg,
        manifold,
    }
}

fn mean(x: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = x.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x.iter().copied());
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

fn ratio_ms(parts: impl Iterator<Item = (f64, usize)>) -> f64 {
    let (ms, n) = parts.fold((0.0, 0), |(a, b), (c, d)| (a + c, b + d));
    if n == 0 {
        0.0
    } else {
        ms / n as f64
    }
}

fn aggregate(sweep: &str, value: &str, scheme: SchemeKind, trials: &[TrialStats], timing: bool) -> ResultRow {
    let ee: Vec<f64> = trials.iter().map(|t| t.ee).collect();
    let clock = |x: f64| if timing { x } else { 0.0 };
    ResultRow {
        sweep: sweep.to_string(),
        value: value.to_string(),
        scheme: scheme.to_string(),
        mean_ee_bits_per_joule: mean(ee.iter().copied()),
        std: sample_std(&ee),
        trials: trials.len(),
        mean_am_iters: mean(trials.iter().map(|t| t.am_iters)),
        mean_wall_ms: clock(mean(trials.iter().map(|t| t.wall_ms))),
        mean_achieved_ee_bits_per_joule: mean(trials.iter().map(|t| t.achieved)),
        mean_ms_per_pg_iter: clock(ratio_ms(trials.iter().map(|t| t.pg))),
        mean_ms_per_manifold_iter: clock(ratio_ms(trials.iter().map(|t| t.manifold))),
    }
}

fn traces(sweep: &str, value: &str, scheme: SchemeKind, rep: &SolveReport, out: &mut Vec<TraceRow>) {
    let Some(sub) = rep.subproblems.iter().find(|s| (s.k, s.j) == rep.selected) else {
        return;
    };
    let mut push = |layer, round, call, iteration, objective| {
        out.push(TraceRow {
            sweep: sweep.to_string(),
            value: value.to_string(),
            scheme: scheme.to_string(),
            layer,
            round,
            call,
            iteration,
            objective,
        })
    };
    for (i, v) in sub.trace.iter().enumerate() {
        push("am", i, 0, i, *v);
    }
    for (r, round) in sub.rounds.iter().enumerate() {
        for (i, v) in round.d1_trace.iter().enumerate() {
            push("d1", r, 0, i, *v);
        }
        for (c, t) in round.d1_inner_traces.iter().enumerate() {
            for (i, v) in t.iter().enumerate() {
                push("d1_inner", r, c, i, *v);
            }
        }
        for (i, v) in round.q2_trace.iter().enumerate() {
            push("q2", r, 0, i, *v);
        }
        for (c, t) in round.q2_inner_traces.iter().enumerate() {
            for (i, v) in t.iter().enumerate() {
                push("q2_inner", r, c, i, *v);
            }
        }
    }
}

/// Everything a run produces, before it is written.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub results: Vec<ResultRow>,
    pub traces: Vec<TraceRow>,
}

fn run_point(raw: &RawConfig, sweep: &str, value: &str, spec: &ExperimentSpec, out: &mut RunOutput) -> Result<()> {
    let cfg = raw.validate().with_context(|| format!("config at {sweep}={value}"))?;
    let schemes = spec.scheme_kinds()?;
    let reports: Vec<Vec<SolveReport>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let cs = generate_trial_at(&cfg, cfg.rng_seed, t).with_context(|| format!("trial {t}"))?;
            schemes
                .iter()
                .map(|&s| run_scheme(s, &cfg, &cs).with_context(|| format!("trial {t}, scheme {s}")))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    for (i, &scheme) in schemes.iter().enumerate() {
        let trials: Vec<TrialStats> = reports.iter().map(|r| stats(&r[i], cfg.bandwidth_hz)).collect();
        out.results.push(aggregate(sweep, value, scheme, &trials, spec.timing));
        traces(sweep, value, scheme, &reports[0][i], &mut out.traces);
    }
    Ok(())
}

/// Runs every sweep point of `spec` on top of `raw`. Trials run on the current
/// rayon pool; the reduction is in trial order, so results do not depend on
/// the pool size.
pub fn run_experiment(raw: &RawConfig, spec: &ExperimentSpec) -> Result<RunOutput> {
    spec.check()?;
    let mut out = RunOutput::default();
    if spec.sweeps.is_empty() {
        run_point(raw, "none", "", spec, &mut out)?;
    }
    for Sweep { key, values } in &spec.sweeps {
        for v in values {
            let point = apply_set(raw, &format!("{key}={v}"))?;
            run_point(&point, key, &v.to_string(), spec, &mut out)?;
        }
    }
    Ok(out)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("create {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_output(out: &RunOutput, dir: &Path) -> Result<()> {
    write_csv(&dir.join("results.csv"), &out.results)?;
    write_csv(&dir.join("traces.csv"), &out.traces)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let mx = mean(pts.iter().map(|p| p.0));
    let my = mean(pts.iter().map(|p| p.1));
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (den > 0.0).then(|| num / den)
}
