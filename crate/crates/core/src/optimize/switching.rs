use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::nelder_mead::{initial_simplex, minimize, NelderMeadOptions};
use super::{OptimizeResult, ProtocolStructure, Scenario, SearchOptions};
use crate::error::{Error, Result};
use crate::pmp::{extremal, switching_function, switching_rate, verify};
use crate::propagate::{evolve_state, terminal_cost, terminal_state, ControlSchedule, SegmentKind};

/// Cost charged when the singular feedback cannot be evaluated.
const INFEASIBLE_COST: f64 = 10.0;
/// Finite-difference step of the shooting Jacobian, relative to `t_f`.
const SHOOT_STEP: f64 = 1e-7;
const SHOOT_ITERATIONS: usize = 12;
const SHOOT_TOL: f64 = 1e-13;

/// Maps cumulative switch times onto the ordered box `[0, t_f]` and returns
/// the resulting durations with the distance moved.
fn project(s: &[f64], tf: f64) -> (Vec<f64>, f64) {
    let mut durations = Vec::with_capacity(s.len() + 1);
    let mut violation = 0.0;
    let mut prev = 0.0;
    let mut prev_raw = 0.0;
    for &x in s {
        violation += (-x).max(0.0) + (x - tf).max(0.0) + (prev_raw - x).max(0.0);
        let p = x.clamp(0.0, tf).max(prev);
        durations.push(p - prev);
        prev = p;
        prev_raw = x;
    }
    durations.push(tf - prev);
    (durations, violation)
}

fn cumulative(durations: &[f64]) -> Vec<f64> {
    let mut t = 0.0;
    durations[..durations.len() - 1]
        .iter()
        .map(|d| {
            t += d;
            t
        })
        .collect()
}

/// Terminal cost of `structure` with the given durations on a grid with
/// step at most `dt_max`.
pub fn structure_cost(
    scenario: &Scenario,
    structure: &ProtocolStructure,
    durations: &[f64],
    dt_max: f64,
) -> Result<f64> {
    let sched = ControlSchedule::from_parts(structure.kinds(), durations)?;
    let rho = terminal_state(scenario.initial, &sched, &scenario.spec, dt_max)?;
    Ok(terminal_cost(&rho, &scenario.target, scenario.cost_kind))
}

fn label_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a, stable across platforms and toolchains
    label.bytes().fold(0xcbf2_9ce4_8422_2325 ^ seed, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Start points with their simplex steps. A warm start contributes two
/// points: the durations rescaled to `t_f`, and (for structures with a
/// singular segment) the durations with the whole change in `t_f` absorbed
/// by the longest singular segment.
fn start_points(
    structure: &ProtocolStructure,
    tf: f64,
    init: Option<&[f64]>,
    opts: &SearchOptions,
) -> Vec<(Vec<f64>, f64)> {
    let k = structure.len();
    let mut starts = Vec::new();
    if let Some(d) = init.filter(|d| d.len() == k) {
        let d: Vec<f64> = d.iter().map(|x| x.max(0.0)).collect();
        let total: f64 = d.iter().sum();
        if total > 0.0 {
            let longest_singular = structure
                .kinds()
                .iter()
                .enumerate()
                .filter(|(_, kind)| **kind == SegmentKind::Singular)
                .max_by(|a, b| d[a.0].total_cmp(&d[b.0]))
                .map(|(i, _)| i);
            if let Some(i) = longest_singular {
                let mut shifted = d.clone();
                shifted[i] += tf - total;
                if shifted[i] >= 0.0 {
                    starts.push((cumulative(&shifted), 0.01 * tf));
                }
            }
            let scaled: Vec<f64> = d.iter().map(|x| x * tf / total).collect();
            starts.push((cumulative(&scaled), 0.02 * tf));
        }
    }
    starts.push((cumulative(&vec![tf / k as f64; k]), 0.1 * tf));
    let mut rng = ChaCha8Rng::seed_from_u64(label_seed(opts.seed, &structure.label()));
    while starts.len() < opts.restarts.max(1) {
        let mut s: Vec<f64> = (0..k - 1).map(|_| rng.random_range(0.0..tf)).collect();
        s.sort_by(f64::total_cmp);
        starts.push((s, 0.05 * tf));
    }
    starts
}

/// Optimizes the switching times of one structure at fixed `t_f`.
///
/// `init` (segment durations, rescaled to `t_f`) seeds the first restart; an
/// equal-duration start and seeded random starts fill up to
/// `opts.restarts`.
pub fn optimize_switching_times(
    structure: &ProtocolStructure,
    scenario: &Scenario,
    tf: f64,
    init: Option<&[f64]>,
    opts: &SearchOptions,
) -> Result<OptimizeResult> {
    if !(tf.is_finite() && tf > 0.0) {
        return Err(Error::Optimization(format!("t_f must be > 0, got {tf}")));
    }
    let label = structure.label();
    let dt = tf / opts.search_steps.max(1) as f64;
    let nm = NelderMeadOptions {
        max_evals: opts.max_evals,
        ftol: 1e-14,
        xtol: 1e-9 * tf,
        ..Default::default()
    };
    let objective = |s: &[f64]| {
        let (d, violation) = project(s, tf);
        let c = structure_cost(scenario, structure, &d, dt).unwrap_or(INFEASIBLE_COST);
        c + opts.penalty * violation
    };
    let starts = start_points(structure, tf, init, opts);
    // the warm start polished on the fine grid directly; on long singular
    // arcs the coarse-grid optimum can be too far off for Newton to converge
    let warm = (init.is_some() && structure.has_singular()).then(|| project(&starts[0].0, tf).0);
    let runs: Vec<_> = starts
        .into_par_iter()
        .map(|(x0, step)| minimize(objective, initial_simplex(&x0, step), &nm))
        .collect();
    let evaluations = runs.iter().map(|r| r.evals).sum();
    let best = runs
        .into_iter()
        .min_by(|a, b| a.fx.total_cmp(&b.fx))
        .expect("at least one start");
    if best.fx >= INFEASIBLE_COST {
        return Err(Error::Optimization(format!(
            "{label}: no restart found a feasible protocol at t_f = {tf}"
        )));
    }
    let (durations, _) = project(&best.x, tf);
    let mut result = finalize(structure, scenario, durations, evaluations, opts);
    if let Some(d) = warm {
        if let Ok(w) = finalize(structure, scenario, d, evaluations, opts) {
            result = match result {
                Ok(r) if !preferred(&w, &r, opts.tie_tol) => Ok(r),
                _ => Ok(w),
            };
        }
    }
    // report the requested time rather than the rounded sum of durations
    result.map(|r| OptimizeResult { t_f: tf, ..r })
}

/// Verified beats unverified; otherwise lower cost, with ties going to
/// fewer segments.
fn preferred(a: &OptimizeResult, b: &OptimizeResult, tie_tol: f64) -> bool {
    if a.report.passed != b.report.passed {
        return a.report.passed;
    }
    let (na, nb) = (a.switch_times.len(), b.switch_times.len());
    if (a.cost - b.cost).abs() <= tie_tol && na != nb {
        return na < nb;
    }
    a.cost < b.cost
}

/// Drops segments shorter than `min_len` (their time goes to a neighbour)
/// and merges equal neighbours. `None` when nothing changes.
fn collapse(
    structure: &ProtocolStructure,
    durations: &[f64],
    min_len: f64,
) -> Option<(ProtocolStructure, Vec<f64>)> {
    let mut kinds: Vec<SegmentKind> = Vec::new();
    let mut durs: Vec<f64> = Vec::new();
    let mut carry = 0.0;
    for (&k, &d) in structure.kinds().iter().zip(durations) {
        if d < min_len {
            carry += d;
            continue;
        }
        let d = d + std::mem::take(&mut carry);
        match kinds.last() {
            Some(&last) if last == k => *durs.last_mut().unwrap() += d,
            _ => {
                kinds.push(k);
                durs.push(d);
            }
        }
    }
    if kinds.is_empty() {
        return None;
    }
    *durs.last_mut().unwrap() += carry;
    if kinds.len() == structure.len() {
        return None;
    }
    Some((ProtocolStructure::new(kinds).ok()?, durs))
}

/// Merges equal neighbours and drops empty segments.
fn normalize(kinds: Vec<SegmentKind>, durations: Vec<f64>) -> Option<(ProtocolStructure, Vec<f64>)> {
    let mut k_out: Vec<SegmentKind> = Vec::new();
    let mut d_out: Vec<f64> = Vec::new();
    for (k, d) in kinds.into_iter().zip(durations) {
        if d <= 0.0 {
            continue;
        }
        match k_out.last() {
            Some(&last) if last == k => *d_out.last_mut().unwrap() += d,
            _ => {
                k_out.push(k);
                d_out.push(d);
            }
        }
    }
    Some((ProtocolStructure::new(k_out).ok()?, d_out))
}

/// Splits saturated stretches at the start or end of each singular segment
/// into explicit bang segments. `None` when no singular segment saturates.
fn desaturate(
    structure: &ProtocolStructure,
    scenario: &Scenario,
    durations: &[f64],
    opts: &SearchOptions,
) -> Option<(ProtocolStructure, Vec<f64>)> {
    if !structure.has_singular() {
        return None;
    }
    let tf: f64 = durations.iter().sum();
    let sched = ControlSchedule::from_parts(structure.kinds(), durations).ok()?;
    let traj = evolve_state(scenario.initial, &sched, &scenario.spec, tf / opts.verify_steps.max(1) as f64).ok()?;
    let bound = scenario.spec.u_bound * (1.0 - 1e-12);
    let bang = |u: f64| if u > 0.0 { SegmentKind::BangPlus } else { SegmentKind::BangMinus };
    let mut kinds = Vec::new();
    let mut durs = Vec::new();
    let mut changed = false;
    for (i, (&k, &d)) in structure.kinds().iter().zip(durations).enumerate() {
        let span = traj.spans[i];
        if k != SegmentKind::Singular || span.end_node == span.start_node {
            kinds.push(k);
            durs.push(d);
            continue;
        }
        let nodes = span.start_node..span.end_node;
        let free: Vec<usize> = nodes.clone().filter(|&n| traj.controls[n].abs() < bound).collect();
        let (Some(&first), Some(&last)) = (free.first(), free.last()) else {
            kinds.push(bang(traj.controls[span.start_node]));
            durs.push(d);
            changed = true;
            continue;
        };
        let t0 = traj.times[span.start_node];
        let t1 = traj.times[span.end_node];
        let (a, b) = (traj.times[first], traj.times[last + 1]);
        if first > span.start_node {
            kinds.push(bang(traj.controls[span.start_node]));
            durs.push(a - t0);
            changed = true;
        }
        kinds.push(SegmentKind::Singular);
        durs.push(b - a);
        if last + 1 < span.end_node {
            kinds.push(bang(traj.controls[span.end_node - 1]));
            durs.push(t1 - b);
            changed = true;
        }
    }
    if !changed {
        return None;
    }
    normalize(kinds, durs)
}

fn evaluate(
    structure: &ProtocolStructure,
    scenario: &Scenario,
    durations: Vec<f64>,
    evaluations: usize,
    opts: &SearchOptions,
) -> Result<OptimizeResult> {
    let sched = ControlSchedule::from_parts(structure.kinds(), &durations)?;
    let tf = sched.duration();
    let ex = extremal(
        scenario.initial,
        &scenario.target,
        scenario.cost_kind,
        &sched,
        &scenario.spec,
        tf / opts.verify_steps.max(1) as f64,
    )?;
    let report = verify(&ex.trajectory, &ex.costates, &sched, &scenario.spec, opts.tol_hc, opts.tol_phi)?;
    Ok(OptimizeResult {
        structure: Some(structure.clone()),
        overlap: scenario.target.dot(&ex.trajectory.final_state()),
        switch_times: durations,
        t_f: tf,
        cost: ex.cost,
        evaluations,
        report,
        controls: None,
    })
}

/// Switching conditions at the segment boundaries: `Φ = 0` at a switch
/// between bangs, `Φ = dΦ/dt = 0` on entering a singular segment, nothing
/// on leaving one. `None` unless there is one condition per switch time.
fn switching_residuals(
    structure: &ProtocolStructure,
    scenario: &Scenario,
    durations: &[f64],
    dt: f64,
) -> Result<Option<Vec<f64>>> {
    let kinds = structure.kinds();
    let sched = ControlSchedule::from_parts(kinds, durations)?;
    let ex = extremal(scenario.initial, &scenario.target, scenario.cost_kind, &sched, &scenario.spec, dt)?;
    let mut out = Vec::with_capacity(kinds.len());
    for (i, w) in kinds.windows(2).enumerate() {
        let node = ex.trajectory.spans[i + 1].start_node;
        let (lam, rho) = (&ex.costates.costates[node], &ex.trajectory.states[node]);
        match (w[0], w[1]) {
            (SegmentKind::Singular, _) => {}
            (_, SegmentKind::Singular) => {
                out.push(switching_function(lam, rho, &scenario.spec));
                out.push(switching_rate(lam, rho, &scenario.spec));
            }
            _ => out.push(switching_function(lam, rho, &scenario.spec)),
        }
    }
    Ok((out.len() + 1 == kinds.len()).then_some(out))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton iteration on the switching conditions, started from `durations`.
/// Returns the new durations and the number of extremal evaluations, or
/// `None` if the iteration leaves the ordered box or makes no progress.
fn shoot(
    structure: &ProtocolStructure,
    scenario: &Scenario,
    durations: &[f64],
    opts: &SearchOptions,
) -> Option<(Vec<f64>, usize)> {
    let tf: f64 = durations.iter().sum();
    let dt = tf / opts.verify_steps.max(1) as f64;
    let n = durations.len() - 1;
    let mut evals = 0;
    let mut f_at = |s: &[f64]| -> Option<Vec<f64>> {
        evals += 1;
        let (d, violation) = project(s, tf);
        if violation > 0.0 {
            return None;
        }
        switching_residuals(structure, scenario, &d, dt).ok().flatten()
    };
    let mut s = cumulative(durations);
    let mut f = f_at(&s)?;
    let start = max_abs(&f);
    let h = SHOOT_STEP * tf;
    for _ in 0..SHOOT_ITERATIONS {
        if max_abs(&f) < SHOOT_TOL {
            break;
        }
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            // forward difference, or backward where the forward point is infeasible
            let mut sp = s.clone();
            sp[j] += h;
            let col: Vec<f64> = match f_at(&sp) {
                Some(fp) => fp.iter().zip(&f).map(|(a, b)| (a - b) / h).collect(),
                None => {
                    sp[j] -= 2.0 * h;
                    let fm = f_at(&sp)?;
                    f.iter().zip(&fm).map(|(a, b)| (a - b) / h).collect()
                }
            };
            for (i, c) in col.into_iter().enumerate() {
                jac[(i, j)] = c;
            }
        }
        let step = jac.lu().solve(&DVector::from_vec(f.iter().map(|x| -x).collect()))?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let trial: Vec<f64> = s.iter().zip(step.iter()).map(|(a, b)| a + alpha * b).collect();
            if let Some(ft) = f_at(&trial) {
                if max_abs(&ft) < max_abs(&f) {
                    s = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (max_abs(&f) < start).then(|| (project(&s, tf).0, evals))
}

fn polished(
    structure: &ProtocolStructure,
    scenario: &Scenario,
    durations: Vec<f64>,
    evaluations: usize,
    opts: &SearchOptions,
) -> Result<OptimizeResult> {
    let raw = evaluate(structure, scenario, durations, evaluations, opts)?;
    let Some((d, extra)) = shoot(structure, scenario, &raw.switch_times, opts) else {
        return Ok(raw);
    };
    match evaluate(structure, scenario, d, evaluations + extra, opts) {
        Ok(r) if r.cost <= raw.cost + opts.tie_tol => Ok(r),
        _ => Ok(raw),
    }
}

/// Evaluates on the verification grid after Newton refinement of the
/// switching conditions. The same protocol with segments too short to
/// resolve on that grid removed is a second candidate (and the only one if
/// the full protocol cannot be evaluated); among candidates
/// within `tie_tol` of the lower cost, a verified one wins, then the one
/// with fewer segments.
fn finalize(
    structure: &ProtocolStructure,
    scenario: &Scenario,
    durations: Vec<f64>,
    evaluations: usize,
    opts: &SearchOptions,
) -> Result<OptimizeResult> {
    let tf: f64 = durations.iter().sum();
    let reduced = collapse(structure, &durations, tf / opts.verify_steps.max(1) as f64);
    let full = polished(structure, scenario, durations, evaluations, opts);
    let mut candidates = Vec::new();
    if let Some((s, d)) = reduced {
        if let Ok(r) = polished(&s, scenario, d, evaluations, opts) {
            candidates.push(r);
        }
    }
    match full {
        Ok(r) => candidates.insert(0, r),
        Err(e) if candidates.is_empty() => return Err(e),
        Err(_) => {}
    }
    let split: Vec<_> = candidates
        .iter()
        .filter_map(|r| desaturate(r.structure.as_ref()?, scenario, &r.switch_times, opts))
        .collect();
    for (s, d) in split {
        if let Ok(r) = polished(&s, scenario, d, evaluations, opts) {
            candidates.push(r);
        }
    }
    let lowest = candidates.iter().map(|r| r.cost).fold(f64::INFINITY, f64::min);
    Ok(candidates
        .into_iter()
        .filter(|r| r.cost <= lowest + opts.tie_tol)
        .min_by(|a, b| {
            (!a.report.passed, a.switch_times.len())
                .cmp(&(!b.report.passed, b.switch_times.len()))
                .then(a.cost.total_cmp(&b.cost))
        })
        .expect("the lowest-cost candidate is kept"))
}

/// Runs every catalog member (in parallel) and returns the per-structure
/// outcomes in catalog order. `warm` maps labels to starting durations.
pub fn search_structures_all(
    scenario: &Scenario,
    tf: f64,
    catalog: &[ProtocolStructure],
    warm: Option<&BTreeMap<String, Vec<f64>>>,
    opts: &SearchOptions,
) -> Vec<Result<OptimizeResult>> {
    catalog
        .par_iter()
        .map(|s| {
            let init = warm.and_then(|w| w.get(&s.label())).map(Vec::as_slice);
            optimize_switching_times(s, scenario, tf, init, opts)
        })
        .collect()
}

/// Index of the lowest-cost result; costs within `tie_tol` of the minimum
/// are ties, resolved toward fewer segments and then catalog order.
pub fn select_winner(results: &[OptimizeResult], tie_tol: f64) -> Option<usize> {
    let best = results.iter().map(|r| r.cost).fold(f64::INFINITY, f64::min);
    results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.cost <= best + tie_tol)
        .min_by_key(|(i, r)| (r.structure.as_ref().map_or(usize::MAX, |s| s.len()), *i))
        .map(|(i, _)| i)
}

/// Best protocol over a catalog of structures.
pub fn search_structures(
    scenario: &Scenario,
    tf: f64,
    catalog: &[ProtocolStructure],
    opts: &SearchOptions,
) -> Result<OptimizeResult> {
    if catalog.is_empty() {
        return Err(Error::Optimization("empty structure catalog".into()));
    }
    let ok: Vec<OptimizeResult> = search_structures_all(scenario, tf, catalog, None, opts)
        .into_iter()
        .filter_map(Result::ok)
        .collect();
    let i = select_winner(&ok, opts.tie_tol)
        .ok_or_else(|| Error::Optimization(format!("no structure could be optimized at t_f = {tf}")))?;
    Ok(ok.into_iter().nth(i).expect("winner index in range"))
}
