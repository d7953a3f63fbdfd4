//! Overlap-versus-time studies: optimized sweeps over `t_f`, the zero-control
//! baseline, state retention and the σx-channel regime classification.
//!
//! A sweep walks the grid in ascending order and seeds every structure at
//! each point with its optimum at the previous point. Afterwards it inserts
//! bisection points where the winning structure changes and secant points
//! where the mean c-Hamiltonian changes sign.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemSpec;
use crate::optimize::{
    gradient_descent_control, optimize_switching_times, search_structures, search_structures_all,
    select_winner, GradientMethod, GradientOptions, OptimizeResult, ProtocolStructure, Scenario,
    SearchOptions,
};
use crate::pmp::{extremal, verify, HcSign};
use crate::propagate::{evolve_state, terminal_state, ControlSchedule};

/// Number of points of [`default_grid`].
pub const DEFAULT_GRID_POINTS: usize = 60;
/// `|overlap(2π) − overlap(1.6π)|` below this counts as saturated.
pub const SATURATION_TOL: f64 = 0.01;
/// An interior peak must exceed the final overlap by this much to count.
pub const PEAK_MARGIN: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub t_f: f64,
    pub overlap: f64,
    pub cost: f64,
    pub structure: String,
    pub switch_times: Vec<f64>,
    pub hc_sign: HcSign,
    pub hc_mean: f64,
    pub hc_drift: f64,
    pub bang_violations: usize,
    pub singular_residual: f64,
    pub verified: bool,
}

impl SweepRecord {
    pub fn from_result(r: &OptimizeResult) -> Self {
        Self {
            t_f: r.t_f,
            overlap: r.overlap,
            cost: r.cost,
            structure: r.label(),
            switch_times: r.switch_times.clone(),
            hc_sign: r.report.hc_sign,
            hc_mean: r.report.hc_mean,
            hc_drift: r.report.hc_drift,
            bang_violations: r.report.bang_violations,
            singular_residual: r.report.singular_residual,
            verified: r.report.passed,
        }
    }

    fn trivial(scenario: &Scenario) -> Self {
        let c = crate::propagate::terminal_cost(&scenario.initial, &scenario.target, scenario.cost_kind);
        Self {
            t_f: 0.0,
            overlap: scenario.target.dot(&scenario.initial),
            cost: c,
            structure: String::new(),
            switch_times: Vec::new(),
            hc_sign: HcSign::NearZero,
            hc_mean: 0.0,
            hc_drift: 0.0,
            bang_violations: 0,
            singular_residual: 0.0,
            verified: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub search: SearchOptions,
    /// Bisection levels inserted where the winning structure changes.
    pub refine_transitions: usize,
    /// Secant steps toward each sign change of the mean c-Hamiltonian.
    pub refine_hc_zero: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            search: SearchOptions::default(),
            refine_transitions: 1,
            refine_hc_zero: 2,
        }
    }
}

/// `n` evenly spaced times from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// 60 points from `0.05π` to `2π`.
pub fn default_grid() -> Vec<f64> {
    linear_grid(0.05 * PI, 2.0 * PI, DEFAULT_GRID_POINTS)
}

/// Grid times must be finite, non-negative and strictly ascending.
pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Optimization("grid times must be finite and >= 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Optimization("grid must be strictly ascending".into()));
    }
    Ok(())
}

type Warm = BTreeMap<String, Vec<f64>>;

struct Point {
    warm: Warm,
    winner: OptimizeResult,
}

fn solve_point(
    scenario: &Scenario,
    tf: f64,
    catalog: &[ProtocolStructure],
    warm: Option<&Warm>,
    opts: &SearchOptions,
) -> Result<Point> {
    let ok: Vec<OptimizeResult> = search_structures_all(scenario, tf, catalog, warm, opts)
        .into_iter()
        .filter_map(Result::ok)
        .collect();
    let i = select_winner(&ok, opts.tie_tol)
        .ok_or_else(|| Error::Optimization(format!("no structure could be optimized at t_f = {tf}")))?;
    // results may come back under a reduced label, so keep the best per label
    let mut best: BTreeMap<String, &OptimizeResult> = BTreeMap::new();
    for r in &ok {
        let e = best.entry(r.label()).or_insert(r);
        if r.cost < e.cost {
            *e = r;
        }
    }
    let mut next: Warm = warm.cloned().unwrap_or_default();
    for (label, r) in best {
        next.insert(label, r.switch_times.clone());
    }
    Ok(Point {
        warm: next,
        winner: ok[i].clone(),
    })
}

/// Optimized winners over an ascending grid, refined near structure
/// transitions and `H_c` sign changes, returned in ascending `t_f`.
pub fn sweep_results(
    scenario: &Scenario,
    grid: &[f64],
    catalog: &[ProtocolStructure],
    opts: &SweepOptions,
) -> Result<Vec<OptimizeResult>> {
    check_grid(grid)?;
    if catalog.is_empty() {
        return Err(Error::Optimization("empty structure catalog".into()));
    }
    let mut points: Vec<Point> = Vec::with_capacity(grid.len());
    for &tf in grid.iter().filter(|t| **t > 0.0) {
        let p = solve_point(scenario, tf, catalog, points.last().map(|p| &p.warm), &opts.search)?;
        points.push(p);
    }

    for _ in 0..opts.refine_transitions {
        let mut inserted = Vec::new();
        for w in points.windows(2) {
            if w[0].winner.label() != w[1].winner.label() {
                let tm = 0.5 * (w[0].winner.t_f + w[1].winner.t_f);
                inserted.push(solve_point(scenario, tm, catalog, Some(&w[0].warm), &opts.search)?);
            }
        }
        if inserted.is_empty() {
            break;
        }
        points.extend(inserted);
        points.sort_by(|a, b| a.winner.t_f.total_cmp(&b.winner.t_f));
    }

    for _ in 0..opts.refine_hc_zero {
        let mut inserted = Vec::new();
        for w in points.windows(2) {
            let (a, b) = (&w[0].winner, &w[1].winner);
            let (ha, hb) = (a.report.hc_mean, b.report.hc_mean);
            let already = [a, b].iter().any(|r| r.report.hc_sign == HcSign::NearZero);
            if ha.signum() != hb.signum() && !already {
                let t = a.t_f - ha * (b.t_f - a.t_f) / (hb - ha);
                if t > a.t_f && t < b.t_f {
                    inserted.push(solve_point(scenario, t, catalog, Some(&w[0].warm), &opts.search)?);
                }
            }
        }
        if inserted.is_empty() {
            break;
        }
        points.extend(inserted);
        points.sort_by(|a, b| a.winner.t_f.total_cmp(&b.winner.t_f));
    }
    Ok(points.into_iter().map(|p| p.winner).collect())
}

/// One verified record per grid time (plus refinement points). A zero time
/// yields the trivial record with the unevolved overlap.
pub fn sweep_tf(
    scenario: &Scenario,
    grid: &[f64],
    catalog: &[ProtocolStructure],
    opts: &SweepOptions,
) -> Result<Vec<SweepRecord>> {
    let mut out: Vec<SweepRecord> = Vec::with_capacity(grid.len());
    if grid.first() == Some(&0.0) {
        out.push(SweepRecord::trivial(scenario));
    }
    out.extend(sweep_results(scenario, grid, catalog, opts)?.iter().map(SweepRecord::from_result));
    Ok(out)
}

/// Overlaps with `u ≡ 0`.
pub fn zero_control_baseline(scenario: &Scenario, grid: &[f64], steps: usize) -> Result<Vec<SweepRecord>> {
    check_grid(grid)?;
    grid.iter()
        .map(|&tf| {
            if tf == 0.0 {
                let mut r = SweepRecord::trivial(scenario);
                r.structure = "zero".into();
                return Ok(r);
            }
            let sched = ControlSchedule::sampled(tf, vec![0.0], scenario.spec.u_bound)?;
            let dt = tf / steps.max(1) as f64;
            let ex = extremal(scenario.initial, &scenario.target, scenario.cost_kind, &sched, &scenario.spec, dt)?;
            let rep = verify(&ex.trajectory, &ex.costates, &sched, &scenario.spec, 1e-3, 1e-3)?;
            let rho = terminal_state(scenario.initial, &sched, &scenario.spec, dt)?;
            Ok(SweepRecord {
                t_f: tf,
                overlap: scenario.target.dot(&rho),
                cost: ex.cost,
                structure: "zero".into(),
                switch_times: vec![tf],
                hc_sign: rep.hc_sign,
                hc_mean: rep.hc_mean,
                hc_drift: rep.hc_drift,
                bang_violations: rep.bang_violations,
                singular_residual: rep.singular_residual,
                verified: rep.passed,
            })
        })
        .collect()
}

/// Sweep with the target equal to the initial state.
pub fn retention_scan(
    spec: SystemSpec,
    grid: &[f64],
    catalog: &[ProtocolStructure],
    opts: &SweepOptions,
) -> Result<Vec<SweepRecord>> {
    sweep_tf(&Scenario::retain(spec), grid, catalog, opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseClass {
    /// Overlap still rising (or flat) at the end of the window.
    CaseI,
    /// Interior maximum followed by decay.
    CaseIi,
}

/// Classifies an ascending sweep: `CaseIi` if some earlier record beats the
/// last one by more than [`PEAK_MARGIN`].
pub fn classify_records(records: &[SweepRecord]) -> Option<CaseClass> {
    let last = records.last()?;
    let peak = records[..records.len() - 1]
        .iter()
        .map(|r| r.overlap)
        .fold(f64::NEG_INFINITY, f64::max);
    Some(if peak > last.overlap + PEAK_MARGIN {
        CaseClass::CaseIi
    } else {
        CaseClass::CaseI
    })
}

/// Sweeps the preparation scenario on `points` times between the probe pair
/// and classifies the curve.
pub fn case_classifier(
    spec: SystemSpec,
    t_probe: (f64, f64),
    points: usize,
    catalog: &[ProtocolStructure],
    opts: &SweepOptions,
) -> Result<CaseClass> {
    let grid = linear_grid(t_probe.0, t_probe.1, points.max(2));
    let records = sweep_tf(&Scenario::prepare(spec), &grid, catalog, opts)?;
    classify_records(&records).ok_or_else(|| Error::Optimization("empty sweep".into()))
}

/// Record with `t_f` closest to `t`.
pub fn nearest(records: &[SweepRecord], t: f64) -> Option<&SweepRecord> {
    records
        .iter()
        .min_by(|a, b| (a.t_f - t).abs().total_cmp(&(b.t_f - t).abs()))
}

/// `|overlap(2π) − overlap(1.6π)| < SATURATION_TOL` on the nearest records.
pub fn is_saturated(records: &[SweepRecord]) -> bool {
    match (nearest(records, 2.0 * PI), nearest(records, 1.6 * PI)) {
        (Some(a), Some(b)) => (a.overlap - b.overlap).abs() < SATURATION_TOL,
        _ => false,
    }
}

/// Index of the record with the largest overlap.
pub fn peak_index(records: &[SweepRecord]) -> Option<usize> {
    records
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.overlap.total_cmp(&b.1.overlap))
        .map(|(i, _)| i)
}

/// Interior indices whose overlap is above the previous record and not
/// below the next one.
pub fn local_maxima(records: &[SweepRecord]) -> Vec<usize> {
    (1..records.len().saturating_sub(1))
        .filter(|&i| {
            let o = records[i].overlap;
            o > records[i - 1].overlap && o >= records[i + 1].overlap
        })
        .collect()
}

/// Winning labels with consecutive repeats collapsed.
pub fn structure_sequence(records: &[SweepRecord]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in records {
        if out.last() != Some(&r.structure) {
            out.push(r.structure.clone());
        }
    }
    out
}

/// `(t_before, t_after, from, to)` for every change of winning structure.
pub fn transitions(records: &[SweepRecord]) -> Vec<(f64, f64, String, String)> {
    records
        .windows(2)
        .filter(|w| w[0].structure != w[1].structure)
        .map(|w| (w[0].t_f, w[1].t_f, w[0].structure.clone(), w[1].structure.clone()))
        .collect()
}

/// Largest `√(ρy² + ρz²)` over the middle half of the longest singular
/// segment of a result, or `None` without singular segments.
pub fn singular_excursion(result: &OptimizeResult, scenario: &Scenario, steps: usize) -> Result<Option<f64>> {
    let Some(structure) = &result.structure else {
        return Ok(None);
    };
    let Some((idx, _)) = structure
        .kinds()
        .iter()
        .enumerate()
        .filter(|(_, k)| **k == crate::propagate::SegmentKind::Singular)
        .max_by(|a, b| result.switch_times[a.0].total_cmp(&result.switch_times[b.0]))
    else {
        return Ok(None);
    };
    let sched = result.schedule(scenario.spec.u_bound)?;
    let traj = crate::propagate::evolve_state(scenario.initial, &sched, &scenario.spec, result.t_f / steps.max(1) as f64)?;
    let span = traj.spans[idx];
    let len = span.end_node - span.start_node;
    let (lo, hi) = (span.start_node + len / 4, span.end_node - len / 4);
    Ok(Some(
        traj.states[lo..=hi]
            .iter()
            .map(|r| r.0.y.hypot(r.0.z))
            .fold(0.0, f64::max),
    ))
}

/// Knobs of [`refined_optimum`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineOptions {
    pub search: SearchOptions,
    pub gradient: GradientOptions,
    /// Number of gradient samples.
    pub samples: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            search: SearchOptions::default(),
            gradient: GradientOptions {
                method: GradientMethod::ConjugateGradient,
                max_iter: 4000,
                ..GradientOptions::default()
            },
            samples: 200,
        }
    }
}

/// Realized control of a result averaged at the midpoints of `n` equal cells.
pub fn sampled_controls(result: &OptimizeResult, scenario: &Scenario, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Optimization("need at least one sample".into()));
    }
    let sched = result.schedule(scenario.spec.u_bound)?;
    let traj = evolve_state(scenario.initial, &sched, &scenario.spec, result.t_f / (8 * n) as f64)?;
    Ok((0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) * result.t_f / n as f64;
            let i = traj.times.partition_point(|x| *x <= t).saturating_sub(1);
            traj.stage_controls[i.min(traj.stage_controls.len() - 1)][1]
        })
        .collect())
}

/// Best protocol at one `t_f` from a catalog search combined with gradient
/// descent (from zero control and from the catalog winner) and switching-time
/// refinement of the structures read off the gradient controls.
///
/// Verified candidates win over unverified ones; among verified candidates
/// within `tie_tol` of the lowest cost, segmented protocols win over sampled
/// ones, then fewer segments.
pub fn refined_optimum(
    scenario: &Scenario,
    tf: f64,
    catalog: &[ProtocolStructure],
    opts: &RefineOptions,
) -> Result<OptimizeResult> {
    let mut candidates = Vec::new();
    let mut seeds = vec![None];
    if let Ok(r) = search_structures(scenario, tf, catalog, &opts.search) {
        if let Ok(u) = sampled_controls(&r, scenario, opts.samples) {
            seeds.push(Some(u));
        }
        candidates.push(r);
    }
    for seed in seeds {
        let Ok(g) = gradient_descent_control(opts.samples, tf, scenario, seed, &opts.gradient) else {
            continue;
        };
        let u = g.controls.clone().unwrap_or_default();
        candidates.push(g);
        if let Ok((s, d)) = ProtocolStructure::from_samples(&u, tf, scenario.spec.u_bound) {
            if let Ok(r) = optimize_switching_times(&s, scenario, tf, Some(&d), &opts.search) {
                candidates.push(r);
            }
        }
    }
    let pool: Vec<&OptimizeResult> = if candidates.iter().any(|r| r.report.passed) {
        candidates.iter().filter(|r| r.report.passed).collect()
    } else {
        candidates.iter().collect()
    };
    let lowest = pool.iter().map(|r| r.cost).fold(f64::INFINITY, f64::min);
    pool.into_iter()
        .filter(|r| r.cost <= lowest + opts.search.tie_tol)
        .min_by_key(|r| r.structure.as_ref().map_or(usize::MAX, |s| s.len()))
        .cloned()
        .ok_or_else(|| Error::Optimization(format!("no protocol could be optimized at t_f = {tf}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Channel, SystemSpec};

    fn rec(t: f64, overlap: f64, s: &str) -> SweepRecord {
        SweepRecord {
            t_f: t,
            overlap,
            cost: -overlap,
            structure: s.into(),
            switch_times: vec![t],
            hc_sign: HcSign::Negative,
            hc_mean: -1.0,
            hc_drift: 0.0,
            bang_violations: 0,
            singular_residual: 0.0,
            verified: true,
        }
    }

    #[test]
    fn grids() {
        let g = default_grid();
        assert_eq!(g.len(), 60);
        assert!((g[0] - 0.05 * PI).abs() < 1e-15 && (g[59] - 2.0 * PI).abs() < 1e-12);
        assert_eq!(linear_grid(1.0, 2.0, 1), vec![1.0]);
        assert!(check_grid(&[0.1, 0.1]).is_err());
        assert!(check_grid(&[-0.1, 0.1]).is_err());
    }

    #[test]
    fn classification_and_summaries() {
        let rising = vec![rec(1.0, 0.5, "XY"), rec(2.0, 0.8, "XSY"), rec(3.0, 0.8, "XSY")];
        assert_eq!(classify_records(&rising), Some(CaseClass::CaseI));
        let peaked = vec![rec(1.0, 0.5, "Y"), rec(2.0, 0.95, "YSXY"), rec(3.0, 0.9, "YSXY")];
        assert_eq!(classify_records(&peaked), Some(CaseClass::CaseIi));
        assert_eq!(structure_sequence(&rising), vec!["XY", "XSY"]);
        assert_eq!(transitions(&rising).len(), 1);
        assert_eq!(peak_index(&peaked), Some(1));
        assert_eq!(classify_records(&[]), None);
    }

    #[test]
    fn interior_maxima() {
        let r = vec![rec(1.0, 0.9, "Y"), rec(2.0, 0.6, "Y"), rec(3.0, 0.8, "XYX"), rec(4.0, 0.7, "XYX"), rec(5.0, 0.75, "XYX")];
        assert_eq!(local_maxima(&r), vec![2]);
        assert!(local_maxima(&r[..2]).is_empty());
    }

    #[test]
    fn saturation_proxy() {
        let r = vec![rec(1.6 * PI, 0.905, "A"), rec(2.0 * PI, 0.91, "A")];
        assert!(is_saturated(&r));
        let r = vec![rec(1.6 * PI, 0.8, "A"), rec(2.0 * PI, 0.91, "A")];
        assert!(!is_saturated(&r));
    }

    #[test]
    fn baseline_starts_at_full_overlap_for_retention() {
        let sc = Scenario::retain(SystemSpec::dissipative(0.2, Channel::X, 0.1).unwrap());
        let b = zero_control_baseline(&sc, &[0.0, 0.5, 1.0], 512).unwrap();
        assert!((b[0].overlap - 1.0).abs() < 1e-12);
        assert!(b[1].overlap < 1.0);
    }

    #[test]
    fn uniform_baseline_follows_decay() {
        let sc = Scenario::retain(SystemSpec::dissipative(0.0, Channel::Uniform, 0.1).unwrap());
        let b = zero_control_baseline(&sc, &[PI], 4096).unwrap();
        let rho = crate::model::preparation_initial();
        // rotation about x̂ by 2π returns the state, damped by e^{−Γπ}
        assert!((b[0].overlap - (-0.1 * PI).exp() * rho.dot(&rho)).abs() < 1e-9);
    }

    #[test]
    fn short_sweep_is_sorted_and_verified() {
        let sc = Scenario::prepare(SystemSpec::dissipative(0.2, Channel::Uniform, 0.1).unwrap());
        let catalog: Vec<ProtocolStructure> = ["X", "Y", "XY", "YX"].iter().map(|s| s.parse().unwrap()).collect();
        let opts = SweepOptions {
            search: SearchOptions {
                restarts: 2,
                search_steps: 128,
                verify_steps: 1024,
                ..Default::default()
            },
            ..Default::default()
        };
        let recs = sweep_tf(&sc, &[0.0, 0.05 * PI, 0.1 * PI, 0.2 * PI], &catalog, &opts).unwrap();
        assert!(recs.windows(2).all(|w| w[0].t_f < w[1].t_f));
        assert_eq!(recs[0].t_f, 0.0);
        assert!(recs.iter().skip(1).all(|r| r.overlap >= -1.0 && r.overlap <= 1.0));
        assert!(nearest(&recs, 0.2 * PI).unwrap().verified);
    }
}
