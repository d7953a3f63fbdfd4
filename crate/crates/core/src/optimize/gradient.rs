use serde::{Deserialize, Serialize};

use super::{OptimizeResult, Scenario};
use crate::error::{Error, Result};
use crate::pmp::{cost_and_gradient, extremal, verify, DEFAULT_TOL_HC, DEFAULT_TOL_PHI};
use crate::propagate::{ControlSchedule, DEFAULT_STEPS};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    /// `u ← clip(u − rate·Φ)`
    #[default]
    Steepest,
    /// Polak-Ribière directions restricted to samples not held at a bound.
    ConjugateGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradientOptions {
    /// Step applied to the cell-averaged switching function; `None` means
    /// `0.5 · t_f / N`.
    pub rate: Option<f64>,
    /// Factor applied to the rate after an accepted step (1 keeps it fixed).
    pub growth: f64,
    pub max_iter: usize,
    /// Stop when the largest sample update falls below this.
    pub stop_tol: f64,
    pub method: GradientMethod,
    /// Integrator steps over `[0, t_f]`.
    pub steps: usize,
    pub tol_hc: f64,
    pub tol_phi: f64,
}

impl Default for GradientOptions {
    fn default() -> Self {
        Self {
            rate: None,
            growth: 1.2,
            max_iter: 5000,
            stop_tol: 1e-9,
            method: GradientMethod::Steepest,
            steps: DEFAULT_STEPS,
            tol_hc: DEFAULT_TOL_HC,
            tol_phi: DEFAULT_TOL_PHI,
        }
    }
}

/// Projected gradient descent on `N` piecewise-constant samples.
///
/// The update direction is the switching function averaged over each hold
/// cell, which is the exact cost gradient divided by the cell length. A step
/// that increases the cost is rejected and the rate halved.
pub fn gradient_descent_control(
    n: usize,
    tf: f64,
    scenario: &Scenario,
    u_init: Option<Vec<f64>>,
    opts: &GradientOptions,
) -> Result<OptimizeResult> {
    if n < 2 {
        return Err(Error::Optimization(format!("need at least 2 samples, got {n}")));
    }
    if !(tf.is_finite() && tf > 0.0) {
        return Err(Error::Optimization(format!("t_f must be > 0, got {tf}")));
    }
    let bound = scenario.spec.u_bound;
    let cell = tf / n as f64;
    let mut rate = opts.rate.unwrap_or(0.5 * cell);
    if !(rate > 0.0) {
        return Err(Error::Optimization(format!("rate must be > 0, got {rate}")));
    }
    let mut u = match u_init {
        Some(v) if v.len() == n => v.into_iter().map(|x| x.clamp(-bound, bound)).collect(),
        Some(v) => {
            return Err(Error::Optimization(format!(
                "initial control has {} samples, expected {n}",
                v.len()
            )))
        }
        None => vec![0.0; n],
    };
    let dt = tf / opts.steps.max(1) as f64;
    let mut evaluations = 0;
    let mut evaluate = |u: &[f64]| -> Result<(f64, Vec<f64>)> {
        evaluations += 1;
        let sched = ControlSchedule::sampled(tf, u.to_vec(), bound)?;
        let (c, g) = cost_and_gradient(scenario.initial, &scenario.target, scenario.cost_kind, &sched, &scenario.spec, dt)?;
        Ok((c, g.into_iter().map(|x| x / cell).collect()))
    };

    let (mut cost, mut phi) = evaluate(&u)?;
    let mut direction: Vec<f64> = phi.iter().map(|p| -p).collect();
    for _ in 0..opts.max_iter {
        let cand: Vec<f64> = u
            .iter()
            .zip(&direction)
            .map(|(x, d)| (x + rate * d).clamp(-bound, bound))
            .collect();
        let update = cand
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if update < opts.stop_tol {
            break;
        }
        let (c, p) = evaluate(&cand)?;
        if c <= cost {
            u = cand;
            cost = c;
            let prev_phi = std::mem::replace(&mut phi, p);
            rate *= opts.growth;
            direction = next_direction(opts.method, &u, &phi, &prev_phi, &direction, bound);
        } else {
            rate *= 0.5;
            if opts.method == GradientMethod::ConjugateGradient {
                direction = phi.iter().map(|p| -p).collect();
            }
        }
    }

    let sched = ControlSchedule::sampled(tf, u.clone(), bound)?;
    let ex = extremal(scenario.initial, &scenario.target, scenario.cost_kind, &sched, &scenario.spec, dt)?;
    let report = verify(&ex.trajectory, &ex.costates, &sched, &scenario.spec, opts.tol_hc, opts.tol_phi)?;
    Ok(OptimizeResult {
        structure: None,
        switch_times: vec![cell; n],
        t_f: tf,
        cost: ex.cost,
        overlap: scenario.target.dot(&ex.trajectory.final_state()),
        evaluations,
        report,
        controls: Some(u),
    })
}

fn next_direction(
    method: GradientMethod,
    u: &[f64],
    phi: &[f64],
    prev_phi: &[f64],
    prev_dir: &[f64],
    bound: f64,
) -> Vec<f64> {
    // samples held at a bound with the gradient pushing outward are frozen
    let free = |i: usize| !((u[i] >= bound && phi[i] < 0.0) || (u[i] <= -bound && phi[i] > 0.0));
    match method {
        GradientMethod::Steepest => phi.iter().map(|p| -p).collect(),
        GradientMethod::ConjugateGradient => {
            let (mut num, mut den) = (0.0, 0.0);
            for i in (0..phi.len()).filter(|&i| free(i)) {
                num += phi[i] * (phi[i] - prev_phi[i]);
                den += prev_phi[i] * prev_phi[i];
            }
            let beta = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
            let d: Vec<f64> = (0..phi.len())
                .map(|i| if free(i) { -phi[i] + beta * prev_dir[i] } else { 0.0 })
                .collect();
            let slope: f64 = d.iter().zip(phi).map(|(a, b)| a * b).sum();
            if slope < 0.0 {
                d
            } else {
                phi.iter().map(|p| -p).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemSpec;
    use crate::model::Channel;
    use crate::propagate::CostKind;
    use std::f64::consts::PI;

    #[test]
    fn retention_with_no_time_keeps_zero_control() {
        let sc = Scenario::retain(SystemSpec::closed(0.2)).with_cost(CostKind::Frobenius);
        let r = gradient_descent_control(8, 1e-4, &sc, None, &GradientOptions { steps: 64, ..Default::default() }).unwrap();
        let u = r.controls.unwrap();
        assert!(u.iter().all(|x| x.abs() < 1e-6), "{u:?}");
        assert!(r.cost < 1e-7);
    }

    #[test]
    fn cost_never_increases() {
        let sc = Scenario::prepare(SystemSpec::dissipative(0.1, Channel::X, 0.2).unwrap());
        let mut last = f64::INFINITY;
        for iters in [0, 5, 20, 60] {
            let opts = GradientOptions { max_iter: iters, steps: 512, ..Default::default() };
            let r = gradient_descent_control(32, 0.6 * PI, &sc, None, &opts).unwrap();
            assert!(r.cost <= last + 1e-15);
            last = r.cost;
        }
    }

    #[test]
    fn conjugate_gradient_reaches_steepest_descent_quality() {
        let sc = Scenario::prepare(SystemSpec::closed(0.2));
        let base = GradientOptions { max_iter: 300, steps: 512, ..Default::default() };
        let sd = gradient_descent_control(32, 0.3 * PI, &sc, None, &base).unwrap();
        let cg = gradient_descent_control(
            32,
            0.3 * PI,
            &sc,
            None,
            &GradientOptions { method: GradientMethod::ConjugateGradient, ..base },
        )
        .unwrap();
        assert!(cg.cost <= sd.cost + 1e-6, "{} {}", cg.cost, sd.cost);
    }

    #[test]
    fn rejects_bad_arguments() {
        let sc = Scenario::prepare(SystemSpec::closed(0.2));
        let o = GradientOptions::default();
        assert!(gradient_descent_control(1, 1.0, &sc, None, &o).is_err());
        assert!(gradient_descent_control(4, 0.0, &sc, None, &o).is_err());
        assert!(gradient_descent_control(4, 1.0, &sc, Some(vec![0.0; 3]), &o).is_err());
        let neg = GradientOptions { rate: Some(-1.0), ..Default::default() };
        assert!(gradient_descent_control(4, 1.0, &sc, None, &neg).is_err());
    }
}
