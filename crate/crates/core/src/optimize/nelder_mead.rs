//! Derivative-free simplex minimization.

/// Reflection, expansion, contraction and shrink coefficients plus stopping
/// rules.
#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadOptions {
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub sigma: f64,
    pub max_evals: usize,
    /// Stop when the spread of vertex values is below `ftol`...
    pub ftol: f64,
    /// ...and every vertex lies within `xtol` (max norm) of the best one.
    pub xtol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            gamma: 2.0,
            rho: 0.5,
            sigma: 0.5,
            max_evals: 2000,
            ftol: 1e-13,
            xtol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Axis-aligned start simplex: `x0` plus `x0 + step·e_i`.
pub fn initial_simplex(x0: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut s = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step;
        s.push(v);
    }
    s
}

fn combine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b − a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Minimizes `f` from the given simplex of `n + 1` vertices. A
/// zero-dimensional problem is a single evaluation.
pub fn minimize<F>(mut f: F, simplex: Vec<Vec<f64>>, opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = simplex[0].len();
    assert_eq!(simplex.len(), n + 1, "simplex needs n + 1 vertices");
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut pts: Vec<(Vec<f64>, f64)> = simplex
        .into_iter()
        .map(|x| {
            let fx = eval(&x, &mut evals);
            (x, fx)
        })
        .collect();
    if n == 0 {
        let (x, fx) = pts.pop().expect("one vertex");
        return NelderMeadResult { x, fx, evals, converged: true };
    }

    let mut converged = false;
    while evals < opts.max_evals {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (pts[0].1, pts[n].1);
        let spread = worst - best;
        let size = pts[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&pts[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= opts.ftol && size <= opts.xtol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &pts[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst_x = pts[n].0.clone();
        let xr = combine(&centroid, &worst_x, -opts.alpha);
        let fr = eval(&xr, &mut evals);
        if fr < pts[0].1 {
            let xe = combine(&centroid, &worst_x, -opts.alpha * opts.gamma);
            let fe = eval(&xe, &mut evals);
            pts[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < pts[n - 1].1 {
            pts[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < pts[n].1 {
            // outside contraction
            let xc = combine(&centroid, &xr, opts.rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = combine(&centroid, &worst_x, opts.rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(pts[n].1) {
            pts[n] = (xc, fc);
            continue;
        }
        let best_x = pts[0].0.clone();
        for p in pts.iter_mut().skip(1) {
            let x = combine(&best_x, &p.0, opts.sigma);
            let fx = eval(&x, &mut evals);
            *p = (x, fx);
        }
    }
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = pts.swap_remove(0);
    NelderMeadResult { x, fx, evals, converged }
}
