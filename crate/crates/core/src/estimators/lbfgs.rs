use std::collections::VecDeque;
use std::time::{Duration, Instant};

use super::Objective;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Stop once the gradient max-norm is at most this.
    pub tol_grad: f64,
    pub max_iter: usize,
    /// Number of stored curvature pairs.
    pub memory: usize,
    /// Sufficient-increase constant of the strong Wolfe conditions.
    pub c1: f64,
    /// Curvature constant of the strong Wolfe conditions.
    pub c2: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol_grad: 1e-6,
            max_iter: 500,
            memory: 10,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub elapsed: Duration,
    pub converged: bool,
    /// Set when the line search could not find an acceptable step; the best
    /// iterate found so far is returned.
    pub line_search_failed: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimisation view of the objective: `f = −L`, `∇f = −∇L`.
struct Negated<'a> {
    inner: &'a dyn Objective,
    evaluations: usize,
}

impl Negated<'_> {
    fn eval(&mut self, x: &[f64]) -> (f64, Vec<f64>) {
        self.evaluations += 1;
        let (v, mut g) = self.inner.value_and_gradient(x);
        g.iter_mut().for_each(|gi| *gi = -*gi);
        (-v, g)
    }
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

/// Minimiser of the cubic through `(a, fa, da)` and `(b, fb, db)`, kept inside
/// the interval with a safeguard towards bisection.
fn cubic_step(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (hi - lo);
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let candidate = if disc >= 0.0 {
        let d2 = (b - a).signum() * disc.sqrt();
        b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2)
    } else {
        f64::NAN
    };
    if candidate.is_finite() && candidate >= lo + margin && candidate <= hi - margin {
        candidate
    } else {
        0.5 * (lo + hi)
    }
}

const MAX_BRACKET: usize = 30;
const MAX_ZOOM: usize = 40;
const APPROX_WOLFE_EPS: f64 = 1e-12;

/// Strong Wolfe step followed by a secant step on the directional
/// derivative, which is exact along quadratic directions; the better of the
/// two acceptable points is kept.
fn line_search(
    fun: &mut Negated<'_>,
    p: &Point,
    d: &[f64],
    alpha0: f64,
    opts: &FitOptions,
    best: &mut Point,
) -> Option<(f64, Point)> {
    let (alpha, pt) = wolfe_search(fun, p, d, alpha0, opts, best)?;
    let d0 = dot(&p.g, d);
    let da = dot(&pt.g, d);
    if da.abs() <= 1e-10 * d0.abs() || da == d0 {
        return Some((alpha, pt));
    }
    let secant = alpha * d0 / (d0 - da);
    if !(secant.is_finite() && secant > 0.0) {
        return Some((alpha, pt));
    }
    let x: Vec<f64> = p.x.iter().zip(d).map(|(xi, di)| xi + secant * di).collect();
    let (f, g) = fun.eval(&x);
    let ds = dot(&g, d);
    let acceptable = f.is_finite()
        && g.iter().all(|v| v.is_finite())
        && f <= pt.f
        && f <= p.f + opts.c1 * secant * d0
        && ds.abs() <= -opts.c2 * d0;
    if acceptable {
        if f < best.f {
            *best = Point {
                x: x.clone(),
                f,
                g: g.clone(),
            };
        }
        Some((secant, Point { x, f, g }))
    } else {
        Some((alpha, pt))
    }
}

/// Strong Wolfe line search along `d` from `p`. `None` when no acceptable
/// step is found.
fn wolfe_search(
    fun: &mut Negated<'_>,
    p: &Point,
    d: &[f64],
    alpha0: f64,
    opts: &FitOptions,
    best: &mut Point,
) -> Option<(f64, Point)> {
    let f0 = p.f;
    let d0 = dot(&p.g, d);
    let mut probe = |alpha: f64, best: &mut Point| -> Point {
        let x: Vec<f64> = p.x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        let (f, g) = fun.eval(&x);
        let f = if f.is_finite() && g.iter().all(|v| v.is_finite()) {
            f
        } else {
            f64::INFINITY
        };
        if f < best.f {
            *best = Point {
                x: x.clone(),
                f,
                g: g.clone(),
            };
        }
        Point { x, f, g }
    };
    let armijo = |alpha: f64, f: f64| f <= f0 + opts.c1 * alpha * d0;
    let curvature = |dphi: f64| dphi.abs() <= -opts.c2 * d0;
    // Near the optimum `f` changes by less than its rounding error, so the
    // sufficient-decrease test is replaced by a derivative test.
    let approx_wolfe = |f: f64, dphi: f64| {
        f <= f0 + APPROX_WOLFE_EPS * f0.abs().max(1.0)
            && dphi >= opts.c2 * d0
            && dphi <= (2.0 * opts.c1 - 1.0) * d0
    };

    let (mut a_prev, mut f_prev, mut d_prev) = (0.0, f0, d0);
    let mut alpha = alpha0;
    let bracket = 'search: {
        for i in 0..MAX_BRACKET {
            let pt = probe(alpha, best);
            let dphi = if pt.f.is_finite() {
                dot(&pt.g, d)
            } else {
                f64::NAN
            };
            if approx_wolfe(pt.f, dphi) && !armijo(alpha, pt.f) {
                return Some((alpha, pt));
            }
            if !armijo(alpha, pt.f) || (i > 0 && pt.f >= f_prev) {
                break 'search (a_prev, f_prev, d_prev, alpha, pt.f, dphi);
            }
            if curvature(dphi) {
                return Some((alpha, pt));
            }
            if dphi >= 0.0 {
                break 'search (alpha, pt.f, dphi, a_prev, f_prev, d_prev);
            }
            a_prev = alpha;
            f_prev = pt.f;
            d_prev = dphi;
            alpha *= 2.0;
        }
        return None;
    };

    let (mut lo, mut f_lo, mut d_lo, mut hi, mut f_hi, mut d_hi) = bracket;
    for _ in 0..MAX_ZOOM {
        let alpha = if f_hi.is_finite() && d_hi.is_finite() {
            cubic_step(lo, f_lo, d_lo, hi, f_hi, d_hi)
        } else {
            0.5 * (lo + hi)
        };
        let pt = probe(alpha, best);
        let dphi = if pt.f.is_finite() {
            dot(&pt.g, d)
        } else {
            f64::NAN
        };
        if approx_wolfe(pt.f, dphi) {
            return Some((alpha, pt));
        }
        if !armijo(alpha, pt.f) || pt.f >= f_lo {
            hi = alpha;
            f_hi = pt.f;
            d_hi = dphi;
        } else {
            if curvature(dphi) {
                return Some((alpha, pt));
            }
            if dphi * (hi - lo) >= 0.0 {
                hi = lo;
                f_hi = f_lo;
                d_hi = d_lo;
            }
            lo = alpha;
            f_lo = pt.f;
            d_lo = dphi;
        }
        if (hi - lo).abs() <= 1e-16 * lo.abs().max(1.0) {
            break;
        }
    }
    None
}

/// Maximises `objective` from `x0` with L-BFGS (two-loop recursion, strong
/// Wolfe line search). Returns the best iterate seen.
pub fn maximize(
    objective: &dyn Objective,
    x0: Vec<f64>,
    opts: &FitOptions,
) -> (Vec<f64>, FitReport) {
    let started = Instant::now();
    assert_eq!(x0.len(), objective.dim(), "initial point dimension");
    let mut fun = Negated {
        inner: objective,
        evaluations: 0,
    };
    let (f, g) = fun.eval(&x0);
    let mut p = Point { x: x0, f, g };
    let mut best = Point {
        x: p.x.clone(),
        f: p.f,
        g: p.g.clone(),
    };
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let mut converged = false;
    let mut failed = false;

    while iterations < opts.max_iter {
        if max_norm(&p.g) <= opts.tol_grad {
            converged = true;
            break;
        }
        let mut d = two_loop(&p.g, &history);
        if dot(&d, &p.g) >= 0.0 {
            history.clear();
            d = p.g.iter().map(|v| -v).collect();
        }
        let alpha0 = if history.is_empty() {
            (1.0 / max_norm(&p.g)).min(1.0)
        } else {
            1.0
        };
        let step = match line_search(&mut fun, &p, &d, alpha0, opts, &mut best) {
            Some(step) => Some(step),
            None if !history.is_empty() => {
                // retry once along steepest descent with a fresh memory
                history.clear();
                d = p.g.iter().map(|v| -v).collect();
                let alpha0 = (1.0 / max_norm(&p.g)).min(1.0);
                line_search(&mut fun, &p, &d, alpha0, opts, &mut best)
            }
            None => None,
        };
        let Some((_, next)) = step else {
            failed = true;
            break;
        };
        iterations += 1;
        let s: Vec<f64> = next.x.iter().zip(&p.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&p.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        p = next;
    }
    if !converged && !failed && max_norm(&p.g) <= opts.tol_grad {
        converged = true;
    }
    // the last accepted iterate is the best one unless the search failed
    let result = if best.f < p.f { best } else { p };
    let report = FitReport {
        objective: -result.f,
        grad_norm: max_norm(&result.g),
        iterations,
        evaluations: fun.evaluations,
        elapsed: started.elapsed(),
        converged: converged || max_norm(&result.g) <= opts.tol_grad,
        line_search_failed: failed,
    };
    (result.x, report)
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
