//! Limited-memory BFGS minimisation with a strong-Wolfe line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop once the largest gradient component falls below this.
    pub grad_tol: f64,
    /// Stop once an accepted step improves the objective by less than this fraction.
    pub rel_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 2000,
            grad_tol: 1e-6,
            rel_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    RelativeImprovement,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub reason: StopReason,
    pub trace: Vec<TraceEntry>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Point {
    alpha: f64,
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

struct Search<'a, F> {
    objective: &'a mut F,
    x: &'a [f64],
    d: &'a [f64],
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> Search<'_, F> {
    fn eval(&mut self, alpha: f64) -> Point {
        let x: Vec<f64> = self.x.iter().zip(self.d).map(|(x, d)| x + alpha * d).collect();
        let (f, g) = (self.objective)(&x);
        self.evaluations += 1;
        let (f, slope) = if f.is_finite() && g.iter().all(|v| v.is_finite()) {
            (f, dot(&g, self.d))
        } else {
            (f64::INFINITY, f64::NAN)
        };
        Point { alpha, x, f, g, slope }
    }
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

fn interpolate(lo: &Point, hi: &Point) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let width = b - a;
    let fallback = a + 0.5 * width;
    if !hi.f.is_finite() || !hi.slope.is_finite() {
        return fallback;
    }
    // Minimiser of the cubic through both values and slopes.
    let d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if disc < 0.0 {
        return fallback;
    }
    let d2 = width.signum() * disc.sqrt();
    let t = b - width * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
    let (min, max) = (a.min(b), a.max(b));
    let margin = 0.1 * width.abs();
    if t.is_finite() && t > min + margin && t < max - margin {
        t
    } else {
        fallback
    }
}

/// Returns the accepted point, or the best decreasing point seen if the
/// Wolfe conditions could not be met, or `None` if nothing decreased.
fn line_search<F>(search: &mut Search<'_, F>, f0: f64, slope0: f64, first_step: f64) -> Option<Point>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut best: Option<Point> = None;
    let keep = |p: &Point, best: &mut Option<Point>| {
        if p.f < f0 && best.as_ref().is_none_or(|b| p.f < b.f) {
            *best = Some(Point {
                alpha: p.alpha,
                x: p.x.clone(),
                f: p.f,
                g: p.g.clone(),
                slope: p.slope,
            });
        }
    };
    let armijo = |p: &Point| p.f <= f0 + C1 * p.alpha * slope0;
    let curvature = |p: &Point| p.slope.abs() <= -C2 * slope0;

    let mut prev = Point {
        alpha: 0.0,
        x: search.x.to_vec(),
        f: f0,
        g: Vec::new(),
        slope: slope0,
    };
    let mut alpha = first_step;
    let bracket = 'expand: {
        for i in 0..40 {
            let p = search.eval(alpha);
            keep(&p, &mut best);
            if !armijo(&p) || (i > 0 && p.f >= prev.f) {
                break 'expand Some((prev, p));
            }
            if curvature(&p) {
                return Some(p);
            }
            if p.slope >= 0.0 {
                break 'expand Some((p, prev));
            }
            alpha *= 2.0;
            prev = p;
        }
        None
    };
    let (mut lo, mut hi) = bracket?;
    for _ in 0..40 {
        let a = interpolate(&lo, &hi);
        if (hi.alpha - lo.alpha).abs() < 1e-16 * lo.alpha.abs().max(1.0) {
            break;
        }
        let p = search.eval(a);
        keep(&p, &mut best);
        if !armijo(&p) || p.f >= lo.f {
            hi = p;
        } else {
            if curvature(&p) {
                return Some(p);
            }
            if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
    }
    best
}

/// Minimise `objective` (returning value and gradient) from `x0`. A
/// non-finite value is treated as `+inf`, so steps into invalid regions are
/// simply shortened.
pub fn minimize<F>(mut objective: F, x0: &[f64], options: &LbfgsOptions) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (mut f, mut g) = objective(x0);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("objective is not finite at the start point: {f}")));
    }
    let mut x = x0.to_vec();
    let mut evaluations = 1;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(options.memory);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        objective: f,
        grad_norm: inf_norm(&g),
        step: 0.0,
    }];
    let mut iterations = 0;
    let mut reason = StopReason::MaxIterations;

    while iterations < options.max_iters {
        if inf_norm(&g) < options.grad_tol {
            reason = StopReason::GradientTolerance;
            break;
        }
        let mut d = two_loop(&g, &history);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = two_loop(&g, &history);
            slope = dot(&g, &d);
        }
        let mut found = None;
        for attempt in 0..2 {
            if attempt == 1 {
                if history.is_empty() {
                    break;
                }
                history.clear();
                d = two_loop(&g, &history);
                slope = dot(&g, &d);
            }
            let mut search = Search {
                objective: &mut objective,
                x: &x,
                d: &d,
                evaluations: 0,
            };
            found = line_search(&mut search, f, slope, 1.0);
            evaluations += search.evaluations;
            if found.is_some() {
                break;
            }
        }
        let Some(p) = found else {
            reason = StopReason::LineSearchFailed;
            break;
        };
        iterations += 1;

        let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == options.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let improvement = (f - p.f) / f.abs().max(p.f.abs()).max(1.0);
        x = p.x;
        f = p.f;
        g = p.g;
        trace.push(TraceEntry {
            iteration: iterations,
            objective: f,
            grad_norm: inf_norm(&g),
            step: p.alpha,
        });
        if improvement < options.rel_tol {
            reason = StopReason::RelativeImprovement;
            break;
        }
    }
    let converged = matches!(reason, StopReason::GradientTolerance | StopReason::RelativeImprovement)
        || inf_norm(&g) < options.grad_tol;
    Ok(LbfgsOutcome {
        x,
        f,
        grad: g,
        iterations,
        evaluations,
        converged,
        reason,
        trace,
    })
}

/// `-H g` for the inverse-Hessian approximation held in `history`; plain
/// steepest descent scaled to unit length when the history is empty.
fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let Some((s_last, y_last, _)) = history.back() else {
        let norm = dot(g, g).sqrt().max(1.0);
        return g.iter().map(|v| -v / norm).collect();
    };
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let gamma = dot(s_last, y_last) / dot(y_last, y_last);
    for qi in &mut q {
        *qi *= gamma;
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}
