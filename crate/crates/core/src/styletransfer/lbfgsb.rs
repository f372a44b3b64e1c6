//! Projected limited-memory BFGS with box constraints: two-loop recursion on
//! the free variables, backtracking Armijo search along the projected path.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Real;

const ARMIJO_C1: f64 = 1e-4;
const CURVATURE_MIN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Bounds<T> {
    Unbounded,
    Uniform { lower: T, upper: T },
    PerVariable { lower: Vec<T>, upper: Vec<T> },
}

impl<T: Real> Bounds<T> {
    fn lower(&self, i: usize) -> T {
        match self {
            Bounds::Unbounded => T::neg_infinity(),
            Bounds::Uniform { lower, .. } => *lower,
            Bounds::PerVariable { lower, .. } => lower[i],
        }
    }

    fn upper(&self, i: usize) -> T {
        match self {
            Bounds::Unbounded => T::infinity(),
            Bounds::Uniform { upper, .. } => *upper,
            Bounds::PerVariable { upper, .. } => upper[i],
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let ok = match self {
            Bounds::Unbounded => true,
            Bounds::Uniform { lower, upper } => lower <= upper,
            Bounds::PerVariable { lower, upper } => {
                if lower.len() != n || upper.len() != n {
                    return Err(Error::Shape(format!(
                        "{} / {} bounds for {n} variables",
                        lower.len(),
                        upper.len()
                    )));
                }
                lower.iter().zip(upper).all(|(l, u)| l <= u)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "lower bound exceeds upper bound".into(),
            ))
        }
    }

    #[inline]
    fn project(&self, i: usize, v: T) -> T {
        v.max(self.lower(i)).min(self.upper(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig<T = f64> {
    /// Number of stored `(s, y)` pairs.
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when the projected gradient's ∞-norm drops below this.
    pub grad_tol: T,
    /// Stop when `(f_k − f_{k+1}) ≤ loss_rel_tol · max(|f_k|, |f_{k+1}|, 1)`.
    pub loss_rel_tol: T,
    pub bounds: Bounds<T>,
    /// Halvings tried per line search before giving up.
    pub max_backtracks: usize,
}

impl<T: Real> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 100,
            grad_tol: T::lit(1e-6),
            loss_rel_tol: T::lit(1e-9),
            bounds: Bounds::Unbounded,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    LossTolerance,
    MaxIterations,
    /// No step along the (steepest-descent fallback) direction decreased the
    /// objective.
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimization<T = f64> {
    pub x: Vec<T>,
    /// Objective at the start point followed by every accepted iterate.
    pub trace: Vec<T>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// `x0` was outside the box and had to be clamped.
    pub start_clamped: bool,
}

impl<T: Real> Minimization<T> {
    pub fn final_loss(&self) -> T {
        *self.trace.last().expect("trace holds the start value")
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Minimizes `objective` (returning value and gradient) over the box.
pub fn lbfgsb_minimize<T, F>(
    mut objective: F,
    x0: &[T],
    cfg: &OptimizerConfig<T>,
) -> Result<Minimization<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    let n = x0.len();
    if cfg.memory == 0 {
        return Err(Error::InvalidArgument(
            "optimizer memory must be at least 1".into(),
        ));
    }
    cfg.bounds.validate(n)?;
    let b = &cfg.bounds;
    let mut x: Vec<T> = x0
        .iter()
        .enumerate()
        .map(|(i, &v)| b.project(i, v))
        .collect();
    let start_clamped = x.iter().zip(x0).any(|(a, b)| a != b);
    if start_clamped {
        log::warn!("optimizer start point outside the box; clamped");
    }

    let mut eval = |x: &[T], count: &mut usize| -> Result<(T, Vec<T>)> {
        *count += 1;
        let (f, g) = objective(x)?;
        if g.len() != n {
            return Err(Error::Shape(format!(
                "gradient has {} entries, expected {n}",
                g.len()
            )));
        }
        Ok((f, g))
    };
    let mut evaluations = 0;
    let (mut f, mut g) = eval(&x, &mut evaluations)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteObjective);
    }

    let mut trace = vec![f];
    let mut pairs: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;
    let c1 = T::lit(ARMIJO_C1);
    let half = T::lit(0.5);

    let termination = loop {
        let pg: Vec<T> = (0..n).map(|i| b.project(i, x[i] - g[i]) - x[i]).collect();
        if inf_norm(&pg) < cfg.grad_tol {
            break Termination::GradientTolerance;
        }
        if iterations >= cfg.max_iters {
            break Termination::MaxIterations;
        }

        // Variables pinned at a bound with the gradient pushing outward.
        let active: Vec<bool> = (0..n)
            .map(|i| {
                (x[i] <= b.lower(i) && g[i] > T::zero()) || (x[i] >= b.upper(i) && g[i] < T::zero())
            })
            .collect();
        let reduced: Vec<T> = (0..n)
            .map(|i| if active[i] { T::zero() } else { g[i] })
            .collect();

        let mut accepted = None;
        // Quasi-Newton direction first; on failure retry once along −g.
        loop {
            let mut d = if pairs.is_empty() {
                reduced.iter().map(|&v| -v).collect()
            } else {
                two_loop(&reduced, &pairs)
            };
            for (di, &a) in d.iter_mut().zip(&active) {
                if a {
                    *di = T::zero();
                }
            }
            let slope = dot(&d, &g);
            if slope.is_nan() || slope >= T::zero() {
                if pairs.is_empty() {
                    break;
                }
                pairs.clear();
                continue;
            }
            let mut t = if pairs.is_empty() {
                T::one().min(T::one() / inf_norm(&d))
            } else {
                T::one()
            };
            for _ in 0..=cfg.max_backtracks {
                let xt: Vec<T> = (0..n).map(|i| b.project(i, x[i] + t * d[i])).collect();
                let step: Vec<T> = xt.iter().zip(&x).map(|(&a, &b)| a - b).collect();
                let decrease = dot(&g, &step);
                if decrease < T::zero() {
                    let (ft, gt) = eval(&xt, &mut evaluations)?;
                    let finite = ft.is_finite() && gt.iter().all(|v| v.is_finite());
                    if finite && ft <= f + c1 * decrease && ft <= f {
                        accepted = Some((xt, ft, gt));
                        break;
                    }
                }
                t *= half;
            }
            if accepted.is_some() || pairs.is_empty() {
                break;
            }
            pairs.clear();
        }

        let Some((xn, fnew, gn)) = accepted else {
            break Termination::LineSearchFailed;
        };
        let s: Vec<T> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = gn.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::lit(CURVATURE_MIN) {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, sy));
        }
        let f_prev = f;
        x = xn;
        f = fnew;
        g = gn;
        iterations += 1;
        trace.push(f);
        let scale = f_prev.abs().max(f.abs()).max(T::one());
        if f_prev - f <= cfg.loss_rel_tol * scale {
            break Termination::LossTolerance;
        }
    };

    Ok(Minimization {
        x,
        trace,
        iterations,
        evaluations,
        termination,
        start_clamped,
    })
}

/// `−H·q` with the inverse-Hessian approximation built from `pairs`.
fn two_loop<T: Real>(q: &[T], pairs: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut r = q.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, sy) in pairs.iter().rev() {
        let a = dot(s, &r) / *sy;
        for (ri, &yi) in r.iter_mut().zip(y) {
            *ri -= a * yi;
        }
        alphas.push(a);
    }
    let (_, y, sy) = pairs.back().expect("non-empty memory");
    let gamma = *sy / dot(y, y);
    for ri in &mut r {
        *ri *= gamma;
    }
    for ((s, y, sy), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let beta = dot(y, &r) / *sy;
        for (ri, &si) in r.iter_mut().zip(s) {
            *ri += (a - beta) * si;
        }
    }
    r.iter().map(|&v| -v).collect()
}
