//! Limited-memory BFGS for smooth convex objectives.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop once ‖g‖ ≤ tolerance · max(1, |f|).
    pub tolerance: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iterations: 10_000,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f`, which writes the gradient into its second argument and
/// returns the value.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut restarted = false;

    let done = |fx: f64, g: &[f64]| norm(g) <= opts.tolerance * fx.abs().max(1.0);

    while !done(fx, &g) && iterations < opts.max_iterations {
        iterations += 1;
        let d = direction(&g, &history);
        let dg = dot(&d, &g);
        let (d, dg) = if dg < 0.0 {
            (d, dg)
        } else {
            history.clear();
            let d: Vec<f64> = g.iter().map(|v| -v).collect();
            let dg = dot(&d, &g);
            (d, dg)
        };
        let step0 = if history.is_empty() {
            (1.0 / norm(&g)).min(1.0)
        } else {
            1.0
        };
        match line_search(&mut f, &x, fx, dg, &d, step0) {
            Some((alpha, fnew, gnew)) => {
                let s: Vec<f64> = d.iter().map(|v| alpha * v).collect();
                let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                for (xi, si) in x.iter_mut().zip(&s) {
                    *xi += si;
                }
                fx = fnew;
                g = gnew;
                if sy > 0.0 {
                    if history.len() == opts.memory {
                        history.pop_front();
                    }
                    history.push_back((s, y, 1.0 / sy));
                }
                restarted = false;
            }
            None if !restarted && !history.is_empty() => {
                history.clear();
                restarted = true;
            }
            None => break,
        }
    }

    let gradient_norm = norm(&g);
    LbfgsResult {
        converged: done(fx, &g),
        x,
        value: fx,
        gradient_norm,
        iterations,
    }
}

/// Two-loop recursion: approximate −H⁻¹g.
fn direction(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
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
        for qi in &mut q {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Finds a step whose directional derivative satisfies the approximate Wolfe
/// conditions φ'(0)·0.9 ≤ φ'(α) ≤ −0.8·φ'(0), which for a convex φ also
/// bounds the value. Uses only derivative signs, so it keeps working when
/// value differences fall below rounding.
fn line_search<F>(
    f: &mut F,
    x: &[f64],
    fx: f64,
    dg0: f64,
    d: &[f64],
    step0: f64,
) -> Option<(f64, f64, Vec<f64>)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    const SIGMA: f64 = 0.9;
    const DELTA: f64 = 0.1;
    let lower = SIGMA * dg0;
    let upper = (2.0 * DELTA - 1.0) * dg0;
    // guards against accepting a point where the value blew up
    let slack = 1e-10 * fx.abs().max(1.0);

    let mut lo = 0.0;
    let mut dlo = dg0;
    let mut hi = f64::INFINITY;
    let mut dhi = f64::NAN;
    let mut alpha = step0;
    let mut xt = vec![0.0; x.len()];
    let mut gt = vec![0.0; x.len()];
    for _ in 0..80 {
        for ((t, xi), di) in xt.iter_mut().zip(x).zip(d) {
            *t = xi + alpha * di;
        }
        let ft = f(&xt, &mut gt);
        let dg = dot(&gt, d);
        if !ft.is_finite() || !dg.is_finite() {
            hi = alpha;
            dhi = f64::NAN;
        } else if dg < lower {
            lo = alpha;
            dlo = dg;
        } else if dg > upper {
            hi = alpha;
            dhi = dg;
        } else if ft <= fx + slack {
            return Some((alpha, ft, gt));
        } else {
            hi = alpha;
            dhi = f64::NAN;
        }
        alpha = if hi.is_infinite() {
            lo * 2.0
        } else if dhi.is_finite() && dhi > dlo {
            // secant on φ', kept inside the middle of the bracket
            let root = lo - dlo * (hi - lo) / (dhi - dlo);
            let w = hi - lo;
            root.clamp(lo + 0.1 * w, hi - 0.1 * w)
        } else {
            0.5 * (lo + hi)
        };
        if hi.is_finite() && (hi - lo) <= f64::EPSILON * hi {
            return None;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let center = [3.0, -2.0, 0.5];
        let scale = [1.0, 100.0, 0.01];
        let r = minimize(
            |x, g| {
                let mut v = 0.0;
                for i in 0..3 {
                    let e = x[i] - center[i];
                    v += 0.5 * scale[i] * e * e;
                    g[i] = scale[i] * e;
                }
                v
            },
            vec![0.0; 3],
            LbfgsOptions::default(),
        );
        assert!(r.converged);
        for (x, c) in r.x.iter().zip(center) {
            assert!((x - c).abs() < 1e-6, "{:?}", r.x);
        }
    }

    #[test]
    fn rosenbrock() {
        let r = minimize(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            vec![-1.2, 1.0],
            LbfgsOptions::default(),
        );
        assert!(r.converged, "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn reports_non_convergence() {
        let r = minimize(
            |x, g| {
                g[0] = 1.0;
                x[0]
            },
            vec![0.0],
            LbfgsOptions {
                max_iterations: 5,
                ..LbfgsOptions::default()
            },
        );
        assert!(!r.converged);
        assert_eq!(r.gradient_norm, 1.0);
    }
}
