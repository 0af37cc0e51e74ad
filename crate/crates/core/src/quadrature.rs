//! Globally adaptive Gauss–Legendre quadrature on the line.
//!
//! Each panel carries the rule on the whole panel and on its two halves; the
//! difference is the panel's error estimate and the halves' sum is its value.
//! Panels with the largest estimates are bisected until the summed estimate
//! meets the tolerance. Integrand evaluations may run on the rayon pool; the
//! result is independent of scheduling because values are reduced in panel order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Gauss–Legendre points per rule application.
    pub order: usize,
    pub max_panels: usize,
    pub parallel: bool,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-10, order: 10, max_panels: 4000, parallel: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub order: usize,
    pub panels: usize,
    pub min_panel_width: f64,
    /// Largest panel count over all inner integrals of an iterated rule.
    pub inner_panels_max: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub estimated_error: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub grid: GridSpec,
}

/// Nodes and weights of the `m`-point rule on `[-1, 1]`, ascending.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "rule needs at least one point");
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_m.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if m == 0 {
        return (1.0, 0.0);
    }
    (p1, m as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Fixed rule on `[a, b]` with pre-computed nodes.
pub struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Self { nodes, weights }
    }

    pub fn points(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes.iter().map(move |x| c + h * x)
    }

    pub fn combine(&self, a: f64, b: f64, values: &[f64]) -> f64 {
        0.5 * (b - a) * self.weights.iter().zip(values).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    coarse: f64,
    left: f64,
    right: f64,
}

impl Panel {
    fn value(&self) -> f64 {
        self.left + self.right
    }

    fn error(&self) -> f64 {
        (self.value() - self.coarse).abs()
    }
}

fn evaluate_all<F, E>(f: &F, xs: &[f64], parallel: bool) -> Result<Vec<f64>, E>
where
    F: Fn(f64) -> Result<f64, E> + Sync,
    E: Send,
{
    if parallel {
        xs.par_iter().map(|&x| f(x)).collect()
    } else {
        xs.iter().map(|&x| f(x)).collect()
    }
}

/// Applies the rule to each interval in `spans` with one batched evaluation.
fn apply<F, E>(f: &F, rule: &Rule, spans: &[(f64, f64)], parallel: bool) -> Result<Vec<f64>, E>
where
    F: Fn(f64) -> Result<f64, E> + Sync,
    E: Send,
{
    let xs: Vec<f64> = spans.iter().flat_map(|&(a, b)| rule.points(a, b).collect::<Vec<_>>()).collect();
    let vals = evaluate_all(f, &xs, parallel)?;
    let m = rule.order();
    Ok(spans
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| rule.combine(a, b, &vals[i * m..(i + 1) * m]))
        .collect())
}

/// Integrates `f` over `[breakpoints[0], breakpoints[last]]`, never placing a
/// panel edge across an interior breakpoint.
pub fn integrate<F, E>(f: F, breakpoints: &[f64], opts: &QuadratureOptions) -> Result<QuadratureResult, E>
where
    F: Fn(f64) -> Result<f64, E> + Sync,
    E: Send,
{
    let rule = Rule::new(opts.order);
    let m = rule.order();
    let mut edges: Vec<f64> = breakpoints.to_vec();
    edges.dedup();
    let span = match (edges.first(), edges.last()) {
        (Some(a), Some(b)) => (b - a).abs(),
        _ => 0.0,
    };
    if edges.len() < 2 || span == 0.0 {
        let grid = GridSpec { order: m, panels: 0, min_panel_width: 0.0, inner_panels_max: None };
        return Ok(QuadratureResult { value: 0.0, estimated_error: 0.0, evaluations: 0, converged: true, grid });
    }

    let mut evaluations = 0;
    let mut panels = build(&f, &rule, &edges.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>(), None, opts.parallel)?;
    evaluations += 3 * m * panels.len();
    let min_width = 1e-13 * span;

    loop {
        let value: f64 = panels.iter().map(Panel::value).sum();
        let error: f64 = panels.iter().map(Panel::error).sum();
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        let splittable = |p: &Panel| (p.b - p.a).abs() > min_width;
        let done = error <= target || !error.is_finite();
        if done || panels.len() >= opts.max_panels || !panels.iter().any(splittable) {
            panels.sort_by(|x, y| x.a.total_cmp(&y.a));
            let value = panels.iter().map(Panel::value).sum();
            let grid = GridSpec {
                order: m,
                panels: panels.len(),
                min_panel_width: panels.iter().map(|p| (p.b - p.a).abs()).fold(f64::INFINITY, f64::min),
                inner_panels_max: None,
            };
            return Ok(QuadratureResult { value, estimated_error: error, evaluations, converged: error <= target, grid });
        }

        // Worst panels first until the remainder would meet half the target.
        let mut order: Vec<usize> = (0..panels.len()).filter(|&i| splittable(&panels[i])).collect();
        order.sort_by(|&i, &j| panels[j].error().total_cmp(&panels[i].error()).then(i.cmp(&j)));
        let mut remaining = error;
        let budget = (opts.max_panels - panels.len()).max(1);
        let mut chosen = Vec::new();
        for i in order {
            if remaining <= 0.5 * target || chosen.len() >= budget.min(64) {
                break;
            }
            remaining -= panels[i].error();
            chosen.push(i);
        }
        chosen.sort_unstable();
        let mut halves = Vec::with_capacity(2 * chosen.len());
        let mut coarse = Vec::with_capacity(2 * chosen.len());
        for &i in &chosen {
            let p = panels[i];
            let mid = 0.5 * (p.a + p.b);
            halves.push((p.a, mid));
            halves.push((mid, p.b));
            coarse.push(p.left);
            coarse.push(p.right);
        }
        let children = build(&f, &rule, &halves, Some(&coarse), opts.parallel)?;
        evaluations += 2 * m * children.len();
        for (k, &i) in chosen.iter().enumerate().rev() {
            panels[i] = children[2 * k];
            panels.insert(i + 1, children[2 * k + 1]);
        }
    }
}

fn build<F, E>(f: &F, rule: &Rule, spans: &[(f64, f64)], coarse: Option<&[f64]>, parallel: bool) -> Result<Vec<Panel>, E>
where
    F: Fn(f64) -> Result<f64, E> + Sync,
    E: Send,
{
    let mut quarter = Vec::with_capacity(2 * spans.len());
    for &(a, b) in spans {
        let mid = 0.5 * (a + b);
        quarter.push((a, mid));
        quarter.push((mid, b));
    }
    let coarse_vals = match coarse {
        Some(c) => c.to_vec(),
        None => apply(f, rule, spans, parallel)?,
    };
    let halves = apply(f, rule, &quarter, parallel)?;
    Ok(spans
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| Panel { a, b, coarse: coarse_vals[i], left: halves[2 * i], right: halves[2 * i + 1] })
        .collect())
}
