//! Gauss-Legendre rules, composite panels and globally adaptive refinement.
//!
//! Everything here is deterministic: panel splits happen in a fixed order and
//! sums are accumulated left to right, so results are reproducible bit for bit.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Values that can be integrated: reals and complex numbers.
pub trait Integrand:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess followed by Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over [a, b] with this rule.
    pub fn integrate<T: Integrand, F: Fn(f64) -> T>(&self, f: &F, a: f64, b: f64) -> T {
        let h = 0.5 * (b - a);
        let c = 0.5 * (b + a);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(c + h * x) * (w * h);
        }
        acc
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let c = 0.5 * (b + a);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + h * x, w * h))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// The panel rule used by the adaptive integrator.
pub fn panel_rule() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::new(10))
}

/// Tolerances for adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_depth: u32,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-12, rel: 1e-10, max_depth: 60 }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel, ..Self::default() }
    }
}

/// Adaptive Gauss-Legendre integration over [a, b].
pub fn integrate<T: Integrand, F: Fn(f64) -> T>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<T> {
    integrate_pieces(f, &[a, b], tol)
}

/// Adaptive integration over consecutive intervals between `points`
/// (sorted, at least two entries). Breakpoints mark known kinks or sharp
/// transitions so the refinement starts with panels at the right scale.
///
/// Refinement is global: the panel with the largest error estimate is split
/// next until the summed estimate meets the tolerance. Ties break on panel
/// position, so the sequence of splits is deterministic.
pub fn integrate_pieces<T: Integrand, F: Fn(f64) -> T>(f: F, points: &[f64], tol: Tolerance) -> Result<T> {
    if points.len() < 2 {
        return Ok(T::zero());
    }
    let rule = panel_rule();
    let mut heap = BinaryHeap::new();
    let mut err_sum = 0.0;
    let mut scale = 0.0;
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let p = Panel::new(&f, rule, w[0], w[1], 0);
        err_sum += p.err;
        scale += p.value.magnitude();
        heap.push(p);
    }
    let mut splits = 0usize;
    loop {
        let target = tol.abs.max(tol.rel * scale);
        if err_sum <= target {
            break;
        }
        let worst = match heap.peek() {
            Some(p) => p,
            None => break,
        };
        if !worst.err.is_finite() || worst.depth >= tol.max_depth || splits >= MAX_SPLITS {
            return Err(Error::Quadrature(format!(
                "adaptive refinement stalled on [{}, {}] with error {:.3e} > {:.3e}",
                points[0],
                points[points.len() - 1],
                err_sum,
                target
            )));
        }
        let p = heap.pop().expect("peeked");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            return Err(Error::Quadrature(format!("panel [{}, {}] cannot be split further", p.a, p.b)));
        }
        let l = Panel::new(&f, rule, p.a, m, p.depth + 1);
        let r = Panel::new(&f, rule, m, p.b, p.depth + 1);
        err_sum += l.err + r.err - p.err;
        scale += l.value.magnitude() + r.value.magnitude() - p.value.magnitude();
        heap.push(l);
        heap.push(r);
        splits += 1;
        // Guard against drift from the running updates.
        if splits % 1024 == 0 {
            err_sum = heap.iter().map(|p| p.err).sum();
        }
    }
    let mut panels = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut acc = T::zero();
    for p in &panels {
        acc = acc + p.value;
    }
    Ok(acc)
}

const MAX_SPLITS: usize = 200_000;

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
    depth: u32,
}

impl<T: Integrand> Panel<T> {
    fn new<F: Fn(f64) -> T>(f: &F, rule: &GaussRule, a: f64, b: f64, depth: u32) -> Self {
        let m = 0.5 * (a + b);
        let whole = rule.integrate(f, a, b);
        let value = rule.integrate(f, a, m) + rule.integrate(f, m, b);
        let err = (value - whole).magnitude();
        Self { a, b, value, err: if err.is_nan() { f64::INFINITY } else { err }, depth }
    }
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err).then_with(|| o.a.total_cmp(&self.a))
    }
}

/// Composite Gauss-Legendre rule with `panels` equal panels.
pub fn composite<T: Integrand, F: Fn(f64) -> T>(f: &F, a: f64, b: f64, panels: usize, rule: &GaussRule) -> T {
    let h = (b - a) / panels as f64;
    let mut acc = T::zero();
    for i in 0..panels {
        let lo = a + h * i as f64;
        acc = acc + rule.integrate(f, lo, lo + h);
    }
    acc
}
