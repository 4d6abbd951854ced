use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{domain, Error, Result};

/// Node count used by every operating-characteristic integral unless overridden.
pub const DEFAULT_NODES: usize = 201;

/// A Gauss–Legendre integral over a finite interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub node_count: usize,
    pub lower: f64,
    pub upper: f64,
}

impl QuadratureSpec {
    pub fn new(node_count: usize, lower: f64, upper: f64) -> Result<Self> {
        if node_count < 2 {
            return Err(domain(format!("quadrature needs at least 2 nodes, got {node_count}")));
        }
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(domain(format!("quadrature interval [{lower}, {upper}] is not a finite, ordered range")));
        }
        Ok(Self { node_count, lower, upper })
    }
}

/// Resolution of the fixed observation grid used to trace data-dependent
/// rejection regions: `resolution` points per standard error, covering
/// `span` standard errors either side of the range of interest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub resolution: usize,
    pub span: f64,
}

impl GridSpec {
    pub fn new(resolution: usize, span: f64) -> Result<Self> {
        if resolution < 100 {
            return Err(domain(format!("grid resolution must be at least 100, got {resolution}")));
        }
        if !(span >= 8.0) {
            return Err(domain(format!("grid span must be at least 8 standard errors, got {span}")));
        }
        Ok(Self { resolution, span })
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { resolution: 400, span: 8.0 }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on the Legendre recurrence.
    pub fn new(node_count: usize) -> Self {
        let n = node_count;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut deriv = 0.0;
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                deriv = dp;
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            if dp != 0.0 {
                deriv = dp;
            }
            let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared, lazily built rule for `node_count` nodes.
    pub fn cached(node_count: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(node_count)
            .or_insert_with(|| Arc::new(GaussLegendre::new(node_count)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[lower, upper]`.
    pub fn mapped(&self, lower: f64, upper: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (upper - lower);
        let mid = 0.5 * (upper + lower);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, lower: f64, upper: f64, mut f: F) -> f64 {
        self.mapped(lower, upper).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre estimate of `∫ f` over the spec's interval.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, spec: &QuadratureSpec) -> Result<f64> {
    let rule = GaussLegendre::cached(spec.node_count);
    let mut total = 0.0;
    for (x, w) in rule.mapped(spec.lower, spec.upper) {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::Integration(format!("integrand is {v} at x = {x}")));
        }
        total += w * v;
    }
    Ok(total)
}
