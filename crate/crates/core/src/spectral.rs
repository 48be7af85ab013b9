//! Spectral gap of the symmetric normalized Laplacian
//! `L = I - D^{-1/2} A D^{-1/2}`.
//!
//! Two routes are provided: a dense full eigendecomposition used as the
//! ground truth on small graphs, and a warm-startable deflated power
//! iteration that scales with the number of edges.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeDelta, Graph};

/// Size guard for the dense oracle.
pub const DENSE_NODE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    /// Smallest non-zero eigenvalue; reported as 0 for disconnected graphs.
    pub gap: f64,
    /// Residual `‖L f − gap·f‖₂` achieved by `fiedler`.
    pub residual: f64,
    /// Unit eigenvector for `gap`; its largest-magnitude entry is positive.
    pub fiedler: Vec<f64>,
    /// Unit kernel vector `D^{1/2}·1 / ‖D^{1/2}·1‖`.
    pub ground: Vec<f64>,
    pub iterations: usize,
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub warm_start: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-10,
            max_iterations: 5000,
            warm_start: None,
        }
    }
}

impl SolverConfig {
    pub fn warm(mut self, start: Vec<f64>) -> Self {
        self.warm_start = Some(start);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Normalized Laplacian in CSR form with precomputed edge weights
/// `1/√(d_u d_v)`.
pub(crate) struct LaplacianOperator {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    ground: Vec<f64>,
}

impl LaplacianOperator {
    pub(crate) fn new(g: &Graph) -> Result<Self> {
        let n = g.num_nodes();
        let mut inv_sqrt = Vec::with_capacity(n);
        for u in 0..n {
            match g.degree(u) {
                0 => return Err(Error::ZeroDegreeNode { node: u }),
                d => inv_sqrt.push(1.0 / (d as f64).sqrt()),
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::with_capacity(2 * g.num_edges());
        let mut weights = Vec::with_capacity(2 * g.num_edges());
        offsets.push(0);
        for u in 0..n {
            for &v in g.neighbors(u) {
                targets.push(v);
                weights.push(inv_sqrt[u] * inv_sqrt[v]);
            }
            offsets.push(targets.len());
        }
        Ok(LaplacianOperator {
            offsets,
            targets,
            weights,
            ground: ground_state(g),
        })
    }

    pub(crate) fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (u, out) in y.iter_mut().enumerate() {
            let range = self.offsets[u]..self.offsets[u + 1];
            let acc: f64 = self.targets[range.clone()]
                .iter()
                .zip(&self.weights[range])
                .map(|(&v, &w)| w * x[v])
                .sum();
            *out = x[u] - acc;
        }
    }
}

/// `y = L x`, matrix-free in `O(|E|)`.
pub fn normalized_laplacian_apply(g: &Graph, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != g.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: g.num_nodes(),
            got: x.len(),
        });
    }
    let op = LaplacianOperator::new(g)?;
    let mut y = vec![0.0; x.len()];
    op.apply_into(x, &mut y);
    Ok(y)
}

/// Unit vector proportional to `D^{1/2}·1`.
pub fn ground_state(g: &Graph) -> Vec<f64> {
    let mut f: Vec<f64> = g.degrees().into_iter().map(|d| (d as f64).sqrt()).collect();
    normalize(&mut f);
    f
}

/// Dense symmetric eigendecomposition of the normalized Laplacian.
pub fn exact_spectrum(g: &Graph) -> Result<SpectrumEstimate> {
    let n = g.num_nodes();
    if n > DENSE_NODE_LIMIT {
        return Err(Error::GraphTooLargeForDense {
            num_nodes: n,
            limit: DENSE_NODE_LIMIT,
        });
    }
    if n < 2 {
        return Err(Error::InvalidConfig(
            "a spectral gap needs at least two nodes".into(),
        ));
    }
    let op = LaplacianOperator::new(g)?;
    let mut dense = DMatrix::<f64>::identity(n, n);
    for u in 0..n {
        for k in op.offsets[u]..op.offsets[u + 1] {
            dense[(u, op.targets[k])] = -op.weights[k];
        }
    }
    let eig = SymmetricEigen::new(dense);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let idx = order[1];
    let lambda = eig.eigenvalues[idx];
    let mut fiedler: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
    normalize(&mut fiedler);
    orient(&mut fiedler);

    let residual = residual(&op, &fiedler, lambda);
    let connected = g.is_connected();
    Ok(SpectrumEstimate {
        gap: if connected {
            lambda.clamp(0.0, 2.0)
        } else {
            0.0
        },
        residual,
        fiedler,
        ground: op.ground,
        iterations: 0,
        connected,
    })
}

/// Deflated power iteration on `2I − L`.
///
/// The known top pair of `2I − L` (eigenvalue 2, vector `ground`) is
/// projected out every step, so the iteration converges to the eigenvector
/// of the spectral gap. Convergence is measured by the eigen-residual.
/// On `NotConverged` the best estimate is returned inside the error.
pub fn iterative_spectrum(g: &Graph, cfg: &SolverConfig) -> Result<SpectrumEstimate> {
    cfg.validate()?;
    let n = g.num_nodes();
    if n < 2 {
        return Err(Error::InvalidConfig(
            "a spectral gap needs at least two nodes".into(),
        ));
    }
    if let Some(w) = &cfg.warm_start {
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: w.len(),
            });
        }
    }
    let op = LaplacianOperator::new(g)?;
    let start = cfg
        .warm_start
        .as_deref()
        .and_then(|w| deflated_unit(w, &op.ground))
        .unwrap_or_else(|| cold_start(&op.ground));

    let run = power_iterate(&op, start, cfg.max_iterations, cfg.tolerance);
    let connected = g.is_connected();
    let estimate = run.into_estimate(op.ground, connected);
    if estimate.residual <= cfg.tolerance {
        Ok(estimate)
    } else {
        Err(Error::NotConverged {
            estimate: Box::new(estimate),
        })
    }
}

/// Fixed number of deflated power steps from `start`, without a
/// convergence requirement. Used for cheap per-candidate refinements.
pub fn refine_steps(g: &Graph, start: &[f64], steps: usize) -> Result<SpectrumEstimate> {
    if start.len() != g.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: g.num_nodes(),
            got: start.len(),
        });
    }
    let op = LaplacianOperator::new(g)?;
    let x = deflated_unit(start, &op.ground).unwrap_or_else(|| cold_start(&op.ground));
    // One extra pass evaluates the Rayleigh quotient of the final iterate.
    let run = power_iterate(&op, x, steps + 1, 0.0);
    Ok(run.into_estimate(op.ground, true))
}

/// First-order change of the gap for one edge flip:
/// `Δw · ((f_u − f_v)² − λ (f_u² + f_v²))`.
pub fn proxy_gap_delta(est: &SpectrumEstimate, delta: EdgeDelta) -> f64 {
    let fu = est.fiedler[delta.edge.u];
    let fv = est.fiedler[delta.edge.v];
    delta.direction.weight() * ((fu - fv).powi(2) - est.gap * (fu * fu + fv * fv))
}

struct PowerRun {
    vector: Vec<f64>,
    lambda: f64,
    residual: f64,
    iterations: usize,
}

impl PowerRun {
    fn into_estimate(self, ground: Vec<f64>, connected: bool) -> SpectrumEstimate {
        let mut fiedler = self.vector;
        orient(&mut fiedler);
        SpectrumEstimate {
            gap: if connected {
                self.lambda.clamp(0.0, 2.0)
            } else {
                0.0
            },
            residual: self.residual,
            fiedler,
            ground,
            iterations: self.iterations,
            connected,
        }
    }
}

fn power_iterate(op: &LaplacianOperator, mut x: Vec<f64>, max_iter: usize, tol: f64) -> PowerRun {
    let n = x.len();
    let mut y = vec![0.0; n];
    let mut lambda = f64::NAN;
    let mut res = f64::INFINITY;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        op.apply_into(&x, &mut y);
        lambda = dot(&x, &y);
        res = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| (yi - lambda * xi).powi(2))
            .sum::<f64>()
            .sqrt();
        if res <= tol || it == max_iter {
            break;
        }
        // x ← (2I − L) x, then remove the ground component and rescale.
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = 2.0 * *xi - yi;
        }
        match deflated_unit(&x, &op.ground) {
            Some(next) => x = next,
            None => break,
        }
    }
    PowerRun {
        vector: x,
        lambda,
        residual: res,
        iterations,
    }
}

/// Deterministic start: an alternating ±1 pattern plus a linear ramp,
/// deflated against the ground vector. The ramp keeps the start from
/// being an exact eigenvector on bipartite graphs.
fn cold_start(ground: &[f64]) -> Vec<f64> {
    let n = ground.len() as f64;
    let raw: Vec<f64> = (0..ground.len())
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign + (i as f64 + 1.0) / n
        })
        .collect();
    deflated_unit(&raw, ground).expect("cold start is never parallel to the ground vector")
}

fn deflated_unit(x: &[f64], ground: &[f64]) -> Option<Vec<f64>> {
    let c = dot(x, ground);
    let mut out: Vec<f64> = x.iter().zip(ground).map(|(a, b)| a - c * b).collect();
    let norm = dot(&out, &out).sqrt();
    if norm.is_nan() || norm <= 1e-300 || !norm.is_finite() {
        return None;
    }
    out.iter_mut().for_each(|v| *v /= norm);
    Some(out)
}

fn residual(op: &LaplacianOperator, f: &[f64], lambda: f64) -> f64 {
    let mut y = vec![0.0; f.len()];
    op.apply_into(f, &mut y);
    y.iter()
        .zip(f)
        .map(|(yi, fi)| (yi - lambda * fi).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) {
    let norm = dot(x, x).sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Flips `x` so that its largest-magnitude entry is positive; the lowest
/// index wins ties. Magnitudes within `ORIENT_TIE` count as tied, so
/// symmetric eigenvectors are not oriented by rounding noise.
fn orient(x: &mut [f64]) {
    const ORIENT_TIE: f64 = 1e-12;
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > x[best].abs() + ORIENT_TIE {
            best = i;
        }
    }
    if x.get(best).is_some_and(|&v| v < 0.0) {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}
