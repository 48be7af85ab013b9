//! Linear over-smoothing testbed.
//!
//! Node features are drawn from `N(+1, 1)` or `N(−1, 1)` by class, smoothed
//! `k` times with the self-inclusive mean operator `S = (D+I)^{-1}(A+I)`,
//! and a ridge regression from smoothed features to labels is scored on a
//! held-out half of the nodes. Two diagnostics ride along: the Dirichlet
//! energy and the mean cosine distance between nodes of different classes.
//!
//! The Dirichlet energy here is the symmetric normalized Laplacian form
//! `tr(Xᵀ L_sym X) / n`. It is zero on `D^{1/2}·1`, not on constants, so
//! on irregular graphs it need not decay monotonically under mean
//! aggregation (whose fixed points are constants). [`aggregation_energy`]
//! uses the combinatorial form `tr(Xᵀ (D−A) X) / n`, which does.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Node features, one row per node.
pub type Features = DMatrix<f64>;

pub const DEFAULT_RIDGE_ALPHA: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelConfig {
    pub name: String,
    /// `+1` or `−1` per node.
    pub labels: Vec<i8>,
}

impl LabelConfig {
    /// The four labelings of the eight-node chord-ring fixture. `1` is the
    /// original; `2`, `3` and `4` move the positive class around the ring.
    pub fn chord_ring(config: u8) -> Result<Self> {
        let positive: [usize; 4] = match config {
            1 => [0, 1, 6, 7],
            2 => [0, 1, 2, 3],
            3 => [0, 3, 4, 7],
            4 => [0, 2, 4, 6],
            other => {
                return Err(Error::InvalidConfig(format!(
                    "label config must be 1..=4, got {other}"
                )))
            }
        };
        let mut labels = vec![-1i8; 8];
        for node in positive {
            labels[node] = 1;
        }
        Ok(LabelConfig {
            name: format!("config{config}"),
            labels,
        })
    }

    pub fn custom(name: impl Into<String>, labels: Vec<i8>) -> Result<Self> {
        if let Some(row) = labels.iter().position(|&l| l != 1 && l != -1) {
            return Err(Error::InvalidConfig(format!(
                "label of node {row} is {}, expected +1 or -1",
                labels[row]
            )));
        }
        Ok(LabelConfig {
            name: name.into(),
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_members(&self, class: i8) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == class)
            .collect()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if self.labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.labels.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSample {
    pub features: Features,
    pub seed: u64,
}

impl FeatureSample {
    pub fn draw(labels: &LabelConfig, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureSample {
            features: sample_features(labels, dim, &mut rng),
            seed,
        }
    }
}

/// Row `u` is i.i.d. `N(label_u, 1)` in every column.
pub fn sample_features(labels: &LabelConfig, dim: usize, rng: &mut ChaCha8Rng) -> Features {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let n = labels.len();
    let mut x = Features::zeros(n, dim);
    for u in 0..n {
        for c in 0..dim {
            x[(u, c)] = f64::from(labels.labels[u]) + noise.sample(rng);
        }
    }
    x
}

/// One round of `x'_u = (x_u + Σ_{v∼u} x_v) / (1 + d_u)`.
pub fn mean_aggregate(g: &Graph, x: &Features) -> Result<Features> {
    let n = g.num_nodes();
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.nrows(),
        });
    }
    let mut out = x.clone();
    for u in 0..n {
        let scale = 1.0 / (1 + g.degree(u)) as f64;
        let mut row = x.row(u).clone_owned();
        for &v in g.neighbors(u) {
            row += x.row(v);
        }
        out.set_row(u, &(row * scale));
    }
    Ok(out)
}

/// Per-class average after one exact aggregation of the noiseless class
/// means `±1`, as `(positive, negative)`.
pub fn class_mean_informativeness_exact(
    g: &Graph,
    labels: &LabelConfig,
) -> Result<(Ratio<i64>, Ratio<i64>)> {
    labels.check_len(g.num_nodes())?;
    let mut sums = [Ratio::from_integer(0i64); 2];
    let mut counts = [0i64; 2];
    for u in 0..g.num_nodes() {
        let mut total = i64::from(labels.labels[u]);
        for &v in g.neighbors(u) {
            total += i64::from(labels.labels[v]);
        }
        let value = Ratio::new(total, 1 + g.degree(u) as i64);
        let slot = usize::from(labels.labels[u] < 0);
        sums[slot] += value;
        counts[slot] += 1;
    }
    for (slot, class) in [(0, 1i8), (1, -1i8)] {
        if counts[slot] == 0 {
            return Err(Error::DegenerateSplit { class, count: 0 });
        }
    }
    Ok((sums[0] / counts[0], sums[1] / counts[1]))
}

pub fn class_mean_informativeness(g: &Graph, labels: &LabelConfig) -> Result<(f64, f64)> {
    let (pos, neg) = class_mean_informativeness_exact(g, labels)?;
    Ok((ratio_to_f64(pos), ratio_to_f64(neg)))
}

fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `tr(Xᵀ L_sym X) / n`.
pub fn dirichlet_energy(g: &Graph, x: &Features) -> Result<f64> {
    let n = g.num_nodes();
    check_rows(n, x)?;
    if let Some(node) = (0..n).find(|&u| g.degree(u) == 0) {
        return Err(Error::ZeroDegreeNode { node });
    }
    let inv_sqrt: Vec<f64> = (0..n).map(|u| 1.0 / (g.degree(u) as f64).sqrt()).collect();
    let total: f64 = g
        .edges()
        .map(|e| {
            let a = x.row(e.u) * inv_sqrt[e.u];
            let b = x.row(e.v) * inv_sqrt[e.v];
            (a - b).norm_squared()
        })
        .sum();
    Ok(total / n as f64)
}

/// `tr(Xᵀ (D−A) X) / n`, which vanishes on constant features.
pub fn aggregation_energy(g: &Graph, x: &Features) -> Result<f64> {
    check_rows(g.num_nodes(), x)?;
    let total: f64 = g
        .edges()
        .map(|e| (x.row(e.u) - x.row(e.v)).norm_squared())
        .sum();
    Ok(total / g.num_nodes().max(1) as f64)
}

fn check_rows(n: usize, x: &Features) -> Result<()> {
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.nrows(),
        });
    }
    Ok(())
}

/// Mean of `1 − cos(x_u, x_v)` over every pair with `u` positive and `v`
/// negative.
pub fn interclass_cosine_distance(x: &Features, labels: &LabelConfig) -> Result<f64> {
    check_rows(labels.len(), x)?;
    let pos = labels.class_members(1);
    let neg = labels.class_members(-1);
    for (class, members) in [(1i8, &pos), (-1i8, &neg)] {
        if members.is_empty() {
            return Err(Error::DegenerateSplit { class, count: 0 });
        }
    }
    let norms: Vec<f64> = (0..x.nrows()).map(|u| x.row(u).norm()).collect();
    if let Some(row) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroVectorRow { row });
    }
    let mut total = 0.0;
    for &u in &pos {
        for &v in &neg {
            let cos = x.row(u).dot(&x.row(v)) / (norms[u] * norms[v]);
            total += 1.0 - cos;
        }
    }
    Ok(total / (pos.len() * neg.len()) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// Largest aggregation order `K`; orders `0..=K` are reported.
    pub max_order: usize,
    pub trials: usize,
    pub ridge_alpha: f64,
    pub seed: u64,
    pub dim: usize,
    /// Also record Dirichlet energy and cosine distance per order.
    pub diagnostics: bool,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            max_order: 10,
            trials: 200,
            ridge_alpha: DEFAULT_RIDGE_ALPHA,
            seed: 0,
            dim: 1,
            diagnostics: true,
        }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidConfig(
                "feature dimension must be at least 1".into(),
            ));
        }
        if !(self.ridge_alpha.is_finite() && self.ridge_alpha >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "ridge alpha must be finite and non-negative, got {}",
                self.ridge_alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStats {
    pub order: usize,
    pub mse_mean: f64,
    /// Population standard deviation over trials.
    pub mse_std: f64,
    pub dirichlet: Option<f64>,
    pub cosine_dist: Option<f64>,
    /// Trial-averaged mean feature of the positive class.
    pub positive_mean: Vec<f64>,
    pub negative_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub labels: String,
    pub config: SmoothingConfig,
    pub orders: Vec<OrderStats>,
}

impl SmoothingReport {
    pub fn mse_at(&self, order: usize) -> f64 {
        self.orders[order].mse_mean
    }

    /// Columns `order, mse_mean, mse_std, dirichlet, cosine_dist`; missing
    /// diagnostics are empty cells.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidConfig(format!("csv write failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["order", "mse_mean", "mse_std", "dirichlet", "cosine_dist"])
            .map_err(io)?;
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.17e}")).unwrap_or_default();
        for row in &self.orders {
            w.write_record([
                row.order.to_string(),
                format!("{:.17e}", row.mse_mean),
                format!("{:.17e}", row.mse_std),
                opt(row.dirichlet),
                opt(row.cosine_dist),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidConfig(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

struct TrialOutcome {
    mse: Vec<f64>,
    dirichlet: Vec<f64>,
    cosine: Vec<f64>,
    class_means: Vec<(DVector<f64>, DVector<f64>)>,
}

/// Test MSE of ridge regression on `S^k X` for `k = 0..=K`, averaged over
/// trials. Features and the split depend only on the labels and the seed,
/// so runs on different graphs with the same labels share them.
pub fn smoothing_mse_curve(
    g: &Graph,
    labels: &LabelConfig,
    cfg: &SmoothingConfig,
) -> Result<SmoothingReport> {
    cfg.validate()?;
    labels.check_len(g.num_nodes())?;
    for class in [1i8, -1] {
        let count = labels.class_members(class).len();
        if count < 2 {
            return Err(Error::DegenerateSplit { class, count });
        }
    }

    let outcomes: Vec<TrialOutcome> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial| run_trial(g, labels, cfg, trial))
        .collect::<Result<_>>()?;

    let t = outcomes.len() as f64;
    let orders = (0..=cfg.max_order)
        .map(|k| {
            let mean = outcomes.iter().map(|o| o.mse[k]).sum::<f64>() / t;
            let var = outcomes
                .iter()
                .map(|o| (o.mse[k] - mean).powi(2))
                .sum::<f64>()
                / t;
            let avg = |f: &dyn Fn(&TrialOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / t;
            let mut pos = DVector::zeros(cfg.dim);
            let mut neg = DVector::zeros(cfg.dim);
            for o in &outcomes {
                pos += &o.class_means[k].0;
                neg += &o.class_means[k].1;
            }
            OrderStats {
                order: k,
                mse_mean: mean,
                mse_std: var.sqrt(),
                dirichlet: cfg.diagnostics.then(|| avg(&|o| o.dirichlet[k])),
                cosine_dist: cfg.diagnostics.then(|| avg(&|o| o.cosine[k])),
                positive_mean: (pos / t).iter().copied().collect(),
                negative_mean: (neg / t).iter().copied().collect(),
            }
        })
        .collect();

    Ok(SmoothingReport {
        labels: labels.name.clone(),
        config: cfg.clone(),
        orders,
    })
}

fn run_trial(
    g: &Graph,
    labels: &LabelConfig,
    cfg: &SmoothingConfig,
    trial: u64,
) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial);
    let mut x = sample_features(labels, cfg.dim, &mut rng);
    let (train, test) = stratified_split(labels, &mut rng);
    let y: Vec<f64> = labels.labels.iter().map(|&l| f64::from(l)).collect();
    let pos = labels.class_members(1);
    let neg = labels.class_members(-1);

    let mut out = TrialOutcome {
        mse: Vec::with_capacity(cfg.max_order + 1),
        dirichlet: Vec::new(),
        cosine: Vec::new(),
        class_means: Vec::with_capacity(cfg.max_order + 1),
    };
    for k in 0..=cfg.max_order {
        if k > 0 {
            x = mean_aggregate(g, &x)?;
        }
        out.mse
            .push(ridge_test_mse(&x, &y, &train, &test, cfg.ridge_alpha));
        out.class_means
            .push((row_mean(&x, &pos), row_mean(&x, &neg)));
        if cfg.diagnostics {
            out.dirichlet.push(dirichlet_energy(g, &x)?);
            out.cosine.push(interclass_cosine_distance(&x, labels)?);
        }
    }
    Ok(out)
}

/// Half of each class (rounded down) goes to training, the rest to test.
fn stratified_split(labels: &LabelConfig, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [1i8, -1] {
        let mut members = labels.class_members(class);
        members.shuffle(rng);
        let half = members.len() / 2;
        train.extend_from_slice(&members[..half]);
        test.extend_from_slice(&members[half..]);
    }
    (train, test)
}

fn row_mean(x: &Features, rows: &[usize]) -> DVector<f64> {
    let mut acc = DVector::zeros(x.ncols());
    for &r in rows {
        acc += x.row(r).transpose();
    }
    acc / rows.len() as f64
}

/// Fits `y ≈ Xw + b` on `train` with penalty `α‖w‖²` (intercept
/// unpenalized) and returns the mean squared error on `test`.
pub fn ridge_test_mse(x: &Features, y: &[f64], train: &[usize], test: &[usize], alpha: f64) -> f64 {
    let dim = x.ncols();
    let x_mean = row_mean(x, train);
    let y_mean = train.iter().map(|&i| y[i]).sum::<f64>() / train.len() as f64;

    let mut gram = DMatrix::<f64>::identity(dim, dim) * alpha;
    let mut rhs = DVector::<f64>::zeros(dim);
    for &i in train {
        let xc = x.row(i).transpose() - &x_mean;
        gram += &xc * xc.transpose();
        rhs += &xc * (y[i] - y_mean);
    }
    // A singular Gram matrix (α = 0 on collapsed features) leaves the
    // intercept-only model.
    let w = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.pseudo_inverse(1e-12).ok().map(|p| p * &rhs))
        .unwrap_or_else(|| DVector::zeros(dim));
    let b = y_mean - x_mean.dot(&w);

    test.iter()
        .map(|&i| {
            let pred = x.row(i).transpose().dot(&w) + b;
            (pred - y[i]).powi(2)
        })
        .sum::<f64>()
        / test.len() as f64
}
