//! Closed forms and fixtures: ring spectra, the Braess criterion for edge
//! additions, the chord-ring family, and brute-force Cheeger constants.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeDelta, GeneratorSpec, Graph, GraphFamily};
use crate::spectral::{self, dot, exact_spectrum, proxy_gap_delta, SpectrumEstimate};

/// Subset enumeration is exponential; refuse anything larger.
pub const CHEEGER_NODE_LIMIT: usize = 20;

/// Criterion values at or below this are treated as zero. Exact zeros of
/// the criterion (e.g. `f_u = f_v = 0`) come out of floating point as
/// values around 1e-30 of either sign.
pub const CERTIFY_MARGIN: f64 = 1e-12;

/// Spectral gap of the ring `R_n`: `1 − cos(2π/n)`.
pub fn ring_gap(n: usize) -> f64 {
    assert!(n >= 3, "a ring needs at least 3 nodes");
    1.0 - (2.0 * PI / n as f64).cos()
}

/// Unit vector `√2(μ sin(2πk/n) + ν cos(2πk/n)) / √(n(μ²+ν²))` in the
/// two-dimensional gap eigenspace of `R_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingEigenbasis {
    pub n: usize,
    pub mu: f64,
    pub nu: f64,
}

impl RingEigenbasis {
    pub fn new(n: usize, mu: f64, nu: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidConfig(format!("ring size {n} is below 3")));
        }
        if mu == 0.0 && nu == 0.0 {
            return Err(Error::InvalidConfig(
                "(mu, nu) must not both be zero".into(),
            ));
        }
        Ok(RingEigenbasis { n, mu, nu })
    }

    pub fn vector(&self) -> Vec<f64> {
        let n = self.n as f64;
        let scale = 2f64.sqrt() / (n * (self.mu * self.mu + self.nu * self.nu)).sqrt();
        (0..self.n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n;
                scale * (self.mu * t.sin() + self.nu * t.cos())
            })
            .collect()
    }
}

/// Everything the addition criterion needs for a candidate non-edge.
#[derive(Debug, Clone, Copy)]
pub struct EldanInputs<'a> {
    pub graph: &'a Graph,
    pub gap: f64,
    pub fiedler: &'a [f64],
    pub edge: Edge,
}

impl<'a> EldanInputs<'a> {
    pub fn from_estimate(graph: &'a Graph, est: &'a SpectrumEstimate, edge: Edge) -> Self {
        EldanInputs {
            graph,
            gap: est.gap,
            fiedler: &est.fiedler,
            edge,
        }
    }

    /// `⟨f, f̂₀⟩`, where `f̂₀ ∝ D̂^{1/2}·1` is the kernel vector of the graph
    /// with `edge` added.
    pub fn projection(&self) -> f64 {
        projection_with_degrees(&self.graph.degrees(), self.fiedler, self.edge)
    }
}

/// Braess criterion `g(u, v, L)` for adding the non-edge `(u, v)`.
///
/// A strictly positive value certifies that the addition lowers the
/// spectral gap; read backwards, deleting `(u, v)` from the denser graph
/// raises it.
pub fn eldan_criterion(inputs: &EldanInputs<'_>) -> Result<f64> {
    let Edge { u, v } = inputs.edge;
    let g = inputs.graph;
    if v >= g.num_nodes() {
        return Err(Error::NodeOutOfRange {
            node: v,
            num_nodes: g.num_nodes(),
        });
    }
    if g.has_edge(inputs.edge) {
        return Err(Error::EdgeAlreadyPresent { u, v });
    }
    if inputs.fiedler.len() != g.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: g.num_nodes(),
            got: inputs.fiedler.len(),
        });
    }
    for node in [u, v] {
        if g.degree(node) == 0 {
            return Err(Error::ZeroDegreeNode { node });
        }
    }
    Ok(eldan_criterion_from_degrees(
        &g.degrees(),
        inputs.gap,
        inputs.fiedler,
        inputs.edge,
    ))
}

/// The criterion evaluated against an explicit degree sequence.
pub fn eldan_criterion_from_degrees(degrees: &[usize], gap: f64, f: &[f64], edge: Edge) -> f64 {
    let Edge { u, v } = edge;
    let p = projection_with_degrees(degrees, f, edge);
    let du = degrees[u] as f64;
    let dv = degrees[v] as f64;
    let shrink = |d: f64| ((d + 1.0).sqrt() - d.sqrt()) / (d + 1.0).sqrt();
    let (fu, fv) = (f[u], f[v]);
    -p * p * gap - 2.0 * (1.0 - gap) * (shrink(du) * fu * fu + shrink(dv) * fv * fv)
        + 2.0 * fu * fv / ((du + 1.0).sqrt() * (dv + 1.0).sqrt())
}

fn projection_with_degrees(degrees: &[usize], f: &[f64], edge: Edge) -> f64 {
    let bumped = |k: usize| degrees[k] as f64 + if k == edge.u || k == edge.v { 1.0 } else { 0.0 };
    let volume: f64 = (0..degrees.len()).map(bumped).sum();
    let norm = volume.sqrt();
    (0..degrees.len())
        .map(|k| f[k] * bumped(k).sqrt() / norm)
        .sum()
}

/// The eight-node Braess family: a ring `R_8` (`sparse`), the ring with
/// chord `{0,3}` (`base`), and the base plus `{0,5}` (`plus`) or `{4,7}`
/// (`tilde_plus`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChordRingFixture {
    pub sparse: Graph,
    pub base: Graph,
    pub plus: Graph,
    pub tilde_plus: Graph,
    /// Reference gaps rounded to four decimals, in the order
    /// `sparse, base, plus, tilde_plus`.
    pub reference_gaps: [f64; 4],
    /// `+1` for nodes {0, 1, 6, 7}, `−1` for {2, 3, 4, 5}.
    pub labels: Vec<i8>,
}

impl ChordRingFixture {
    pub const NAMES: [&'static str; 4] = ["sparse", "base", "plus", "tilde_plus"];

    pub fn graphs(&self) -> [(&'static str, &Graph); 4] {
        [
            (Self::NAMES[0], &self.sparse),
            (Self::NAMES[1], &self.base),
            (Self::NAMES[2], &self.plus),
            (Self::NAMES[3], &self.tilde_plus),
        ]
    }
}

pub fn chord_ring_fixture() -> ChordRingFixture {
    let sparse = crate::graph::generate(&GeneratorSpec::new(GraphFamily::Ring { n: 8 }, 0))
        .expect("R_8 is a valid ring");
    let base = sparse
        .with_delta(EdgeDelta::add(0, 3))
        .expect("chord absent from ring");
    let plus = base.with_delta(EdgeDelta::add(0, 5)).expect("edge absent");
    let tilde_plus = base.with_delta(EdgeDelta::add(4, 7)).expect("edge absent");
    let mut labels = vec![-1i8; 8];
    for node in [0, 1, 6, 7] {
        labels[node] = 1;
    }
    ChordRingFixture {
        sparse,
        base,
        plus,
        tilde_plus,
        reference_gaps: [0.2929, 0.2829, 0.3545, 0.2713],
        labels,
    }
}

/// Exact Cheeger constant `min_S |∂S| / min(Vol S, Vol V∖S)` by
/// enumerating every split of the node set.
pub fn cheeger_constant(g: &Graph) -> Result<f64> {
    let n = g.num_nodes();
    if n > CHEEGER_NODE_LIMIT {
        return Err(Error::GraphTooLargeForEnumeration {
            num_nodes: n,
            limit: CHEEGER_NODE_LIMIT,
        });
    }
    if n < 2 {
        return Err(Error::InvalidConfig(
            "a Cheeger constant needs at least two nodes".into(),
        ));
    }
    if !g.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let edges: Vec<Edge> = g.edges().collect();
    let degrees = g.degrees();
    let total_volume: usize = degrees.iter().sum();
    // Node n−1 always stays outside S so each split is visited once.
    let mut best = f64::INFINITY;
    for mask in 1u32..(1u32 << (n - 1)) {
        let inside = |x: usize| mask >> x & 1 == 1;
        let volume: usize = (0..n - 1).filter(|&x| inside(x)).map(|x| degrees[x]).sum();
        let cut = edges.iter().filter(|e| inside(e.u) != inside(e.v)).count();
        let denom = volume.min(total_volume - volume);
        best = best.min(cut as f64 / denom as f64);
    }
    Ok(best)
}

/// One recomputed cell of the criteria table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaCell {
    pub row: usize,
    pub cell: String,
    pub expected: f64,
    pub computed: f64,
    pub abs_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CriteriaReport {
    pub cells: Vec<CriteriaCell>,
}

impl CriteriaReport {
    pub const TOLERANCE: f64 = 1e-5;

    pub fn all_pass(&self) -> bool {
        self.cells.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Reference values per row: criterion, proxy for deleting the edge from
/// the denser graph, proxy for adding it to the sparser graph, and the
/// true gap change of the addition.
const REFERENCE_ROWS: [(Edge, [f64; 4]); 3] = [
    (
        Edge { u: 0, v: 3 },
        [0.003867, 0.027992, -0.017678, -0.01002],
    ),
    (
        Edge { u: 0, v: 5 },
        [-0.146246, -0.064550, 0.415994, 0.071632],
    ),
    (
        Edge { u: 4, v: 7 },
        [0.004952, 0.032403, -0.024739, -0.011584],
    ),
];

const CELL_NAMES: [&str; 4] = ["criterion", "proxy_delete", "proxy_add", "gap_change"];

/// Recomputes the twelve reference criteria for the chord-ring family.
///
/// Row 1 (`R_8` → base) uses the ring eigenvector `f^(3,1)` for both the
/// criterion and the addition proxy, since the ring's gap is degenerate.
/// Rows 2 and 3 use the dense eigenvector of the base graph. The reference
/// criterion values were produced with the degree sequence of the
/// underlying ring (every node of degree 2); the cells reproduce that, and
/// [`eldan_criterion`] itself always uses the graph's actual degrees.
pub fn verify_criteria_table() -> Result<CriteriaReport> {
    let fx = chord_ring_fixture();
    let ring_degrees = fx.sparse.degrees();

    let sparse_exact = exact_spectrum(&fx.sparse)?;
    let ring_vector = RingEigenbasis::new(8, 3.0, 1.0)?.vector();
    let ring_est = SpectrumEstimate {
        fiedler: ring_vector,
        ..sparse_exact.clone()
    };
    let base_exact = exact_spectrum(&fx.base)?;

    let rows: [(&Graph, &SpectrumEstimate, &Graph); 3] = [
        (&fx.sparse, &ring_est, &fx.base),
        (&fx.base, &base_exact, &fx.plus),
        (&fx.base, &base_exact, &fx.tilde_plus),
    ];

    let mut cells = Vec::with_capacity(12);
    for (i, ((sparse, sparse_est, dense), (edge, expected))) in
        rows.iter().zip(REFERENCE_ROWS).enumerate()
    {
        let dense_exact = exact_spectrum(dense)?;
        let criterion =
            eldan_criterion_from_degrees(&ring_degrees, sparse_est.gap, &sparse_est.fiedler, edge);
        let proxy_delete = proxy_gap_delta(
            &dense_exact,
            EdgeDelta {
                edge,
                direction: crate::graph::Direction::Delete,
            },
        );
        let proxy_add = proxy_gap_delta(
            sparse_est,
            EdgeDelta {
                edge,
                direction: crate::graph::Direction::Add,
            },
        );
        let sparse_gap = exact_spectrum(sparse)?.gap;
        let gap_change = dense_exact.gap - sparse_gap;

        for (name, (computed, expected)) in CELL_NAMES.iter().zip(
            [criterion, proxy_delete, proxy_add, gap_change]
                .into_iter()
                .zip(expected),
        ) {
            let abs_error = (computed - expected).abs();
            cells.push(CriteriaCell {
                row: i + 1,
                cell: name.to_string(),
                expected,
                computed,
                abs_error,
                pass: abs_error <= CriteriaReport::TOLERANCE,
            });
        }
    }
    Ok(CriteriaReport { cells })
}

/// `‖L f − λ f‖₂` for an arbitrary vector; handy when checking fixtures.
pub fn eigen_residual(g: &Graph, f: &[f64], lambda: f64) -> Result<f64> {
    let y = spectral::normalized_laplacian_apply(g, f)?;
    let r: Vec<f64> = y.iter().zip(f).map(|(a, b)| a - lambda * b).collect();
    Ok(dot(&r, &r).sqrt())
}
