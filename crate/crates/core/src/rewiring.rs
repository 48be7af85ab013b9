//! Greedy rewiring: score candidate flips against the current eigenpair,
//! apply the best `M`, refresh the eigenpair, repeat.
//!
//! Three scoring rules share the loop. `Proxy` ranks by the first-order
//! gap change, `Eldan` by the Braess criterion, and `ExactGreedy` by the
//! true gap change from a dense solve per candidate.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{eldan_criterion, EldanInputs, CERTIFY_MARGIN};
use crate::error::{Error, Result};
use crate::graph::{Direction, Edge, EdgeDelta, Graph};
use crate::spectral::{
    exact_spectrum, iterative_spectrum, proxy_gap_delta, refine_steps, SolverConfig,
    SpectrumEstimate, DENSE_NODE_LIMIT,
};

pub const DEFAULT_CANDIDATE_CAP: usize = 10_000;

/// Power steps used to estimate the pruned graph's eigenpair for each
/// deletion candidate under the Eldan rule.
pub const ELDAN_DELETE_REFINE_STEPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Proxy,
    Eldan,
    ExactGreedy,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Proxy => "proxy",
            Strategy::Eldan => "eldan",
            Strategy::ExactGreedy => "exact",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proxy" => Ok(Strategy::Proxy),
            "eldan" => Ok(Strategy::Eldan),
            "exact" | "exact-greedy" | "exact_greedy" => Ok(Strategy::ExactGreedy),
            other => Err(Error::InvalidConfig(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewirePlan {
    pub direction: Direction,
    pub strategy: Strategy,
    /// Number of edges to modify.
    pub budget: usize,
    /// Edges modified between eigenpair refreshes.
    pub update_period: usize,
    /// Sample at most this many non-edges per pass when adding. `None`
    /// scores every non-edge.
    pub candidate_cap: Option<usize>,
    pub seed: u64,
    /// Eldan only: stop once no candidate satisfies the criterion.
    pub stop_on_criterion: bool,
    /// Skip deletions that would disconnect the graph.
    pub forbid_disconnect: bool,
    /// Accept disconnected inputs and rewire them as a whole.
    pub allow_disconnected_input: bool,
    pub solver_tolerance: f64,
    pub solver_max_iterations: usize,
    /// Eldan deletion only: power steps spent estimating each pruned
    /// graph's eigenpair. The criterion is a guarantee only for an exact
    /// eigenpair, so small counts trade soundness for speed.
    pub eldan_refine_steps: usize,
}

impl RewirePlan {
    pub fn new(direction: Direction, strategy: Strategy, budget: usize) -> Self {
        let solver = SolverConfig::default();
        RewirePlan {
            direction,
            strategy,
            budget,
            update_period: 1,
            candidate_cap: Some(DEFAULT_CANDIDATE_CAP),
            seed: 0,
            stop_on_criterion: false,
            forbid_disconnect: false,
            allow_disconnected_input: false,
            solver_tolerance: solver.tolerance,
            solver_max_iterations: solver.max_iterations,
            eldan_refine_steps: ELDAN_DELETE_REFINE_STEPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidConfig("budget must be at least 1".into()));
        }
        if self.update_period == 0 {
            return Err(Error::InvalidConfig(
                "update period must be at least 1".into(),
            ));
        }
        if self.candidate_cap == Some(0) {
            return Err(Error::InvalidConfig(
                "candidate cap must be at least 1".into(),
            ));
        }
        if self.stop_on_criterion && self.strategy != Strategy::Eldan {
            return Err(Error::InvalidConfig(format!(
                "stop-on-criterion is only defined for the eldan strategy, not {}",
                self.strategy
            )));
        }
        self.solver_config().validate()
    }

    fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            tolerance: self.solver_tolerance,
            max_iterations: self.solver_max_iterations,
            warm_start: None,
        }
    }

    /// The quantity `select_best` maximizes.
    fn objective(&self, score: &EdgeScore) -> f64 {
        match (self.strategy, self.direction) {
            (Strategy::Eldan, Direction::Add) => -score.value,
            _ => score.value,
        }
    }

    /// Whether a score certifies its flip under the Eldan rule: a deletion
    /// needs `g > 0`, an addition `g < 0`.
    fn satisfies_criterion(&self, score: &EdgeScore) -> bool {
        match self.direction {
            Direction::Delete => score.value > CERTIFY_MARGIN,
            Direction::Add => score.value < -CERTIFY_MARGIN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeScore {
    pub edge: Edge,
    pub direction: Direction,
    pub value: f64,
    pub basis: Strategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    BudgetExhausted,
    CriterionStopped,
    NoLegalCandidates,
}

impl fmt::Display for TerminalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminalReason::BudgetExhausted => "budget_exhausted",
            TerminalReason::CriterionStopped => "criterion_stopped",
            TerminalReason::NoLegalCandidates => "no_legal_candidates",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewireStep {
    /// 1-based.
    pub step: usize,
    pub edge: Edge,
    pub score: f64,
    /// Refreshed gap; only the last step of each batch has one.
    pub gap_after: Option<f64>,
    pub edges_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewireTrace {
    pub initial_gap: f64,
    pub final_gap: f64,
    pub steps: Vec<RewireStep>,
    pub terminal: TerminalReason,
    /// Non-fatal solver problems, e.g. refreshes that hit the iteration cap.
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct TraceSummary<'a> {
    initial_gap: f64,
    final_gap: f64,
    steps: usize,
    terminal_reason: TerminalReason,
    warnings: &'a [String],
}

impl RewireTrace {
    /// CSV with columns `step, edge_u, edge_v, score, gap_after,
    /// edges_total`; `gap_after` is empty inside a batch.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidConfig(format!("csv write failed: {e}"));
        w.write_record([
            "step",
            "edge_u",
            "edge_v",
            "score",
            "gap_after",
            "edges_total",
        ])
        .map_err(io)?;
        for s in &self.steps {
            w.write_record([
                s.step.to_string(),
                s.edge.u.to_string(),
                s.edge.v.to_string(),
                format!("{:.17e}", s.score),
                s.gap_after.map(|g| format!("{g:.17e}")).unwrap_or_default(),
                s.edges_total.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidConfig(format!("csv write failed: {e}")))?;
        Ok(())
    }

    /// `{initial_gap, final_gap, steps, terminal_reason, warnings}`.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::to_value(TraceSummary {
            initial_gap: self.initial_gap,
            final_gap: self.final_gap,
            steps: self.steps.len(),
            terminal_reason: self.terminal,
            warnings: &self.warnings,
        })
        .expect("summary serializes")
    }
}

/// Scores every legal candidate for one pass, in canonical edge order.
pub fn score_candidates(
    g: &Graph,
    est: &SpectrumEstimate,
    plan: &RewirePlan,
) -> Result<Vec<EdgeScore>> {
    score_pass(g, est, plan, 0)
}

fn score_pass(
    g: &Graph,
    est: &SpectrumEstimate,
    plan: &RewirePlan,
    pass: u64,
) -> Result<Vec<EdgeScore>> {
    let candidates = candidates(g, plan, pass);
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    if plan.strategy == Strategy::ExactGreedy && g.num_nodes() > DENSE_NODE_LIMIT {
        return Err(Error::GraphTooLargeForDense {
            num_nodes: g.num_nodes(),
            limit: DENSE_NODE_LIMIT,
        });
    }
    candidates
        .par_iter()
        .map(|&edge| {
            let delta = EdgeDelta {
                edge,
                direction: plan.direction,
            };
            let value = match plan.strategy {
                Strategy::Proxy => proxy_gap_delta(est, delta),
                Strategy::ExactGreedy => exact_spectrum(&g.with_delta(delta)?)?.gap - est.gap,
                Strategy::Eldan => match plan.direction {
                    Direction::Add => eldan_criterion(&EldanInputs::from_estimate(g, est, edge))?,
                    Direction::Delete => eldan_delete_score(g, est, edge, plan.eldan_refine_steps)?,
                },
            };
            Ok(EdgeScore {
                edge,
                direction: plan.direction,
                value,
                basis: plan.strategy,
            })
        })
        .collect()
}

/// Criterion for deleting `edge`: evaluated on the pruned graph, whose
/// eigenpair is estimated by a few power steps warm-started from the
/// current eigenvector.
fn eldan_delete_score(g: &Graph, est: &SpectrumEstimate, edge: Edge, steps: usize) -> Result<f64> {
    let pruned = g.with_delta(EdgeDelta {
        edge,
        direction: Direction::Delete,
    })?;
    let refined = refine_steps(&pruned, &est.fiedler, steps)?;
    eldan_criterion(&EldanInputs {
        graph: &pruned,
        gap: refined.gap,
        fiedler: &refined.fiedler,
        edge,
    })
}

/// Legal flips for this pass. Deletions never isolate a node; additions
/// are sampled down to the candidate cap.
fn candidates(g: &Graph, plan: &RewirePlan, pass: u64) -> Vec<Edge> {
    match plan.direction {
        Direction::Delete => g
            .edges()
            .filter(|e| g.degree(e.u) > 1 && g.degree(e.v) > 1)
            .collect(),
        Direction::Add => {
            let available = g.num_non_edges();
            match plan.candidate_cap {
                Some(cap) if cap < available => sample_non_edges(g, cap, plan.seed, pass),
                _ => g.non_edges().collect(),
            }
        }
    }
}

/// Uniform sample of `cap` distinct non-edges, sorted canonically.
fn sample_non_edges(g: &Graph, cap: usize, seed: u64, pass: u64) -> Vec<Edge> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pass);
    let available = g.num_non_edges();
    if available <= 4 * cap {
        let all: Vec<Edge> = g.non_edges().collect();
        let mut picked: Vec<Edge> = index::sample(&mut rng, all.len(), cap)
            .into_iter()
            .map(|i| all[i])
            .collect();
        picked.sort_unstable();
        return picked;
    }
    // Sparse complement is large: rejection-sample node pairs.
    let n = g.num_nodes();
    let mut picked = BTreeSet::new();
    while picked.len() < cap {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let e = Edge::new(a, b);
        if !g.has_edge(e) {
            picked.insert(e);
        }
    }
    picked.into_iter().collect()
}

/// Sorts scores best-first under the plan's objective. Equal objectives
/// keep canonical edge order.
pub fn rank(scores: &[EdgeScore], plan: &RewirePlan) -> Vec<EdgeScore> {
    let mut ranked = scores.to_vec();
    ranked.sort_by(|a, b| {
        plan.objective(b)
            .total_cmp(&plan.objective(a))
            .then(a.edge.cmp(&b.edge))
    });
    ranked
}

/// Best-scoring legal flip. With `forbid_disconnect`, deletions that
/// would split the graph are passed over.
pub fn select_best(g: &Graph, scores: &[EdgeScore], plan: &RewirePlan) -> Result<EdgeScore> {
    if scores.is_empty() {
        return Err(Error::NoCandidates);
    }
    rank(scores, plan)
        .into_iter()
        .find(|s| is_legal(g, s.edge, plan))
        .ok_or(Error::AllCandidatesFiltered)
}

fn is_legal(g: &Graph, edge: Edge, plan: &RewirePlan) -> bool {
    match plan.direction {
        Direction::Add => !g.has_edge(edge),
        Direction::Delete => {
            g.has_edge(edge)
                && g.degree(edge.u) > 1
                && g.degree(edge.v) > 1
                && (!plan.forbid_disconnect || g.stays_connected_without(edge))
        }
    }
}

/// Runs the greedy loop until the budget is spent, the criterion stops it,
/// or no legal candidate remains.
pub fn rewire(g: &Graph, plan: &RewirePlan) -> Result<(Graph, RewireTrace)> {
    plan.validate()?;
    if plan.strategy == Strategy::ExactGreedy && g.num_nodes() > DENSE_NODE_LIMIT {
        return Err(Error::GraphTooLargeForDense {
            num_nodes: g.num_nodes(),
            limit: DENSE_NODE_LIMIT,
        });
    }
    if !plan.allow_disconnected_input && !g.is_connected() {
        return Err(Error::DisconnectedGraph);
    }

    let mut graph = g.clone();
    let mut warnings = Vec::new();
    let mut est = refresh(&graph, plan, None, &mut warnings, 0)?;
    let initial_gap = est.gap;
    let mut steps: Vec<RewireStep> = Vec::new();
    let mut pass: u64 = 0;

    let terminal = loop {
        if steps.len() >= plan.budget {
            break TerminalReason::BudgetExhausted;
        }
        let scores = match score_pass(&graph, &est, plan, pass) {
            Ok(s) => s,
            Err(Error::NoCandidates) => break TerminalReason::NoLegalCandidates,
            Err(e) => return Err(e),
        };
        let batch = plan.update_period.min(plan.budget - steps.len());
        let mut applied = 0;
        let mut criterion_blocked = false;
        for s in rank(&scores, plan) {
            if applied == batch {
                break;
            }
            if plan.stop_on_criterion && !plan.satisfies_criterion(&s) {
                criterion_blocked = true;
                break;
            }
            if !is_legal(&graph, s.edge, plan) {
                continue;
            }
            graph.apply(EdgeDelta {
                edge: s.edge,
                direction: plan.direction,
            })?;
            applied += 1;
            steps.push(RewireStep {
                step: steps.len() + 1,
                edge: s.edge,
                score: s.value,
                gap_after: None,
                edges_total: graph.num_edges(),
            });
        }
        if applied == 0 {
            break if criterion_blocked {
                TerminalReason::CriterionStopped
            } else {
                TerminalReason::NoLegalCandidates
            };
        }
        pass += 1;
        est = refresh(&graph, plan, Some(&est.fiedler), &mut warnings, pass)?;
        if let Some(last) = steps.last_mut() {
            last.gap_after = Some(est.gap);
        }
    };

    let trace = RewireTrace {
        initial_gap,
        final_gap: est.gap,
        steps,
        terminal,
        warnings,
    };
    Ok((graph, trace))
}

fn refresh(
    g: &Graph,
    plan: &RewirePlan,
    warm: Option<&[f64]>,
    warnings: &mut Vec<String>,
    pass: u64,
) -> Result<SpectrumEstimate> {
    if plan.strategy == Strategy::ExactGreedy {
        return exact_spectrum(g);
    }
    let mut cfg = plan.solver_config();
    cfg.warm_start = warm.map(<[f64]>::to_vec);
    match iterative_spectrum(g, &cfg) {
        Ok(est) => Ok(est),
        Err(Error::NotConverged { estimate }) => {
            warnings.push(format!(
                "refresh {pass}: not converged after {} iterations (residual {:.3e})",
                estimate.iterations, estimate.residual
            ));
            Ok(*estimate)
        }
        Err(e) => Err(e),
    }
}

/// Deletes `round(target_fraction · |E|)` edges with a deletion plan.
pub fn prune_to_sparsity(
    g: &Graph,
    target_fraction: f64,
    plan: &RewirePlan,
) -> Result<(Graph, RewireTrace)> {
    if !(target_fraction > 0.0 && target_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "target fraction must lie in (0, 1), got {target_fraction}"
        )));
    }
    if plan.direction != Direction::Delete {
        return Err(Error::InvalidConfig(
            "pruning requires a delete plan".into(),
        ));
    }
    let budget = pruning_budget(g.num_edges(), target_fraction);
    if budget == 0 {
        let mut plan = plan.clone();
        plan.budget = 1;
        plan.validate()?;
        let est = refresh(g, &plan, None, &mut Vec::new(), 0)?;
        let trace = RewireTrace {
            initial_gap: est.gap,
            final_gap: est.gap,
            steps: Vec::new(),
            terminal: TerminalReason::BudgetExhausted,
            warnings: Vec::new(),
        };
        return Ok((g.clone(), trace));
    }
    let plan = RewirePlan {
        budget,
        ..plan.clone()
    };
    rewire(g, &plan)
}

pub fn pruning_budget(num_edges: usize, target_fraction: f64) -> usize {
    (target_fraction * num_edges as f64).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::chord_ring_fixture;
    use crate::graph::{generate, GeneratorSpec, GraphFamily};

    fn score(u: usize, v: usize, value: f64) -> EdgeScore {
        EdgeScore {
            edge: Edge::new(u, v),
            direction: Direction::Add,
            value,
            basis: Strategy::ExactGreedy,
        }
    }

    #[test]
    fn plan_validation() {
        let mut plan = RewirePlan::new(Direction::Delete, Strategy::Proxy, 1);
        assert!(plan.validate().is_ok());
        plan.stop_on_criterion = true;
        assert!(matches!(plan.validate(), Err(Error::InvalidConfig(_))));
        plan.strategy = Strategy::Eldan;
        assert!(plan.validate().is_ok());
        plan.budget = 0;
        assert!(plan.validate().is_err());
        plan.budget = 1;
        plan.update_period = 0;
        assert!(plan.validate().is_err());
    }

    #[test]
    fn tie_break_is_canonical() {
        let plan = RewirePlan::new(Direction::Add, Strategy::ExactGreedy, 1);
        let g = chord_ring_fixture().base;
        let best = select_best(&g, &[score(1, 4, 0.5), score(0, 5, 0.5)], &plan).unwrap();
        assert_eq!(best.edge, Edge::new(0, 5));
        let only = select_best(&g, &[score(2, 6, -1.0)], &plan).unwrap();
        assert_eq!(only.edge, Edge::new(2, 6));
        assert_eq!(select_best(&g, &[], &plan), Err(Error::NoCandidates));
    }

    #[test]
    fn eldan_add_minimizes_criterion() {
        let plan = RewirePlan::new(Direction::Add, Strategy::Eldan, 1);
        let g = chord_ring_fixture().base;
        let scores = [score(0, 5, -0.1), score(4, 7, 0.005), score(1, 4, -0.2)];
        assert_eq!(
            select_best(&g, &scores, &plan).unwrap().edge,
            Edge::new(1, 4)
        );
    }

    #[test]
    fn forbid_disconnect_filters_bridges() {
        let path = generate(&GeneratorSpec::new(GraphFamily::Path { n: 6 }, 0)).unwrap();
        let mut plan = RewirePlan::new(Direction::Delete, Strategy::Proxy, 1);
        plan.forbid_disconnect = true;
        let scores = [EdgeScore {
            edge: Edge::new(2, 3),
            direction: Direction::Delete,
            value: 1.0,
            basis: Strategy::Proxy,
        }];
        assert_eq!(
            select_best(&path, &scores, &plan),
            Err(Error::AllCandidatesFiltered)
        );
    }

    #[test]
    fn pruning_budget_rounds() {
        assert_eq!(pruning_budget(160, 0.1875), 30);
        assert_eq!(pruning_budget(58, 0.1), 6);
    }

    #[test]
    fn sampled_candidates_are_distinct_non_edges() {
        let g = generate(&GeneratorSpec::new(
            GraphFamily::ErdosRenyi { n: 200, m: 600 },
            3,
        ))
        .unwrap();
        for pass in 0..3 {
            let picked = sample_non_edges(&g, 500, 11, pass);
            assert_eq!(picked.len(), 500);
            assert!(picked.windows(2).all(|w| w[0] < w[1]));
            assert!(picked.iter().all(|&e| !g.has_edge(e)));
            assert_eq!(picked, sample_non_edges(&g, 500, 11, pass));
        }
        let dense = generate(&GeneratorSpec::new(
            GraphFamily::ErdosRenyi { n: 20, m: 150 },
            3,
        ))
        .unwrap();
        let picked = sample_non_edges(&dense, 30, 1, 0);
        assert_eq!(picked.len(), 30);
        assert!(picked.iter().all(|&e| !dense.has_edge(e)));
    }

    #[test]
    fn delete_candidates_skip_leaf_edges() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 0), (2, 3)]).unwrap();
        let plan = RewirePlan::new(Direction::Delete, Strategy::Proxy, 1);
        let c = candidates(&g, &plan, 0);
        assert_eq!(c, vec![Edge::new(0, 1), Edge::new(0, 2), Edge::new(1, 2)]);
    }
}
