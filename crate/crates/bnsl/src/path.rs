//! Solution-path generation by p-value adjacency thresholding and BIC-based
//! selection of the best estimate.

use serde::Serialize;

use crate::data::Dataset;
use crate::graph::{
    detect_vstructures_from_sepsets, pdag_to_dag, semi_arbitrary_extension, skel_to_cpdag, Pdag,
    SeparationRecord,
};
use crate::stats::{CallCounter, ScoreCache};

/// One thresholded estimate along the path.
#[derive(Debug, Clone)]
pub struct PathEntry {
    pub threshold: f64,
    /// the oriented estimate (CPDAG, PDAG, or DAG depending on the orienter)
    pub graph: Pdag,
    /// whether the estimate admits a consistent extension
    pub valid: bool,
    /// cumulative score difference relative to the first estimate
    pub cumulative_score: f64,
    pub edge_count: usize,
}

/// Decreasing thresholds, their oriented estimates, and the selected index.
#[derive(Debug, Clone)]
pub struct SolutionPath {
    pub entries: Vec<PathEntry>,
    /// index into `entries` of the selected estimate
    pub selected: usize,
}

impl SolutionPath {
    pub fn selected_entry(&self) -> &PathEntry {
        &self.entries[self.selected]
    }

    /// JSON export: per-estimate threshold, edge count, validity, cumulative
    /// score, and edge list, plus the selected index.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Row<'a> {
            threshold: f64,
            edge_count: usize,
            valid: bool,
            cumulative_score: f64,
            edges: Vec<&'a str>,
        }
        let rows: Vec<serde_json::Value> = self
            .entries
            .iter()
            .map(|e| {
                let edges_owned = e.graph.to_edge_list();
                let edges: Vec<&str> = edges_owned.lines().skip(1).collect();
                serde_json::to_value(Row {
                    threshold: e.threshold,
                    edge_count: e.edge_count,
                    valid: e.valid,
                    cumulative_score: e.cumulative_score,
                    edges,
                })
                .unwrap()
            })
            .collect();
        serde_json::json!({
            "selected": self.selected,
            "estimates": rows,
        })
    }
}

/// Decreasing threshold sequence over the order statistics of the recorded
/// maximum p-values. The first threshold is the largest phi among pairs
/// connected in `estimate`; the last is `alpha_min`; intermediate values are
/// chosen so consecutive edge counts drop by roughly equal amounts.
pub fn threshold_sequence(
    rec: &SeparationRecord,
    estimate: &Pdag,
    tau: usize,
    alpha_min: f64,
) -> Vec<f64> {
    assert!(tau >= 1);
    let p = estimate.node_count();
    let mut connected_phi: Vec<f64> = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if estimate.has_edge(i, j) {
                connected_phi.push(rec.phi(i, j).unwrap_or(0.0));
            }
        }
    }
    connected_phi.sort_by(f64::total_cmp);
    let alpha_one = connected_phi.last().copied().unwrap_or(alpha_min);
    if tau == 1 {
        return vec![alpha_one];
    }
    let alpha_min = alpha_min.min(alpha_one);
    let e1 = connected_phi.len();
    let e_tau = connected_phi.partition_point(|&v| v <= alpha_min);
    let mut thresholds = vec![alpha_one];
    for t in 2..tau {
        let target = e1 as f64 - (t - 1) as f64 * (e1 as f64 - e_tau as f64) / (tau - 1) as f64;
        let target = target.round().max(0.0) as usize;
        let thr = if target == 0 {
            alpha_min
        } else {
            connected_phi[target.min(e1) - 1]
        };
        let prev = *thresholds.last().unwrap();
        thresholds.push(thr.min(prev).max(alpha_min));
    }
    thresholds.push(alpha_min.min(*thresholds.last().unwrap()));
    thresholds
}

/// Orients one thresholded skeleton into an estimate. The default
/// implementation reproduces constraint-based orientation; the hybrid
/// pipeline swaps in greedy initialization instead. A DAG estimate serves
/// as its own scoring extension.
pub trait PathOrienter {
    fn orient(&mut self, skeleton: &Pdag, rec: &SeparationRecord, threshold: f64) -> Pdag;
}

/// skel-to-cpdag with v-structures read from the thresholded sepsets.
pub struct CpdagOrienter;

impl PathOrienter for CpdagOrienter {
    fn orient(&mut self, skeleton: &Pdag, rec: &SeparationRecord, threshold: f64) -> Pdag {
        let vstructs = detect_vstructures_from_sepsets(skeleton, rec, threshold)
            .expect("thresholded record covers all separated pairs");
        skel_to_cpdag(skeleton, &vstructs)
    }
}

/// Generates the solution path and selects the highest-scoring estimate.
///
/// For every threshold the skeleton is `{(i, j) : phi_ij <= alpha_t}`,
/// oriented by the supplied orienter. Estimates that admit no consistent
/// extension are scored through a seeded semi-arbitrary extension and are
/// excluded from selection whenever at least one valid estimate exists; the
/// reported graphs are the original PDAGs either way.
#[allow(clippy::too_many_arguments)]
pub fn path_select(
    rec: &SeparationRecord,
    estimate: &Pdag,
    data: &Dataset,
    tau: usize,
    alpha_min: f64,
    orienter: &mut dyn PathOrienter,
    lambda: f64,
    cache: &ScoreCache,
    counter: &CallCounter,
    seed: u64,
) -> SolutionPath {
    let thresholds = threshold_sequence(rec, estimate, tau, alpha_min);
    let mut entries: Vec<PathEntry> = Vec::with_capacity(thresholds.len());
    let mut cumulative = 0.0;
    let mut prev_extension: Option<Pdag> = None;
    for (t, &alpha_t) in thresholds.iter().enumerate() {
        let skeleton = rec.threshold_graph(alpha_t);
        let oriented = orienter.orient(&skeleton, rec, alpha_t);
        let (valid, extension) = if oriented.is_dag() {
            (true, oriented.clone())
        } else {
            match pdag_to_dag(&oriented) {
                Some(dag) => (true, dag),
                None => (
                    false,
                    semi_arbitrary_extension(&oriented, seed.wrapping_add(t as u64)),
                ),
            }
        };
        // decomposability: the score difference touches only the families
        // whose parent sets changed, so the first estimate is never scored
        // in full
        if let Some(prev) = &prev_extension {
            let mut delta = 0.0;
            for v in 0..extension.node_count() {
                let new_parents = extension.parents(v);
                let old_parents = prev.parents(v);
                if new_parents != old_parents {
                    delta +=
                        crate::stats::family_score(data, v, &new_parents, lambda, cache, counter)
                            - crate::stats::family_score(
                                data,
                                v,
                                &old_parents,
                                lambda,
                                cache,
                                counter,
                            );
                }
            }
            cumulative += delta;
        }
        prev_extension = Some(extension);
        entries.push(PathEntry {
            threshold: alpha_t,
            edge_count: oriented.edge_count(),
            valid,
            cumulative_score: cumulative,
            graph: oriented,
        });
    }

    let any_valid = entries.iter().any(|e| e.valid);
    let mut selected = 0usize;
    let mut best = f64::NEG_INFINITY;
    for (idx, entry) in entries.iter().enumerate() {
        if any_valid && !entry.valid {
            continue;
        }
        if entry.cumulative_score > best {
            best = entry.cumulative_score;
            selected = idx;
        }
    }
    SolutionPath { entries, selected }
}
