//! Structural accuracy metrics between an estimated graph and the true DAG,
//! computed on CPDAG representations.

use serde::Serialize;

use crate::error::GraphError;
use crate::graph::{cpdag_of_dag, pdag_to_dag, Pdag};
use crate::stats::CallCounts;

/// Edge-level comparison between an estimate and the truth, both in CPDAG
/// form. A true positive must match in existence and in kind/direction;
/// edges present in both but with mismatched kind count as reversed.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub p_true: usize,
    pub p_est: usize,
    pub tp: usize,
    pub reversed: usize,
    pub fp: usize,
    pub ji: f64,
    pub shd: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calls: Option<CallCounts>,
}

impl EvalReport {
    /// Single TSV row: `p_true p_est tp reversed fp ji shd`.
    pub fn to_tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{:.6}\t{}",
            self.p_true, self.p_est, self.tp, self.reversed, self.fp, self.ji, self.shd
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum PairStatus {
    Absent,
    Undirected,
    Forward,
    Backward,
}

fn status(g: &Pdag, i: usize, j: usize) -> PairStatus {
    if g.has_undirected(i, j) {
        PairStatus::Undirected
    } else if g.has_directed(i, j) {
        PairStatus::Forward
    } else if g.has_directed(j, i) {
        PairStatus::Backward
    } else {
        PairStatus::Absent
    }
}

/// Normalizes a graph toward CPDAG form: DAGs map to their CPDAG, other
/// PDAGs through a consistent extension when one exists, and invalid
/// estimates are compared as they stand.
fn normalize(est: &Pdag) -> Pdag {
    if est.is_dag() {
        return cpdag_of_dag(est).expect("checked DAG");
    }
    match pdag_to_dag(est) {
        Some(dag) => cpdag_of_dag(&dag).expect("extension is a DAG"),
        None => est.clone(),
    }
}

/// Compares an estimate against the true DAG on CPDAGs: Jaccard index over
/// exactly-matching edges and structural Hamming distance over pair
/// statuses.
pub fn compare(est: &Pdag, truth: &Pdag) -> Result<EvalReport, GraphError> {
    if est.node_count() != truth.node_count() {
        return Err(GraphError::NodeCountMismatch {
            left: est.node_count(),
            right: truth.node_count(),
        });
    }
    let truth_cpdag = cpdag_of_dag(truth)?;
    let est_cpdag = normalize(est);

    let p = truth.node_count();
    let mut tp = 0;
    let mut reversed = 0;
    let mut fp = 0;
    let mut shd = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            let t = status(&truth_cpdag, i, j);
            let e = status(&est_cpdag, i, j);
            if e != t {
                shd += 1;
            }
            match (e, t) {
                (PairStatus::Absent, _) => {}
                (_, PairStatus::Absent) => fp += 1,
                (a, b) if a == b => tp += 1,
                _ => reversed += 1,
            }
        }
    }
    let p_true = truth_cpdag.edge_count();
    let p_est = est_cpdag.edge_count();
    let denom = p_true + p_est - tp;
    let ji = if denom == 0 {
        1.0
    } else {
        tp as f64 / denom as f64
    };
    Ok(EvalReport {
        p_true,
        p_est,
        tp,
        reversed,
        fp,
        ji,
        shd,
        calls: None,
    })
}
