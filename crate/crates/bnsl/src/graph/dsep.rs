//! d-separation queries and a brute-force equivalence-class oracle.

use super::{orient::vstructures_of_dag, Pdag};
use crate::error::GraphError;

/// True iff `i` and `j` are d-separated by `cond` in the DAG: reachability in
/// the moralized graph of the ancestral closure of `{i, j} ∪ cond`, with the
/// conditioning nodes deleted.
pub fn d_separated(dag: &Pdag, i: usize, j: usize, cond: &[usize]) -> bool {
    assert_ne!(i, j);
    assert!(
        !cond.contains(&i) && !cond.contains(&j),
        "conditioning set overlaps the queried pair"
    );
    debug_assert!(dag.is_dag());
    let p = dag.node_count();

    let mut ancestral = vec![false; p];
    let mut stack: Vec<usize> = Vec::with_capacity(cond.len() + 2);
    for &v in cond.iter().chain([i, j].iter()) {
        if !ancestral[v] {
            ancestral[v] = true;
            stack.push(v);
        }
    }
    while let Some(u) = stack.pop() {
        for par in dag.parents(u) {
            if !ancestral[par] {
                ancestral[par] = true;
                stack.push(par);
            }
        }
    }

    // moral graph restricted to the ancestral set: original adjacencies plus
    // married parent pairs
    let mut adj = vec![false; p * p];
    let mut connect = |a: usize, b: usize| {
        adj[a * p + b] = true;
        adj[b * p + a] = true;
    };
    for u in 0..p {
        if !ancestral[u] {
            continue;
        }
        let parents = dag.parents(u);
        for &par in &parents {
            connect(par, u);
        }
        for (idx, &a) in parents.iter().enumerate() {
            for &b in &parents[idx + 1..] {
                connect(a, b);
            }
        }
    }

    let mut blocked = vec![false; p];
    for &c in cond {
        blocked[c] = true;
    }
    let mut seen = vec![false; p];
    let mut queue = vec![i];
    seen[i] = true;
    while let Some(u) = queue.pop() {
        for v in 0..p {
            if adj[u * p + v] && ancestral[v] && !blocked[v] && !seen[v] {
                if v == j {
                    return false;
                }
                seen[v] = true;
                queue.push(v);
            }
        }
    }
    true
}

const ENUMERATION_EDGE_LIMIT: usize = 20;

/// All DAGs sharing the skeleton and v-structures of `dag`, i.e. its Markov
/// equivalence class, found by exhausting the orientations of the skeleton.
/// Guarded by skeleton size (the work is `2^edges`); the output is in a
/// deterministic order.
pub fn enumerate_equivalence_class(dag: &Pdag) -> Result<Vec<Pdag>, GraphError> {
    let p = dag.node_count();
    if !dag.is_dag() {
        return Err(GraphError::NotADag);
    }
    let pairs: Vec<(usize, usize)> = dag.skeleton().undirected_edge_pairs();
    if pairs.len() > ENUMERATION_EDGE_LIMIT {
        return Err(GraphError::EnumerationTooLarge {
            edges: pairs.len(),
            limit: ENUMERATION_EDGE_LIMIT,
        });
    }
    let target = vstructures_of_dag(dag);
    let mut out = Vec::new();
    for mask in 0..(1u64 << pairs.len()) {
        let mut cand = Pdag::new(p);
        for (bit, &(a, b)) in pairs.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                cand.add_directed(a, b);
            } else {
                cand.add_directed(b, a);
            }
        }
        if cand.directed_part_acyclic() && vstructures_of_dag(&cand) == target {
            out.push(cand);
        }
    }
    Ok(out)
}
