//! Constraint-based edge orientation: v-structure detection, Meek's rules
//! R1-R4, skeleton-to-CPDAG orientation, and consistent DAG extension.

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Pdag, SeparationRecord, VStructure};
use crate::error::GraphError;
use crate::skeleton::CiSource;
use crate::stats::CallCounter;

/// V-structures of a DAG: parent pairs of a common child that are themselves
/// nonadjacent. Sorted canonically.
pub fn vstructures_of_dag(dag: &Pdag) -> Vec<VStructure> {
    let mut out = Vec::new();
    for mid in 0..dag.node_count() {
        let parents = dag.parents(mid);
        for (idx, &a) in parents.iter().enumerate() {
            for &b in &parents[idx + 1..] {
                if !dag.has_edge(a, b) {
                    out.push(VStructure::new(a, mid, b));
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Reads v-structures off recorded separation sets: an unshielded triple
/// `i -- k -- j` is a collider iff the pair (i, j) is separated
/// (`phi > alpha`) by a set that does not contain `k`.
pub fn detect_vstructures_from_sepsets(
    skeleton: &Pdag,
    rec: &SeparationRecord,
    alpha: f64,
) -> Result<Vec<VStructure>, GraphError> {
    let p = skeleton.node_count();
    let mut out = Vec::new();
    for k in 0..p {
        let nbrs = skeleton.neighbors(k);
        for (idx, &i) in nbrs.iter().enumerate() {
            for &j in &nbrs[idx + 1..] {
                if skeleton.has_edge(i, j) {
                    continue;
                }
                let separated = rec.phi(i, j).is_some_and(|v| v > alpha);
                if separated {
                    let sepset = rec.sepset(i, j).ok_or(GraphError::MissingSepset { i, j })?;
                    if !sepset.contains(&k) {
                        out.push(VStructure::new(i, k, j));
                    }
                }
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Detects v-structures by direct testing: `(i, k, j)` is a collider iff the
/// pair stays dependent given every subset (of size <= `m`) of either
/// endpoint neighborhood that contains `k`. The smaller neighborhood is
/// searched first since a separator there settles the triple early; one
/// neighborhood alone is not enough, as the separating set containing `k`
/// may live only on the other side.
pub fn detect_vstructures_by_testing(
    skeleton: &Pdag,
    ci: &CiSource<'_>,
    m: usize,
    counter: &CallCounter,
) -> Vec<VStructure> {
    let p = skeleton.node_count();
    let mut out = Vec::new();
    for k in 0..p {
        let nbrs = skeleton.neighbors(k);
        for (idx, &i) in nbrs.iter().enumerate() {
            'triple: for &j in &nbrs[idx + 1..] {
                if skeleton.has_edge(i, j) {
                    continue;
                }
                let ni = skeleton.neighbors(i);
                let nj = skeleton.neighbors(j);
                let (first, second) = if ni.len() <= nj.len() {
                    (ni, nj)
                } else {
                    (nj, ni)
                };
                let mut tried: std::collections::HashSet<Vec<usize>> = Default::default();
                for base in [first, second] {
                    let rest: Vec<usize> = base
                        .iter()
                        .copied()
                        .filter(|&v| v != k && v != i && v != j)
                        .collect();
                    for size in 1..=m.min(base.len()) {
                        for extra in rest.iter().copied().combinations(size - 1) {
                            let mut cond = extra;
                            cond.push(k);
                            cond.sort_unstable();
                            if !tried.insert(cond.clone()) {
                                continue;
                            }
                            if ci.independent(i, j, &cond, counter) {
                                continue 'triple;
                            }
                        }
                    }
                }
                out.push(VStructure::new(i, k, j));
            }
        }
    }
    out.sort_unstable();
    out
}

fn rule_orients(g: &Pdag, rule: usize, a: usize, b: usize) -> bool {
    // precondition: a -- b undirected; checks whether `rule` compels a -> b
    match rule {
        // R1: u -> a, a -- b, u not adjacent to b
        0 => g.parents(a).iter().any(|&u| !g.has_edge(u, b)),
        // R2: a -> w -> b, a -- b
        1 => g.children(a).iter().any(|&w| g.has_directed(w, b)),
        // R3: a -- c, a -- d, c -> b, d -> b, c not adjacent to d
        2 => {
            let pb = g.parents(b);
            let und_a = g.undirected_neighbors(a);
            for (idx, &c) in pb.iter().enumerate() {
                if !und_a.contains(&c) {
                    continue;
                }
                for &d in &pb[idx + 1..] {
                    if und_a.contains(&d) && !g.has_edge(c, d) {
                        return true;
                    }
                }
            }
            false
        }
        // R4: a -- d, d -> c, c -> b, b not adjacent to d
        3 => {
            for d in g.undirected_neighbors(a) {
                if d == b || g.has_edge(b, d) {
                    continue;
                }
                if g.children(d).iter().any(|&c| g.has_directed(c, b)) {
                    return true;
                }
            }
            false
        }
        _ => unreachable!(),
    }
}

/// Fixed point of Meek's rules R1-R4. Rules are scanned in order over
/// undirected edges in ascending pair order, restarting after each
/// orientation; no undirected edge is deleted and no directed edge reversed.
pub fn meek_closure(g: &Pdag) -> Pdag {
    let mut g = g.clone();
    let p = g.node_count();
    'restart: loop {
        for rule in 0..4 {
            for x in 0..p {
                for y in (x + 1)..p {
                    if !g.has_undirected(x, y) {
                        continue;
                    }
                    for (a, b) in [(x, y), (y, x)] {
                        if rule_orients(&g, rule, a, b) {
                            g.orient(a, b);
                            continue 'restart;
                        }
                    }
                }
            }
        }
        return g;
    }
}

/// Orients a skeleton to a (C)PDAG: v-structures applied in input order,
/// then the Meek closure. A v-structure that would reverse an edge already
/// directed the other way is skipped entirely.
pub fn skel_to_cpdag(skeleton: &Pdag, vstructs: &[VStructure]) -> Pdag {
    let mut g = skeleton.clone();
    for v in vstructs {
        let compatible =
            |g: &Pdag, x: usize| g.has_undirected(x, v.mid) || g.has_directed(x, v.mid);
        if compatible(&g, v.a) && compatible(&g, v.b) {
            if g.has_undirected(v.a, v.mid) {
                g.orient(v.a, v.mid);
            }
            if g.has_undirected(v.b, v.mid) {
                g.orient(v.b, v.mid);
            }
        }
    }
    meek_closure(&g)
}

/// The CPDAG representing the equivalence class of `dag`: its pattern
/// (skeleton plus v-structures) closed under Meek's rules.
pub fn cpdag_of_dag(dag: &Pdag) -> Result<Pdag, GraphError> {
    if !dag.is_dag() {
        return Err(GraphError::NotADag);
    }
    let mut pattern = dag.skeleton();
    for v in vstructures_of_dag(dag) {
        if pattern.has_undirected(v.a, v.mid) {
            pattern.orient(v.a, v.mid);
        }
        if pattern.has_undirected(v.b, v.mid) {
            pattern.orient(v.b, v.mid);
        }
    }
    Ok(meek_closure(&pattern))
}

/// One pass of the sink-elimination extension. Returns the graph with every
/// orientation that was committed, and whether all nodes were eliminated.
fn sink_elimination(g: &Pdag) -> (Pdag, bool) {
    let p = g.node_count();
    let mut g0 = g.clone();
    let mut out = g.clone();
    let mut alive = vec![true; p];
    let mut remaining = p;
    while remaining > 0 {
        let mut progressed = false;
        // candidate sinks in ascending index order
        for j in 0..p {
            if !alive[j] {
                continue;
            }
            if !g0.children(j).is_empty() {
                continue;
            }
            let und = g0.undirected_neighbors(j);
            let adj = g0.neighbors(j);
            let ok = und
                .iter()
                .all(|&k| adj.iter().all(|&other| other == k || g0.has_edge(k, other)));
            if !ok {
                continue;
            }
            for &k in &und {
                out.orient(k, j);
            }
            for v in g0.neighbors(j) {
                g0.remove_edge(j, v);
            }
            alive[j] = false;
            remaining -= 1;
            progressed = true;
            break;
        }
        if !progressed {
            return (out, false);
        }
    }
    (out, true)
}

/// Consistent extension of a PDAG: a DAG with the same skeleton and
/// v-structures containing every directed edge of the input, or `None` when
/// no such extension exists.
pub fn pdag_to_dag(g: &Pdag) -> Option<Pdag> {
    let (out, complete) = sink_elimination(g);
    if complete {
        debug_assert!(out.is_dag());
        Some(out)
    } else {
        None
    }
}

/// Extension for PDAGs that admit no consistent extension: commit what sink
/// elimination can orient, then direct the remaining undirected edges in
/// seeded shuffled order, accepting each direction only if it keeps the
/// graph acyclic and dropping edges that cannot be oriented either way.
pub fn semi_arbitrary_extension(g: &Pdag, seed: u64) -> Pdag {
    if let Some(dag) = pdag_to_dag(g) {
        return dag;
    }
    let (partial, _) = sink_elimination(g);
    let p = partial.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Pdag::new(p);
    for (from, to) in partial.directed_edges() {
        if !out.has_directed_path(to, from) {
            out.add_directed(from, to);
        }
    }
    let mut pending = partial.undirected_edge_pairs();
    pending.shuffle(&mut rng);
    for (a, b) in pending {
        let (first, second) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
        if !out.has_directed_path(second, first) {
            out.add_directed(first, second);
        } else if !out.has_directed_path(first, second) {
            out.add_directed(second, first);
        }
        // otherwise both directions close a cycle: drop the edge
    }
    debug_assert!(out.is_dag());
    out
}
