//! Hybrid greedy initialization: score-ordered v-structure application
//! followed by a greedy decomposed consistent extension with Meek-rule
//! assistance, producing a DAG that seeds score-based search.

use crate::data::Dataset;
use crate::graph::{d_separated, meek_closure, Pdag, SeparationRecord, VStructure};
use crate::path::PathOrienter;
use crate::stats::{family_score, CallCounter, ScoreCache, SCORE_IMPROVEMENT_EPS};

/// Score change from granting `child` extra parents on top of its committed
/// parents in `g`. Decomposability keeps every evaluation to one family.
pub trait FamilyDeltaScorer {
    fn orient_delta(&self, g: &Pdag, child: usize, extra: &[usize]) -> f64;
}

/// Penalized log-likelihood deltas from data, through the score cache.
pub struct DataScorer<'a> {
    pub data: &'a Dataset,
    pub lambda: f64,
    pub cache: &'a ScoreCache,
    pub counter: &'a CallCounter,
}

impl FamilyDeltaScorer for DataScorer<'_> {
    fn orient_delta(&self, g: &Pdag, child: usize, extra: &[usize]) -> f64 {
        let current = g.parents(child);
        let mut extended = current.clone();
        extended.extend_from_slice(extra);
        let with = family_score(
            self.data,
            child,
            &extended,
            self.lambda,
            self.cache,
            self.counter,
        );
        let without = family_score(
            self.data,
            child,
            &current,
            self.lambda,
            self.cache,
            self.counter,
        );
        with - without
    }
}

/// Population-grade local consistency from a d-separation oracle: a parent
/// addition scores +1 when the pair is dependent given the current parents
/// and -1 otherwise. Each evaluation counts as one local score difference.
pub struct OracleScorer<'a> {
    pub dag: &'a Pdag,
    pub counter: &'a CallCounter,
}

impl FamilyDeltaScorer for OracleScorer<'_> {
    fn orient_delta(&self, g: &Pdag, child: usize, extra: &[usize]) -> f64 {
        self.counter.add_score_call();
        let mut parents = g.parents(child);
        let mut delta = 0.0;
        for &x in extra {
            let dependent = !d_separated(self.dag, x, child, &parents);
            delta += if dependent { 1.0 } else { -1.0 };
            parents.push(x);
            parents.sort_unstable();
        }
        delta
    }
}

/// Greedy hybrid initialization. Phase one applies the candidate
/// v-structures in score order, each accepted only when its missing
/// orientations strictly improve the score without inducing a cycle or
/// reversing a committed edge. Phase two runs the decomposed sink-based
/// extension: complete sinks are retired, single-edge orientations into
/// nodes meeting the sink and adjacency conditions are applied greedily, a
/// non-improving candidate set sheds its worst edge instead, and when no
/// such node exists the same greedy criterion runs over Meek-compelled
/// orientations. Undirected edges still standing at the end are dropped.
pub fn hgi(
    skeleton: &Pdag,
    data: &Dataset,
    vstructs: &[VStructure],
    lambda: f64,
    cache: &ScoreCache,
    counter: &CallCounter,
) -> Pdag {
    let scorer = DataScorer {
        data,
        lambda,
        cache,
        counter,
    };
    hgi_with_scorer(skeleton, &scorer, vstructs)
}

/// [`hgi`] over any family-delta scorer; the oracle pipelines drive this
/// with exact d-separation scoring.
pub fn hgi_with_scorer(
    skeleton: &Pdag,
    scorer: &impl FamilyDeltaScorer,
    vstructs: &[VStructure],
) -> Pdag {
    let p = skeleton.node_count();
    let mut g0 = skeleton.clone();
    let mut g = Pdag::new(p);

    // phase one: v-structures, best first
    loop {
        let mut best: Option<(f64, VStructure, Vec<usize>)> = None;
        for v in vstructs {
            let mut needed = Vec::new();
            let mut conflicted = false;
            for x in [v.a, v.b] {
                if g0.has_undirected(x, v.mid) {
                    needed.push(x);
                } else if !g0.has_directed(x, v.mid) {
                    conflicted = true; // reversed or missing edge
                    break;
                }
            }
            if conflicted || needed.is_empty() {
                continue;
            }
            if needed.iter().any(|&x| g.has_directed_path(v.mid, x)) {
                continue;
            }
            let delta = scorer.orient_delta(&g, v.mid, &needed);
            if delta > SCORE_IMPROVEMENT_EPS && best.as_ref().is_none_or(|(d, _, _)| delta > *d) {
                best = Some((delta, *v, needed));
            }
        }
        let Some((_, v, needed)) = best else { break };
        for x in needed {
            g0.orient(x, v.mid);
            g.add_directed(x, v.mid);
        }
    }

    // phase two: greedy decomposed extension
    loop {
        // retire complete sinks: directed-in only, no undirected edges
        loop {
            let mut removed = false;
            for j in 0..p {
                if g0.degree(j) > 0
                    && g0.children(j).is_empty()
                    && g0.undirected_neighbors(j).is_empty()
                {
                    for v in g0.neighbors(j) {
                        g0.remove_edge(j, v);
                    }
                    removed = true;
                }
            }
            if !removed {
                break;
            }
        }

        // sink-condition candidates: orient i -> j where j is a sink whose
        // undirected neighbors are adjacent to all its other neighbors
        let mut candidates: Vec<(usize, usize)> = Vec::new();
        for j in 0..p {
            if !g0.children(j).is_empty() {
                continue;
            }
            let und = g0.undirected_neighbors(j);
            if und.is_empty() {
                continue;
            }
            let adj = g0.neighbors(j);
            let ok = und
                .iter()
                .all(|&k| adj.iter().all(|&o| o == k || g0.has_edge(k, o)));
            if !ok {
                continue;
            }
            for &i in &und {
                candidates.push((i, j));
            }
        }
        candidates.sort_unstable();

        if !candidates.is_empty() {
            let deltas: Vec<f64> = candidates
                .iter()
                .map(|&(i, j)| scorer.orient_delta(&g, j, &[i]))
                .collect();
            let mut best: Option<(f64, usize)> = None;
            let mut worst: Option<(f64, usize)> = None;
            for (idx, &d) in deltas.iter().enumerate() {
                if best.is_none_or(|(bd, _)| d > bd) {
                    best = Some((d, idx));
                }
                if worst.is_none_or(|(wd, _)| d < wd) {
                    worst = Some((d, idx));
                }
            }
            let (best_delta, best_idx) = best.unwrap();
            if best_delta > SCORE_IMPROVEMENT_EPS {
                let (i, j) = candidates[best_idx];
                // the sink condition makes a cycle through j impossible
                debug_assert!(!g.has_directed_path(j, i));
                g0.orient(i, j);
                g.add_directed(i, j);
            } else {
                let (i, j) = candidates[worst.unwrap().1];
                g0.remove_edge(i, j);
            }
            continue;
        }

        // no sink-condition node: fall back to Meek-compelled orientations
        let compelled = meek_compelled(&g0);
        if compelled.is_empty() {
            break;
        }
        let mut best: Option<(f64, usize)> = None;
        let mut worst: Option<(f64, usize)> = None;
        for (idx, &(i, j)) in compelled.iter().enumerate() {
            let d = scorer.orient_delta(&g, j, &[i]);
            if !g.has_directed_path(j, i) && best.is_none_or(|(bd, _)| d > bd) {
                best = Some((d, idx));
            }
            if worst.is_none_or(|(wd, _)| d < wd) {
                worst = Some((d, idx));
            }
        }
        if let Some((d, idx)) = best {
            if d > SCORE_IMPROVEMENT_EPS {
                let (i, j) = compelled[idx];
                g0.orient(i, j);
                g.add_directed(i, j);
                continue;
            }
        }
        let (i, j) = compelled[worst.unwrap().1];
        g0.remove_edge(i, j);
    }

    debug_assert!(g.is_dag());
    g
}

/// Undirected edges of `g0` whose orientation is compelled by one of Meek's
/// rules, as (from, to) pairs in ascending order.
fn meek_compelled(g0: &Pdag) -> Vec<(usize, usize)> {
    let closed = meek_closure(g0);
    let mut out = Vec::new();
    for (a, b) in g0.undirected_edge_pairs() {
        if closed.has_directed(a, b) {
            out.push((a, b));
        } else if closed.has_directed(b, a) {
            out.push((b, a));
        }
    }
    out.sort_unstable();
    out
}

/// Path orienter that runs HGI per thresholded skeleton, yielding DAG
/// estimates that serve as their own scoring extensions.
pub struct HgiOrienter<S> {
    pub scorer: S,
}

impl<S: FamilyDeltaScorer> PathOrienter for HgiOrienter<S> {
    fn orient(&mut self, skeleton: &Pdag, rec: &SeparationRecord, threshold: f64) -> Pdag {
        let vstructs = crate::graph::detect_vstructures_from_sepsets(skeleton, rec, threshold)
            .expect("thresholded record covers all separated pairs");
        hgi_with_scorer(skeleton, &self.scorer, vstructs.as_slice())
    }
}
