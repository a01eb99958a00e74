//! Score-based search: tabu-augmented hill-climbing over DAGs, the sparse
//! candidate restriction, and the composed partitioned hybrid greedy search.

use std::collections::{HashSet, VecDeque};

use crate::data::Dataset;
use crate::graph::Pdag;
use crate::hgi::{DataScorer, HgiOrienter};
use crate::path::{path_select, SolutionPath};
use crate::skeleton::{ppc_skeleton, CiSource, PartitionSource, PpcSkeleton};
use crate::stats::{family_score, graph_score, CallCounter, ScoreCache, SCORE_IMPROVEMENT_EPS};

/// Unordered node pairs allowed to host an edge.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    p: usize,
    pairs: HashSet<(usize, usize)>,
}

impl CandidateSet {
    pub fn complete(p: usize) -> Self {
        let mut pairs = HashSet::new();
        for i in 0..p {
            for j in (i + 1)..p {
                pairs.insert((i, j));
            }
        }
        CandidateSet { p, pairs }
    }

    pub fn from_pairs(p: usize, iter: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let pairs = iter
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .filter(|&(a, b)| a != b)
            .collect();
        CandidateSet { p, pairs }
    }

    pub fn from_skeleton(skeleton: &Pdag) -> Self {
        Self::from_pairs(
            skeleton.node_count(),
            skeleton.edges().into_iter().map(|(a, b, _)| (a, b)),
        )
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.contains(&(i.min(j), i.max(j)))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs in ascending order, for deterministic move enumeration.
    fn sorted_pairs(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = self.pairs.iter().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn node_count(&self) -> usize {
        self.p
    }
}

/// Tabu continuation parameters: up to `t0` consecutive non-improving
/// iterations, avoiding the last `t1` visited structures.
#[derive(Debug, Clone, Copy)]
pub struct TabuConfig {
    pub t0: usize,
    pub t1: usize,
}

impl Default for TabuConfig {
    fn default() -> Self {
        TabuConfig { t0: 100, t1: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum MoveKind {
    Add,
    Delete,
    Reverse,
}

#[derive(Debug, Clone, Copy)]
struct Move {
    kind: MoveKind,
    from: usize,
    to: usize,
}

impl Move {
    /// Deterministic tie order: additions before deletions before reversals,
    /// then by unordered pair, then the low-to-high direction first.
    fn order_key(&self) -> (MoveKind, usize, usize, bool) {
        let (a, b) = (self.from.min(self.to), self.from.max(self.to));
        (self.kind, a, b, self.from > self.to)
    }
}

struct TabuList {
    member: HashSet<Vec<(usize, usize)>>,
    order: VecDeque<Vec<(usize, usize)>>,
    capacity: usize,
}

impl TabuList {
    fn new(capacity: usize) -> Self {
        TabuList {
            member: HashSet::new(),
            order: VecDeque::new(),
            capacity,
        }
    }

    fn push(&mut self, sig: Vec<(usize, usize)>) {
        if self.capacity == 0 {
            return;
        }
        if self.member.insert(sig.clone()) {
            self.order.push_back(sig);
            if self.order.len() > self.capacity {
                let evicted = self.order.pop_front().unwrap();
                self.member.remove(&evicted);
            }
        }
    }

    fn contains(&self, sig: &[(usize, usize)]) -> bool {
        self.member.contains(sig)
    }
}

fn signature_after(g: &Pdag, mv: &Move) -> Vec<(usize, usize)> {
    let mut edges = g.directed_edges();
    match mv.kind {
        MoveKind::Add => edges.push((mv.from, mv.to)),
        MoveKind::Delete => edges.retain(|&e| e != (mv.from, mv.to)),
        MoveKind::Reverse => {
            edges.retain(|&e| e != (mv.from, mv.to));
            edges.push((mv.to, mv.from));
        }
    }
    edges.sort_unstable();
    edges
}

fn apply_move(g: &mut Pdag, mv: &Move) {
    match mv.kind {
        MoveKind::Add => g.add_directed(mv.from, mv.to),
        MoveKind::Delete => g.remove_edge(mv.from, mv.to),
        MoveKind::Reverse => {
            g.remove_edge(mv.from, mv.to);
            g.add_directed(mv.to, mv.from);
        }
    }
}

struct MoveEval {
    mv: Move,
    delta: f64,
}

/// Legal moves with their score deltas, in canonical order. Additions stay
/// inside the candidate set; additions and reversals preserve acyclicity.
/// Cycle checks are plain reachability queries and are not statistical
/// calls.
fn enumerate_moves(
    g: &Pdag,
    candidates: &CandidateSet,
    data: &Dataset,
    lambda: f64,
    cache: &ScoreCache,
    counter: &CallCounter,
) -> Vec<MoveEval> {
    let mut out = Vec::new();
    let fam = |child: usize, parents: &[usize]| {
        family_score(data, child, parents, lambda, cache, counter)
    };
    for (a, b) in candidates.sorted_pairs() {
        if g.has_edge(a, b) {
            continue;
        }
        for (from, to) in [(a, b), (b, a)] {
            if g.has_directed_path(to, from) {
                continue; // would close a cycle
            }
            let parents = g.parents(to);
            let mut extended = parents.clone();
            extended.push(from);
            let delta = fam(to, &extended) - fam(to, &parents);
            out.push(MoveEval {
                mv: Move {
                    kind: MoveKind::Add,
                    from,
                    to,
                },
                delta,
            });
        }
    }
    for (from, to) in g.directed_edges() {
        let parents = g.parents(to);
        let reduced: Vec<usize> = parents.iter().copied().filter(|&v| v != from).collect();
        let delta = fam(to, &reduced) - fam(to, &parents);
        out.push(MoveEval {
            mv: Move {
                kind: MoveKind::Delete,
                from,
                to,
            },
            delta,
        });
    }
    for (from, to) in g.directed_edges() {
        // reversal is legal iff no alternative directed path from -> to
        let mut probe = g.clone();
        probe.remove_edge(from, to);
        if probe.has_directed_path(from, to) {
            continue;
        }
        let to_parents = g.parents(to);
        let to_reduced: Vec<usize> = to_parents.iter().copied().filter(|&v| v != from).collect();
        let from_parents = g.parents(from);
        let mut from_extended = from_parents.clone();
        from_extended.push(to);
        let delta = (fam(from, &from_extended) - fam(from, &from_parents))
            + (fam(to, &to_reduced) - fam(to, &to_parents));
        out.push(MoveEval {
            mv: Move {
                kind: MoveKind::Reverse,
                from,
                to,
            },
            delta,
        });
    }
    out.sort_by_key(|x| x.mv.order_key());
    out
}

/// Greedy hill-climbing over DAGs followed by a tabu continuation, returning
/// the best structure visited. The greedy phase applies the top improving
/// move until none improves; the tabu phase then takes the best non-tabu
/// move (improving or not) for up to `t0` consecutive non-improving steps,
/// where tabu membership is an exact match on the sorted directed edge list
/// of the last `t1` visited DAGs.
pub fn hill_climb(
    data: &Dataset,
    init: Pdag,
    candidates: &CandidateSet,
    lambda: f64,
    tabu: TabuConfig,
    cache: &ScoreCache,
    counter: &CallCounter,
) -> Pdag {
    assert!(init.is_dag(), "search starts from a DAG");
    for (from, to) in init.directed_edges() {
        assert!(
            candidates.contains(from, to),
            "initial edge {from} -> {to} outside the candidate set"
        );
    }
    let mut g = init;
    let mut score = graph_score(data, &g, lambda, cache, counter).expect("init is a DAG");
    let mut tabu_list = TabuList::new(tabu.t1);
    tabu_list.push({
        let mut e = g.directed_edges();
        e.sort_unstable();
        e
    });

    // greedy phase
    loop {
        let moves = enumerate_moves(&g, candidates, data, lambda, cache, counter);
        // first of equal deltas wins, so ties resolve by move order
        let mut chosen: Option<&MoveEval> = None;
        for m in &moves {
            if chosen.is_none_or(|c| m.delta > c.delta) {
                chosen = Some(m);
            }
        }
        let Some(chosen) = chosen else { break };
        if chosen.delta <= SCORE_IMPROVEMENT_EPS {
            break;
        }
        let sig = signature_after(&g, &chosen.mv);
        apply_move(&mut g, &chosen.mv);
        score += chosen.delta;
        tabu_list.push(sig);
    }

    let mut best_graph = g.clone();
    let mut best_score = score;

    // suboptimal continuation: up to t0 further moves, the best non-tabu
    // move each time whether or not it improves, returning the best visited
    for _ in 0..tabu.t0 {
        let moves = enumerate_moves(&g, candidates, data, lambda, cache, counter);
        let mut chosen: Option<(&MoveEval, Vec<(usize, usize)>)> = None;
        for m in &moves {
            if chosen.as_ref().is_some_and(|(c, _)| m.delta <= c.delta) {
                continue;
            }
            let sig = signature_after(&g, &m.mv);
            if !tabu_list.contains(&sig) {
                chosen = Some((m, sig));
            }
        }
        let Some((m, sig)) = chosen else { break };
        apply_move(&mut g, &m.mv);
        score += m.delta;
        tabu_list.push(sig);
        if score > best_score + SCORE_IMPROVEMENT_EPS {
            best_score = score;
            best_graph = g.clone();
        }
    }
    best_graph
}

/// Sparse-candidate search: hill-climbing from the empty graph restricted to
/// the adjacencies of a constraint-learned skeleton.
pub fn gsc(
    data: &Dataset,
    skeleton: &Pdag,
    lambda: f64,
    tabu: TabuConfig,
    cache: &ScoreCache,
    counter: &CallCounter,
) -> Pdag {
    hill_climb(
        data,
        Pdag::new(skeleton.node_count()),
        &CandidateSet::from_skeleton(skeleton),
        lambda,
        tabu,
        cache,
        counter,
    )
}

/// Everything the composed pipeline produces.
pub struct PhgsOutput {
    pub dag: Pdag,
    pub path: SolutionPath,
    pub skeleton: PpcSkeleton,
}

/// Partitioned hybrid greedy search: partitioned skeleton estimation without
/// orientation, a solution path of greedy-initialized DAGs selected by BIC,
/// and a final tabu hill-climb from the selected DAG restricted to the pairs
/// that were never separated.
#[allow(clippy::too_many_arguments)]
pub fn phgs(
    data: &Dataset,
    alpha: f64,
    tau: usize,
    alpha_min: f64,
    max_cond_size: usize,
    lambda: f64,
    tabu: TabuConfig,
    seed: u64,
    cache: &ScoreCache,
    counter: &CallCounter,
) -> PhgsOutput {
    let ci = CiSource::GSquared { data, alpha };
    let skeleton = ppc_skeleton(&ci, PartitionSource::Cluster(data), max_cond_size, counter);

    let mut orienter = HgiOrienter {
        scorer: DataScorer {
            data,
            lambda,
            cache,
            counter,
        },
    };
    let path = path_select(
        &skeleton.result.record,
        &skeleton.result.graph,
        data,
        tau,
        alpha_min,
        &mut orienter,
        lambda,
        cache,
        counter,
        seed,
    );

    let alpha_one = path.entries[0].threshold;
    let candidates =
        CandidateSet::from_pairs(data.p(), skeleton.result.record.pairs_at_most(alpha_one));
    let init = path.selected_entry().graph.clone();
    let dag = hill_climb(data, init, &candidates, lambda, tabu, cache, counter);
    PhgsOutput {
        dag,
        path,
        skeleton,
    }
}
