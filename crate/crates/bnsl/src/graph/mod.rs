//! Partially directed graph algebra.
//!
//! A single [`Pdag`] type serves as skeleton, PDAG, CPDAG, and DAG depending
//! on which invariants hold. Adjacency is stored as a dense p x p mark matrix
//! so pair lookups are O(1), which dominates PC-style workloads.

mod dsep;
mod orient;

pub use dsep::{d_separated, enumerate_equivalence_class};
pub use orient::{
    cpdag_of_dag, detect_vstructures_by_testing, detect_vstructures_from_sepsets, meek_closure,
    pdag_to_dag, semi_arbitrary_extension, skel_to_cpdag, vstructures_of_dag,
};

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    None,
    /// row -> col
    Out,
    /// col -> row
    In,
    Und,
}

/// Edge kind as seen from the canonical pair (a, b) with a < b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Undirected,
    /// directed a -> b
    Forward,
    /// directed b -> a
    Backward,
}

/// Partially directed graph over nodes `0..p`.
#[derive(Clone, PartialEq, Eq)]
pub struct Pdag {
    p: usize,
    marks: Vec<Mark>,
}

impl std::fmt::Debug for Pdag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Pdag({})", self.to_edge_list().replace('\n', "; "))
    }
}

impl Pdag {
    pub fn new(p: usize) -> Self {
        Pdag {
            p,
            marks: vec![Mark::None; p * p],
        }
    }

    /// Complete undirected graph.
    pub fn complete(p: usize) -> Self {
        let mut g = Pdag::new(p);
        for i in 0..p {
            for j in (i + 1)..p {
                g.add_undirected(i, j);
            }
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.p
    }

    #[inline]
    fn mark(&self, i: usize, j: usize) -> Mark {
        self.marks[i * self.p + j]
    }

    #[inline]
    fn set_mark(&mut self, i: usize, j: usize, m: Mark) {
        self.marks[i * self.p + j] = m;
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.mark(i, j) != Mark::None
    }

    #[inline]
    pub fn has_undirected(&self, i: usize, j: usize) -> bool {
        self.mark(i, j) == Mark::Und
    }

    /// True iff the directed edge `i -> j` is present.
    #[inline]
    pub fn has_directed(&self, i: usize, j: usize) -> bool {
        self.mark(i, j) == Mark::Out
    }

    pub fn add_undirected(&mut self, i: usize, j: usize) {
        debug_assert_ne!(i, j, "no self-loops");
        debug_assert_eq!(self.mark(i, j), Mark::None, "pair already connected");
        self.set_mark(i, j, Mark::Und);
        self.set_mark(j, i, Mark::Und);
    }

    pub fn add_directed(&mut self, i: usize, j: usize) {
        debug_assert_ne!(i, j, "no self-loops");
        debug_assert_eq!(self.mark(i, j), Mark::None, "pair already connected");
        self.set_mark(i, j, Mark::Out);
        self.set_mark(j, i, Mark::In);
    }

    /// Turns the existing undirected edge `i -- j` into `i -> j`.
    pub fn orient(&mut self, i: usize, j: usize) {
        debug_assert_eq!(self.mark(i, j), Mark::Und, "orient expects i -- j");
        self.set_mark(i, j, Mark::Out);
        self.set_mark(j, i, Mark::In);
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.set_mark(i, j, Mark::None);
        self.set_mark(j, i, Mark::None);
    }

    pub fn parents(&self, i: usize) -> Vec<usize> {
        (0..self.p)
            .filter(|&k| self.mark(i, k) == Mark::In)
            .collect()
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.p)
            .filter(|&k| self.mark(i, k) == Mark::Out)
            .collect()
    }

    pub fn undirected_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.p)
            .filter(|&k| self.mark(i, k) == Mark::Und)
            .collect()
    }

    /// All nodes connected to `i` by any edge, ascending.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.p).filter(|&k| self.has_edge(i, k)).collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.p).filter(|&k| self.has_edge(i, k)).count()
    }

    pub fn edge_count(&self) -> usize {
        let mut count = 0;
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                if self.has_edge(i, j) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Canonical edge list: one entry per connected pair (a < b).
    pub fn edges(&self) -> Vec<(usize, usize, EdgeKind)> {
        let mut out = Vec::new();
        for a in 0..self.p {
            for b in (a + 1)..self.p {
                match self.mark(a, b) {
                    Mark::None => {}
                    Mark::Und => out.push((a, b, EdgeKind::Undirected)),
                    Mark::Out => out.push((a, b, EdgeKind::Forward)),
                    Mark::In => out.push((a, b, EdgeKind::Backward)),
                }
            }
        }
        out
    }

    /// Directed edges as (from, to), ascending by (from, to).
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for j in 0..self.p {
                if self.mark(i, j) == Mark::Out {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn undirected_edge_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.p {
            for b in (a + 1)..self.p {
                if self.mark(a, b) == Mark::Und {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn is_fully_directed(&self) -> bool {
        self.marks.iter().all(|&m| m != Mark::Und)
    }

    /// Acyclicity of the directed part (undirected edges ignored), by Kahn
    /// ordering.
    pub fn directed_part_acyclic(&self) -> bool {
        self.directed_topological_order().is_some()
    }

    pub fn is_dag(&self) -> bool {
        self.is_fully_directed() && self.directed_part_acyclic()
    }

    /// Topological order of the directed part; `None` if it has a cycle.
    pub fn directed_topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg = vec![0usize; self.p];
        for i in 0..self.p {
            for j in 0..self.p {
                if self.mark(i, j) == Mark::Out {
                    indeg[j] += 1;
                }
            }
        }
        let mut queue: Vec<usize> = (0..self.p).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(self.p);
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            order.push(u);
            for v in self.children(u) {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    queue.push(v);
                }
            }
        }
        (order.len() == self.p).then_some(order)
    }

    /// True iff a directed path `from -> ... -> to` exists (directed edges
    /// only). `from == to` counts as reachable.
    pub fn has_directed_path(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.p];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(u) = stack.pop() {
            for v in self.children(u) {
                if v == to {
                    return true;
                }
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        false
    }

    /// Undirected copy of all adjacencies.
    pub fn skeleton(&self) -> Pdag {
        let mut g = Pdag::new(self.p);
        for a in 0..self.p {
            for b in (a + 1)..self.p {
                if self.has_edge(a, b) {
                    g.add_undirected(a, b);
                }
            }
        }
        g
    }

    pub fn same_skeleton(&self, other: &Pdag) -> bool {
        if self.p != other.p {
            return false;
        }
        for a in 0..self.p {
            for b in (a + 1)..self.p {
                if self.has_edge(a, b) != other.has_edge(a, b) {
                    return false;
                }
            }
        }
        true
    }

    /// Relabels nodes: node `i` of `self` becomes `perm[i]` in the result.
    pub fn relabel(&self, perm: &[usize]) -> Pdag {
        assert_eq!(perm.len(), self.p);
        let mut g = Pdag::new(self.p);
        for (a, b, kind) in self.edges() {
            let (x, y) = (perm[a], perm[b]);
            match kind {
                EdgeKind::Undirected => g.add_undirected(x, y),
                EdgeKind::Forward => g.add_directed(x, y),
                EdgeKind::Backward => g.add_directed(y, x),
            }
        }
        g
    }

    /// Edge-list text form: a `nodes <p>` header followed by one edge per
    /// line, `i -> j` or `i -- j`, sorted by canonical pair.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes {}", self.p);
        for (a, b, kind) in self.edges() {
            let _ = match kind {
                EdgeKind::Undirected => writeln!(s, "{a} -- {b}"),
                EdgeKind::Forward => writeln!(s, "{a} -> {b}"),
                EdgeKind::Backward => writeln!(s, "{b} -> {a}"),
            };
        }
        s
    }

    pub fn from_edge_list(text: &str) -> Result<Pdag, GraphError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| GraphError::MalformedEdgeList("empty input".into()))?;
        let p: usize = header
            .strip_prefix("nodes ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| GraphError::MalformedEdgeList(format!("bad header {header:?}")))?;
        let mut g = Pdag::new(p);
        for line in lines {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let [a, op, b] = tokens[..] else {
                return Err(GraphError::MalformedEdgeList(format!("bad line {line:?}")));
            };
            let a: usize = a
                .parse()
                .map_err(|_| GraphError::MalformedEdgeList(format!("bad index {a:?}")))?;
            let b: usize = b
                .parse()
                .map_err(|_| GraphError::MalformedEdgeList(format!("bad index {b:?}")))?;
            if a >= p || b >= p || a == b {
                return Err(GraphError::MalformedEdgeList(format!("bad pair {a} {b}")));
            }
            match op {
                "--" => g.add_undirected(a, b),
                "->" => g.add_directed(a, b),
                _ => return Err(GraphError::MalformedEdgeList(format!("bad op {op:?}"))),
            }
        }
        Ok(g)
    }
}

/// Collider `a -> mid <- b` with `a` and `b` nonadjacent; stored with a < b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VStructure {
    pub a: usize,
    pub mid: usize,
    pub b: usize,
}

impl VStructure {
    pub fn new(a: usize, mid: usize, b: usize) -> Self {
        debug_assert!(a != b && a != mid && b != mid);
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        VStructure { a, mid, b }
    }
}

/// Per-pair maximum p-values and the conditioning sets achieving them,
/// accumulated over every test an algorithm runs.
#[derive(Debug, Clone)]
pub struct SeparationRecord {
    p: usize,
    phi: Vec<f64>,
    sepsets: HashMap<(usize, usize), Vec<usize>>,
}

impl SeparationRecord {
    pub fn new(p: usize) -> Self {
        SeparationRecord {
            p,
            phi: vec![f64::NAN; p * p],
            sepsets: HashMap::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.p
    }

    /// Folds one test outcome into the running maximum. Ties keep the first
    /// set seen.
    pub fn record(&mut self, i: usize, j: usize, p_value: f64, set: &[usize]) {
        let current = self.phi[i * self.p + j];
        if current.is_nan() || p_value > current {
            self.phi[i * self.p + j] = p_value;
            self.phi[j * self.p + i] = p_value;
            let key = (i.min(j), i.max(j));
            let mut s = set.to_vec();
            s.sort_unstable();
            self.sepsets.insert(key, s);
        }
    }

    /// Maximum p-value seen for the pair, if it was ever tested.
    pub fn phi(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.phi[i * self.p + j];
        (!v.is_nan()).then_some(v)
    }

    pub fn sepset(&self, i: usize, j: usize) -> Option<&[usize]> {
        self.sepsets
            .get(&(i.min(j), i.max(j)))
            .map(|v| v.as_slice())
    }

    /// Pairs with recorded phi at most `alpha`, i.e. connected at that
    /// threshold, ascending.
    pub fn pairs_at_most(&self, alpha: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                if let Some(v) = self.phi(i, j) {
                    if v <= alpha {
                        out.push((i, j));
                    }
                }
            }
        }
        out
    }

    /// Skeleton graph at threshold `alpha`.
    pub fn threshold_graph(&self, alpha: f64) -> Pdag {
        let mut g = Pdag::new(self.p);
        for (i, j) in self.pairs_at_most(alpha) {
            g.add_undirected(i, j);
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marks_stay_symmetric() {
        let mut g = Pdag::new(4);
        g.add_undirected(0, 1);
        g.add_directed(1, 2);
        assert!(g.has_undirected(1, 0));
        assert!(g.has_directed(1, 2));
        assert!(!g.has_directed(2, 1));
        assert_eq!(g.parents(2), vec![1]);
        assert_eq!(g.children(1), vec![2]);
        assert_eq!(g.undirected_neighbors(0), vec![1]);
        assert_eq!(g.neighbors(1), vec![0, 2]);
        g.orient(0, 1);
        assert!(g.has_directed(0, 1));
        g.remove_edge(1, 2);
        assert!(!g.has_edge(1, 2));
    }

    #[test]
    fn acyclicity_and_topological_order() {
        let mut g = Pdag::new(3);
        g.add_directed(0, 1);
        g.add_directed(1, 2);
        assert!(g.is_dag());
        assert_eq!(g.directed_topological_order(), Some(vec![0, 1, 2]));
        let mut cyc = Pdag::new(3);
        cyc.add_directed(0, 1);
        cyc.add_directed(1, 2);
        cyc.add_directed(2, 0);
        assert!(!cyc.directed_part_acyclic());
        let mut pdag = Pdag::new(3);
        pdag.add_directed(0, 1);
        pdag.add_undirected(1, 2);
        assert!(!pdag.is_dag());
        assert!(pdag.directed_part_acyclic());
    }

    #[test]
    fn edge_list_round_trips() {
        let mut g = Pdag::new(5);
        g.add_undirected(0, 3);
        g.add_directed(4, 1);
        g.add_directed(2, 3);
        let text = g.to_edge_list();
        let back = Pdag::from_edge_list(&text).unwrap();
        assert_eq!(g, back);
        assert_eq!(text, back.to_edge_list());
        assert!(text.starts_with("nodes 5\n"));
        assert!(text.contains("4 -> 1"));
    }

    #[test]
    fn edge_list_rejects_garbage() {
        assert!(Pdag::from_edge_list("").is_err());
        assert!(Pdag::from_edge_list("nodes x").is_err());
        assert!(Pdag::from_edge_list("nodes 2\n0 => 1").is_err());
        assert!(Pdag::from_edge_list("nodes 2\n0 -> 5").is_err());
    }

    #[test]
    fn separation_record_keeps_running_max() {
        let mut rec = SeparationRecord::new(4);
        assert_eq!(rec.phi(0, 1), None);
        rec.record(0, 1, 0.2, &[2]);
        rec.record(0, 1, 0.05, &[3]);
        assert_eq!(rec.phi(0, 1), Some(0.2));
        assert_eq!(rec.phi(1, 0), Some(0.2));
        assert_eq!(rec.sepset(0, 1), Some(&[2][..]));
        rec.record(1, 0, 0.9, &[3, 2]);
        assert_eq!(rec.phi(0, 1), Some(0.9));
        assert_eq!(rec.sepset(1, 0), Some(&[2, 3][..]));
    }

    #[test]
    fn threshold_graph_filters_by_phi() {
        let mut rec = SeparationRecord::new(3);
        rec.record(0, 1, 0.01, &[]);
        rec.record(0, 2, 0.5, &[1]);
        rec.record(1, 2, 0.03, &[]);
        let g = rec.threshold_graph(0.05);
        assert!(g.has_undirected(0, 1));
        assert!(g.has_undirected(1, 2));
        assert!(!g.has_edge(0, 2));
    }

    #[test]
    fn relabel_moves_edges() {
        let mut g = Pdag::new(3);
        g.add_directed(0, 1);
        g.add_undirected(1, 2);
        let perm = [2, 0, 1]; // 0->2, 1->0, 2->1
        let h = g.relabel(&perm);
        assert!(h.has_directed(2, 0));
        assert!(h.has_undirected(0, 1));
    }
}
