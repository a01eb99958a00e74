//! Skeleton estimation: the stable PC skeleton phase and the partitioned PC
//! algorithm, both parameterized over a conditional-independence source.

use std::collections::{HashMap, HashSet};

use itertools::Itertools;

use crate::cluster::{cluster, Partition};
use crate::data::Dataset;
use crate::graph::{
    d_separated, detect_vstructures_from_sepsets, skel_to_cpdag, Pdag, SeparationRecord,
};
use crate::stats::{g_squared, CallCounter, CallCounts};

/// Where conditional-independence answers come from: the G2 test on data at
/// a significance threshold, or d-separation in a known DAG.
pub enum CiSource<'a> {
    GSquared { data: &'a Dataset, alpha: f64 },
    Oracle { dag: &'a Pdag },
}

/// Outcome of one test: the independence verdict and the p-value recorded
/// into the separation record (oracle answers map to 1 and 0).
#[derive(Debug, Clone, Copy)]
pub struct CiOutcome {
    pub independent: bool,
    pub p_value: f64,
}

impl CiSource<'_> {
    /// The threshold against which p-values are compared downstream.
    pub fn threshold(&self) -> f64 {
        match self {
            CiSource::GSquared { alpha, .. } => *alpha,
            CiSource::Oracle { .. } => 0.5,
        }
    }

    /// Runs one test; `None` when the data source refuses the contingency
    /// table (cell budget), which callers treat as a dependent outcome
    /// without recording anything.
    pub fn test(
        &self,
        i: usize,
        j: usize,
        cond: &[usize],
        counter: &CallCounter,
    ) -> Option<CiOutcome> {
        match self {
            CiSource::GSquared { data, alpha } => {
                let r = g_squared(data, i, j, cond, counter).ok()?;
                Some(CiOutcome {
                    independent: r.p_value > *alpha,
                    p_value: r.p_value,
                })
            }
            CiSource::Oracle { dag } => {
                counter.add_ci_test();
                let sep = d_separated(dag, i, j, cond);
                Some(CiOutcome {
                    independent: sep,
                    p_value: if sep { 1.0 } else { 0.0 },
                })
            }
        }
    }

    pub fn independent(&self, i: usize, j: usize, cond: &[usize], counter: &CallCounter) -> bool {
        self.test(i, j, cond, counter)
            .map(|o| o.independent)
            .unwrap_or(false)
    }

    pub fn node_count(&self) -> usize {
        match self {
            CiSource::GSquared { data, .. } => data.p(),
            CiSource::Oracle { dag } => dag.node_count(),
        }
    }
}

/// Skeleton plus the separation record accumulated while estimating it.
#[derive(Debug, Clone)]
pub struct SkeletonResult {
    pub graph: Pdag,
    pub record: SeparationRecord,
    pub calls: CallCounts,
}

impl SkeletonResult {
    /// JSON export: the edge list, the max-p-value matrix (dense rows, -1
    /// for never-tested pairs), the separation sets keyed `"i,j"`, and the
    /// call counts.
    pub fn to_json(&self) -> serde_json::Value {
        let p = self.record.node_count();
        let phi: Vec<Vec<f64>> = (0..p)
            .map(|i| {
                (0..p)
                    .map(|j| {
                        if i == j {
                            -1.0
                        } else {
                            self.record.phi(i, j).unwrap_or(-1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut sepsets = serde_json::Map::new();
        for i in 0..p {
            for j in (i + 1)..p {
                if let Some(set) = self.record.sepset(i, j) {
                    sepsets.insert(format!("{i},{j}"), serde_json::json!(set));
                }
            }
        }
        serde_json::json!({
            "edges": self.graph.to_edge_list().lines().skip(1).collect::<Vec<_>>(),
            "phi": phi,
            "sepsets": sepsets,
            "calls": self.calls,
        })
    }
}

/// The stable skeleton phase: adjacencies are frozen per level, pairs are
/// visited in ascending order, and candidate conditioning sets are the
/// size-`l` subsets of either frozen neighborhood (deduplicated across the
/// two sides, lexicographic within each). Every test outcome folds into
/// `rec`; an independent outcome disconnects the pair immediately.
pub fn pc_skeleton(
    ci: &CiSource,
    init: Pdag,
    start_level: usize,
    max_cond_size: usize,
    mut restrict: impl FnMut(usize, usize, &[usize]) -> bool,
    rec: &mut SeparationRecord,
    counter: &CallCounter,
) -> Pdag {
    let p = init.node_count();
    let mut g = init;
    let mut level = start_level;
    while level <= max_cond_size {
        let frozen = g.clone();
        for i in 0..p {
            for j in (i + 1)..p {
                if !frozen.has_edge(i, j) {
                    continue;
                }
                let side_i: Vec<usize> = frozen
                    .neighbors(i)
                    .into_iter()
                    .filter(|&v| v != j)
                    .collect();
                let side_j: Vec<usize> = frozen
                    .neighbors(j)
                    .into_iter()
                    .filter(|&v| v != i)
                    .collect();
                if side_i.len() < level && side_j.len() < level {
                    continue;
                }
                let mut tried: HashSet<Vec<usize>> = HashSet::new();
                'pair: for side in [&side_i, &side_j] {
                    if side.len() < level {
                        continue;
                    }
                    for cond in side.iter().copied().combinations(level) {
                        if !tried.insert(cond.clone()) {
                            continue;
                        }
                        if !restrict(i, j, &cond) {
                            continue;
                        }
                        if let Some(outcome) = ci.test(i, j, &cond, counter) {
                            rec.record(i, j, outcome.p_value, &cond);
                            if outcome.independent {
                                g.remove_edge(i, j);
                                break 'pair;
                            }
                        }
                    }
                }
            }
        }
        level += 1;
        let enough = (0..p).any(|i| g.degree(i) > level);
        if !enough {
            break;
        }
    }
    g
}

/// Plain PC-stable pipeline: complete initial graph, conditioning sets from
/// the empty set upward, then constraint-based orientation.
pub fn pc(ci: &CiSource, max_cond_size: usize, counter: &CallCounter) -> (Pdag, SkeletonResult) {
    let p = ci.node_count();
    let mut rec = SeparationRecord::new(p);
    let graph = pc_skeleton(
        ci,
        Pdag::complete(p),
        0,
        max_cond_size,
        |_, _, _| true,
        &mut rec,
        counter,
    );
    let vstructs = detect_vstructures_from_sepsets(&graph, &rec, ci.threshold())
        .expect("every separated pair was recorded");
    let cpdag = skel_to_cpdag(&graph, &vstructs);
    (
        cpdag,
        SkeletonResult {
            graph,
            record: rec,
            calls: counter.snapshot(),
        },
    )
}

/// How the partitioned algorithm obtains its node clusters.
pub enum PartitionSource<'a> {
    /// Cluster from data: distance matrix, adaptive partition, and the
    /// marginal blacklist derived from the same mutual informations.
    Cluster(&'a Dataset),
    /// A caller-supplied partition; the empty-set screen then runs through
    /// the CI source pair by pair.
    Explicit(Partition),
}

/// Snapshots of the partitioned estimation stages, mostly for inspection and
/// testing.
#[derive(Debug, Clone)]
pub struct PpcTrace {
    pub after_within: Pdag,
    pub after_screen_connect: Pdag,
    pub after_screen_prune: Pdag,
}

#[derive(Debug)]
pub struct PpcSkeleton {
    pub result: SkeletonResult,
    pub partition: Partition,
    pub trace: PpcTrace,
}

/// Remark-style capped screen test: a set larger than `m` is replaced by all
/// of its size-`m` subsets, stopping at the first separation. Sets already
/// evaluated for this pair are skipped (they were dependent, or the pair
/// would be gone). Returns true iff some evaluated set separates the pair.
#[allow(clippy::too_many_arguments)]
fn screen_test(
    ci: &CiSource,
    i: usize,
    j: usize,
    set: &[usize],
    m: usize,
    rec: &mut SeparationRecord,
    counter: &CallCounter,
    tested: &mut HashSet<Vec<usize>>,
) -> bool {
    let mut run_one = |cond: &[usize], rec: &mut SeparationRecord| -> bool {
        if !tested.insert(cond.to_vec()) {
            return false;
        }
        match ci.test(i, j, cond, counter) {
            Some(outcome) => {
                rec.record(i, j, outcome.p_value, cond);
                outcome.independent
            }
            None => false,
        }
    };
    if set.len() <= m {
        run_one(set, rec)
    } else {
        for cond in set.iter().copied().combinations(m) {
            if run_one(&cond, rec) {
                return true;
            }
        }
        false
    }
}

/// Partitioned skeleton estimation: marginal screening, within-cluster
/// stable PC from conditioning size one, constructive then destructive
/// between-cluster screening against frozen neighborhoods, and a restricted
/// completion pass that only visits conditioning sets no earlier stage could
/// have tried.
pub fn ppc_skeleton(
    ci: &CiSource,
    partition_source: PartitionSource,
    max_cond_size: usize,
    counter: &CallCounter,
) -> PpcSkeleton {
    let p = ci.node_count();
    let alpha = ci.threshold();
    let mut rec = SeparationRecord::new(p);

    // partition and the empty-set screen
    let partition = match partition_source {
        PartitionSource::Cluster(data) => {
            assert_eq!(data.p(), p);
            let (part, dm) = cluster(data, alpha, counter);
            match ci {
                CiSource::GSquared { .. } => {
                    // the distance matrix already carries every marginal
                    // p-value; no further l = 0 tests needed
                    for i in 0..p {
                        for j in (i + 1)..p {
                            rec.record(i, j, dm.marginal_p_value(i, j), &[]);
                        }
                    }
                }
                CiSource::Oracle { .. } => {
                    // partition comes from data, independence from the oracle
                    for i in 0..p {
                        for j in (i + 1)..p {
                            if let Some(outcome) = ci.test(i, j, &[], counter) {
                                rec.record(i, j, outcome.p_value, &[]);
                            }
                        }
                    }
                }
            }
            part
        }
        PartitionSource::Explicit(part) => {
            assert_eq!(part.labels.len(), p);
            for i in 0..p {
                for j in (i + 1)..p {
                    if let Some(outcome) = ci.test(i, j, &[], counter) {
                        rec.record(i, j, outcome.p_value, &[]);
                    }
                }
            }
            part
        }
    };
    let labels = partition.labels.clone();
    let blacklisted =
        |rec: &SeparationRecord, i: usize, j: usize| rec.phi(i, j).is_some_and(|v| v > alpha);

    // within-cluster edge estimation from conditioning size one
    let mut init = Pdag::new(p);
    for i in 0..p {
        for j in (i + 1)..p {
            if labels[i] == labels[j] && !blacklisted(&rec, i, j) {
                init.add_undirected(i, j);
            }
        }
    }
    let mut g = pc_skeleton(
        ci,
        init,
        1,
        max_cond_size,
        |_, _, _| true,
        &mut rec,
        counter,
    );
    let after_within = g.clone();

    // between-cluster screening; every set tested here is remembered so the
    // completion pass can exclude exactly those
    let mut screen_sets: HashMap<(usize, usize), HashSet<Vec<usize>>> = HashMap::new();

    // constructive screen: connect between pairs that survive conditioning
    // on the union of their frozen neighborhoods
    let frozen = g.clone();
    for i in 0..p {
        for j in (i + 1)..p {
            if labels[i] == labels[j] || blacklisted(&rec, i, j) {
                continue;
            }
            let union: Vec<usize> = frozen
                .neighbors(i)
                .into_iter()
                .chain(frozen.neighbors(j))
                .filter(|&v| v != i && v != j)
                .sorted_unstable()
                .dedup()
                .collect();
            let tested = screen_sets.entry((i, j)).or_default();
            // the empty set was already evaluated by the marginal screen
            tested.insert(Vec::new());
            let separated = screen_test(ci, i, j, &union, max_cond_size, &mut rec, counter, tested);
            if !separated {
                g.add_undirected(i, j);
            }
        }
    }
    let after_screen_connect = g.clone();

    // destructive screen: drop between edges separated by either frozen
    // neighborhood
    let frozen = g.clone();
    for i in 0..p {
        for j in (i + 1)..p {
            if labels[i] == labels[j] || !frozen.has_edge(i, j) {
                continue;
            }
            let side_i: Vec<usize> = frozen
                .neighbors(i)
                .into_iter()
                .filter(|&v| v != j)
                .collect();
            let side_j: Vec<usize> = frozen
                .neighbors(j)
                .into_iter()
                .filter(|&v| v != i)
                .collect();
            let tested = screen_sets.entry((i, j)).or_default();
            let mut separated =
                screen_test(ci, i, j, &side_i, max_cond_size, &mut rec, counter, tested);
            if !separated {
                separated =
                    screen_test(ci, i, j, &side_j, max_cond_size, &mut rec, counter, tested);
            }
            if separated {
                g.remove_edge(i, j);
            }
        }
    }
    let after_screen_prune = g.clone();

    // completion: a restricted stable PC continuation. Within pairs only
    // need sets reaching outside their cluster; between pairs skip exactly
    // the sets the screens already evaluated.
    let restrict = |i: usize, j: usize, cond: &[usize]| -> bool {
        if labels[i] == labels[j] {
            cond.iter().any(|&k| labels[k] != labels[i])
        } else {
            !screen_sets
                .get(&(i, j))
                .is_some_and(|tested| tested.contains(cond))
        }
    };
    let graph = pc_skeleton(ci, g, 1, max_cond_size, restrict, &mut rec, counter);

    PpcSkeleton {
        result: SkeletonResult {
            graph,
            record: rec,
            calls: counter.snapshot(),
        },
        partition,
        trace: PpcTrace {
            after_within,
            after_screen_connect,
            after_screen_prune,
        },
    }
}

/// Full partitioned PC: skeleton stages plus sepset-based orientation.
pub fn ppc(
    ci: &CiSource,
    partition_source: PartitionSource,
    max_cond_size: usize,
    counter: &CallCounter,
) -> (Pdag, PpcSkeleton) {
    let mut out = ppc_skeleton(ci, partition_source, max_cond_size, counter);
    let vstructs =
        detect_vstructures_from_sepsets(&out.result.graph, &out.result.record, ci.threshold())
            .expect("every separated pair was recorded");
    let cpdag = skel_to_cpdag(&out.result.graph, &vstructs);
    out.result.calls = counter.snapshot();
    (cpdag, out)
}
