//! Node partitioning for partitioned skeleton estimation: a normalized
//! mutual-information distance, a marginal-independence blacklist, and
//! adaptive average-linkage clustering.

use crate::data::Dataset;
use crate::stats::{chi_square_upper_tail, entropy, mutual_information, CallCounter};

/// Cluster labels in `0..kappa` plus the marginally independent pairs found
/// while building the distance matrix.
#[derive(Debug, Clone)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub kappa: usize,
    pub blacklist: Vec<(usize, usize)>,
}

impl Partition {
    /// Puts every node in one cluster; the degenerate partition that makes
    /// partitioned estimation coincide with the plain algorithm.
    pub fn single(p: usize) -> Self {
        Partition {
            labels: vec![0; p],
            kappa: 1,
            blacklist: Vec::new(),
        }
    }

    pub fn from_labels(labels: Vec<usize>) -> Self {
        let kappa = labels.iter().copied().max().map_or(1, |m| m + 1);
        Partition {
            labels,
            kappa,
            blacklist: Vec::new(),
        }
    }
}

/// Pairwise normalized distances `1 - I/H` plus the marginal p-values that
/// double as the empty-set independence screen.
#[derive(Debug, Clone)]
pub struct DistanceResult {
    pub p: usize,
    /// row-major p x p, symmetric, zero diagonal
    pub d: Vec<f64>,
    /// marginal G2 p-values per pair (diagonal unused)
    pub marginal_p: Vec<f64>,
    pub blacklist: Vec<(usize, usize)>,
}

impl DistanceResult {
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.p + j]
    }

    pub fn marginal_p_value(&self, i: usize, j: usize) -> f64 {
        self.marginal_p[i * self.p + j]
    }
}

/// Computes the distance matrix with p marginal entropies and p(p-1)/2
/// mutual informations (p(p+1)/2 statistical evaluations in total), deriving
/// joint entropies through the chain rule rather than recounting. A pair is
/// blacklisted when its marginal G2 p-value, obtained from `2n * I`, exceeds
/// `alpha`.
pub fn distance_matrix(data: &Dataset, alpha: f64, counter: &CallCounter) -> DistanceResult {
    let p = data.p();
    let n = data.n() as f64;
    let h: Vec<f64> = (0..p).map(|i| entropy(data, i)).collect();
    counter.add_mi_entropy(p as u64);

    let mut d = vec![0.0; p * p];
    let mut marginal_p = vec![f64::NAN; p * p];
    let mut blacklist = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let mi = mutual_information(data, i, j);
            counter.add_mi_entropy(1);
            let joint = h[i] + h[j] - mi;
            let dist = if joint > 0.0 {
                (1.0 - mi / joint).clamp(0.0, 1.0)
            } else {
                0.0
            };
            d[i * p + j] = dist;
            d[j * p + i] = dist;

            let df = (data.cardinality(i) as u64 - 1) * (data.cardinality(j) as u64 - 1);
            let p_value = chi_square_upper_tail(df, 2.0 * n * mi);
            marginal_p[i * p + j] = p_value;
            marginal_p[j * p + i] = p_value;
            if p_value > alpha {
                blacklist.push((i, j));
            }
        }
    }
    DistanceResult {
        p,
        d,
        marginal_p,
        blacklist,
    }
}

/// Minimum size for a cluster to count as large. The 0.05p bar is meant for
/// large p; the floor of 3 keeps small-p cuts from shattering into pair
/// clusters that starve the within-cluster estimation stage.
fn large_threshold(p: usize) -> usize {
    ((0.05 * p as f64).ceil() as usize).max(3)
}

fn average_linkage(d: &[f64], p: usize, a: &[usize], b: &[usize]) -> f64 {
    let mut sum = 0.0;
    for &x in a {
        for &y in b {
            sum += d[x * p + y];
        }
    }
    sum / (a.len() * b.len()) as f64
}

/// Linkage values within this margin count as tied, so index-based tie
/// breaking is not defeated by float drift in the running averages.
const LINKAGE_TIE_EPS: f64 = 1e-12;

fn linkage_key_better(candidate: (f64, usize, usize), best: (f64, usize, usize)) -> bool {
    if (candidate.0 - best.0).abs() <= LINKAGE_TIE_EPS {
        (candidate.1, candidate.2) < (best.1, best.2)
    } else {
        candidate.0 < best.0
    }
}

/// Agglomerative average-linkage partition of `p` nodes given their distance
/// matrix. The dendrogram cut is the highest level maximizing the number of
/// large clusters (size at least `0.05p`), with remaining small clusters
/// merged smallest-first into their nearest cluster by average linkage.
pub fn partition(d: &[f64], p: usize) -> Partition {
    assert_eq!(d.len(), p * p);
    if p == 1 {
        return Partition::single(1);
    }
    let threshold = large_threshold(p);

    // Lance-Williams average-linkage agglomeration; ties broken by the
    // smallest representative pair for determinism.
    let mut link = d.to_vec();
    let mut members: Vec<Option<Vec<usize>>> = (0..p).map(|i| Some(vec![i])).collect();
    let mut reps: Vec<usize> = (0..p).collect();
    // labels snapshot per level, keyed by cluster slot
    let mut level_labels: Vec<Vec<usize>> = Vec::with_capacity(p);
    let snapshot = |members: &[Option<Vec<usize>>]| {
        let mut labels = vec![0usize; p];
        for (slot, m) in members.iter().enumerate() {
            if let Some(nodes) = m {
                for &v in nodes {
                    labels[v] = slot;
                }
            }
        }
        labels
    };
    level_labels.push(snapshot(&members));

    for _ in 0..p - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..p {
            if members[a].is_none() {
                continue;
            }
            for b in (a + 1)..p {
                if members[b].is_none() {
                    continue;
                }
                let (ra, rb) = (reps[a].min(reps[b]), reps[a].max(reps[b]));
                let key = (link[a * p + b], ra, rb, a, b);
                let better = match &best {
                    None => true,
                    Some((l, r0, r1, _, _)) => {
                        linkage_key_better((key.0, key.1, key.2), (*l, *r0, *r1))
                    }
                };
                if better {
                    best = Some(key);
                }
            }
        }
        let (_, _, _, a, b) = best.expect("at least two active clusters");
        let (sa, sb) = (
            members[a].as_ref().unwrap().len() as f64,
            members[b].as_ref().unwrap().len() as f64,
        );
        for c in 0..p {
            if c == a || c == b || members[c].is_none() {
                continue;
            }
            let merged = (sa * link[a * p + c] + sb * link[b * p + c]) / (sa + sb);
            link[a * p + c] = merged;
            link[c * p + a] = merged;
        }
        let moved = members[b].take().unwrap();
        members[a].as_mut().unwrap().extend(moved);
        members[a].as_mut().unwrap().sort_unstable();
        reps[a] = reps[a].min(reps[b]);
        level_labels.push(snapshot(&members));
    }

    // pick the highest cut with the greatest number of large clusters
    let mut best_level = 0usize;
    let mut best_count = 0usize;
    for (level, labels) in level_labels.iter().enumerate() {
        let mut sizes = std::collections::HashMap::new();
        for &l in labels {
            *sizes.entry(l).or_insert(0usize) += 1;
        }
        let count = sizes.values().filter(|&&s| s >= threshold).count();
        if count >= best_count {
            best_count = count;
            best_level = level; // >= prefers the higher cut on ties
        }
    }
    let chosen = &level_labels[best_level];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    {
        let mut slot_to_cluster = std::collections::HashMap::new();
        for v in 0..p {
            let slot = chosen[v];
            let idx = *slot_to_cluster.entry(slot).or_insert_with(|| {
                clusters.push(Vec::new());
                clusters.len() - 1
            });
            clusters[idx].push(v);
        }
    }

    // fold small clusters in, smallest first, each into its nearest cluster
    while clusters.len() > 1 {
        let small = clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| c.len() < threshold)
            .min_by_key(|(_, c)| (c.len(), c[0]))
            .map(|(i, _)| i);
        let Some(si) = small else { break };
        let mut target: Option<(f64, usize, usize)> = None;
        for (ci, c) in clusters.iter().enumerate() {
            if ci == si {
                continue;
            }
            let l = average_linkage(d, p, &clusters[si], c);
            let key = (l, c[0], ci);
            if target.is_none_or(|(tl, tr, _)| linkage_key_better((key.0, key.1, 0), (tl, tr, 0))) {
                target = Some(key);
            }
        }
        let (_, _, ti) = target.unwrap();
        let folded = clusters.remove(si);
        let ti = if ti > si { ti - 1 } else { ti };
        clusters[ti].extend(folded);
        clusters[ti].sort_unstable();
    }

    debug_assert!(clusters.len() <= 20 || large_threshold(p) == 1);
    // label clusters by order of their smallest member
    clusters.sort_by_key(|c| c[0]);
    let mut labels = vec![0usize; p];
    for (idx, c) in clusters.iter().enumerate() {
        for &v in c {
            labels[v] = idx;
        }
    }
    Partition {
        labels,
        kappa: clusters.len(),
        blacklist: Vec::new(),
    }
}

/// Distance matrix plus partition in one call; the partition carries the
/// marginal blacklist.
pub fn cluster(data: &Dataset, alpha: f64, counter: &CallCounter) -> (Partition, DistanceResult) {
    let dm = distance_matrix(data, alpha, counter);
    let mut part = partition(&dm.d, dm.p);
    part.blacklist = dm.blacklist.clone();
    (part, dm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn block_distances(sizes: &[usize], within: f64, between: f64) -> (Vec<f64>, usize) {
        let p: usize = sizes.iter().sum();
        let mut block = Vec::new();
        for (b, &s) in sizes.iter().enumerate() {
            block.extend(std::iter::repeat(b).take(s));
        }
        let mut d = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    d[i * p + j] = if block[i] == block[j] {
                        within
                    } else {
                        between
                    };
                }
            }
        }
        (d, p)
    }

    #[test]
    fn distance_of_copied_column_is_zero() {
        let col: Vec<u32> = (0..60).map(|i| (i % 2) as u32).collect();
        let noise: Vec<u32> = (0..60).map(|i| ((i / 3) % 2) as u32).collect();
        let data = Dataset::from_columns(vec![col.clone(), col, noise], vec![2, 2, 2]).unwrap();
        let counter = CallCounter::new();
        let dm = distance_matrix(&data, 0.05, &counter);
        assert_abs_diff_eq!(dm.distance(0, 1), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn independent_pair_has_distance_one_and_gets_blacklisted() {
        // exactly count-independent pair
        let mut c0 = Vec::new();
        let mut c1 = Vec::new();
        for a in 0..2u32 {
            for b in 0..2u32 {
                for _ in 0..25 {
                    c0.push(a);
                    c1.push(b);
                }
            }
        }
        let data = Dataset::from_columns(vec![c0, c1], vec![2, 2]).unwrap();
        let counter = CallCounter::new();
        let dm = distance_matrix(&data, 0.5, &counter);
        assert_abs_diff_eq!(dm.distance(0, 1), 1.0, epsilon = 1e-12);
        assert_eq!(dm.blacklist, vec![(0, 1)]);
    }

    #[test]
    fn distance_matrix_uses_p_plus_choose2_evaluations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = 5;
        let cols: Vec<Vec<u32>> = (0..p)
            .map(|_| (0..200).map(|_| rng.gen_range(0..3u32)).collect())
            .collect();
        let data = Dataset::from_columns(cols, vec![3; p]).unwrap();
        let counter = CallCounter::new();
        let dm = distance_matrix(&data, 0.05, &counter);
        assert_eq!(
            counter.snapshot().mi_entropy_calls,
            (p * (p + 1) / 2) as u64
        );
        // symmetric with zero diagonal, matches a direct recomputation
        for i in 0..p {
            assert_eq!(dm.distance(i, i), 0.0);
            for j in 0..p {
                assert_eq!(dm.distance(i, j), dm.distance(j, i));
                if i != j {
                    let mi = mutual_information(&data, i, j);
                    let joint = entropy(&data, i) + entropy(&data, j) - mi;
                    assert_abs_diff_eq!(dm.distance(i, j), 1.0 - mi / joint, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn triangle_inequality_spot_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let p = 8;
        let n = 400;
        let cols: Vec<Vec<u32>> = (0..p)
            .map(|_| (0..n).map(|_| rng.gen_range(0..3u32)).collect())
            .collect();
        let data = Dataset::from_columns(cols, vec![3; p]).unwrap();
        let counter = CallCounter::new();
        let dm = distance_matrix(&data, 0.05, &counter);
        for _ in 0..1000 {
            let i = rng.gen_range(0..p);
            let j = rng.gen_range(0..p);
            let k = rng.gen_range(0..p);
            assert!(dm.distance(i, j) <= dm.distance(i, k) + dm.distance(k, j) + 1e-12);
        }
    }

    #[test]
    fn two_blocks_split_into_two_clusters() {
        let (d, p) = block_distances(&[20, 20], 0.1, 0.9);
        let part = partition(&d, p);
        assert_eq!(part.kappa, 2);
        for i in 0..20 {
            assert_eq!(part.labels[i], part.labels[0]);
        }
        for i in 20..40 {
            assert_eq!(part.labels[i], part.labels[20]);
        }
        assert_ne!(part.labels[0], part.labels[20]);
        // exhaustive check: every within pair closer than every between pair
        for i in 0..p {
            for j in 0..p {
                if i != j && part.labels[i] == part.labels[j] {
                    assert!(d[i * p + j] < 0.5);
                }
            }
        }
    }

    #[test]
    fn equal_distances_collapse_to_one_cluster() {
        let p = 30;
        let mut d = vec![0.6; p * p];
        for i in 0..p {
            d[i * p + i] = 0.0;
        }
        let part = partition(&d, p);
        assert_eq!(part.kappa, 1);
    }

    #[test]
    fn small_block_is_folded_into_nearest_large_block() {
        // blocks of 30/30/2; the small block sits nearer to the second block
        let (mut d, p) = block_distances(&[30, 30, 2], 0.1, 0.9);
        for i in 30..60 {
            for j in 60..62 {
                d[i * p + j] = 0.7;
                d[j * p + i] = 0.7;
            }
        }
        let part = partition(&d, p);
        assert_eq!(part.kappa, 2);
        assert_eq!(part.labels[60], part.labels[30]);
        assert_eq!(part.labels[61], part.labels[30]);
        assert_ne!(part.labels[60], part.labels[0]);
    }

    #[test]
    fn partition_is_permutation_invariant_up_to_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = 24;
        // noisy two-block distances so there are no exact ties
        let (mut d, _) = block_distances(&[12, 12], 0.2, 0.8);
        for i in 0..p {
            for j in (i + 1)..p {
                let eps = rng.gen_range(-0.05..0.05);
                d[i * p + j] += eps;
                d[j * p + i] += eps;
            }
        }
        let base = partition(&d, p);
        let mut perm: Vec<usize> = (0..p).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut rng);
        // permuted[i][j] = d[perm[i]][perm[j]]
        let mut pd = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                pd[i * p + j] = d[perm[i] * p + perm[j]];
            }
        }
        let permuted = partition(&pd, p);
        assert_eq!(permuted.kappa, base.kappa);
        for i in 0..p {
            for j in 0..p {
                assert_eq!(
                    permuted.labels[i] == permuted.labels[j],
                    base.labels[perm[i]] == base.labels[perm[j]]
                );
            }
        }
    }

    #[test]
    fn every_cluster_is_large_or_kappa_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..20 {
            let p = rng.gen_range(21..60);
            let mut d = vec![0.0; p * p];
            for i in 0..p {
                for j in (i + 1)..p {
                    let v = rng.gen_range(0.05..1.0);
                    d[i * p + j] = v;
                    d[j * p + i] = v;
                }
            }
            let part = partition(&d, p);
            let threshold = super::large_threshold(p);
            if part.kappa > 1 {
                let mut sizes = vec![0usize; part.kappa];
                for &l in &part.labels {
                    sizes[l] += 1;
                }
                for s in sizes {
                    assert!(s >= threshold, "trial {trial}: cluster of size {s}");
                }
            }
            assert!(part.kappa <= 20);
        }
    }
}
