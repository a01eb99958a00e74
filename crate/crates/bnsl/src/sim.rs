//! Bayesian network representation, network tiling, forward sampling, and
//! state merging for benchmark generation.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::graph::Pdag;

/// Conditional probability table of one node. Rows are indexed by the parent
/// configuration in mixed radix with the last parent varying fastest; row
/// entries are the child state probabilities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cpt {
    pub parents: Vec<usize>,
    pub table: Vec<Vec<f64>>,
}

/// A DAG with one multinomial CPT per node.
#[derive(Debug, Clone)]
pub struct BayesNet {
    pub dag: Pdag,
    pub cards: Vec<u32>,
    pub cpts: Vec<Cpt>,
    pub name: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct BayesNetJson {
    #[serde(default)]
    name: Option<String>,
    cards: Vec<u32>,
    edges: Vec<(usize, usize)>,
    cpts: Vec<Cpt>,
}

impl BayesNet {
    pub fn new(dag: Pdag, cards: Vec<u32>, cpts: Vec<Cpt>) -> Self {
        let bn = BayesNet {
            dag,
            cards,
            cpts,
            name: None,
        };
        bn.validate();
        bn
    }

    pub fn p(&self) -> usize {
        self.dag.node_count()
    }

    fn validate(&self) {
        assert!(self.dag.is_dag(), "structure must be a DAG");
        assert_eq!(self.cards.len(), self.p());
        assert_eq!(self.cpts.len(), self.p());
        for v in 0..self.p() {
            let cpt = &self.cpts[v];
            assert_eq!(cpt.parents, self.dag.parents(v), "node {v} parent order");
            let q: usize = cpt
                .parents
                .iter()
                .map(|&u| self.cards[u] as usize)
                .product();
            assert_eq!(cpt.table.len(), q, "node {v} row count");
            for row in &cpt.table {
                assert_eq!(row.len(), self.cards[v] as usize);
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() <= 1e-12, "node {v} CPT row sums to {sum}");
            }
        }
    }

    /// Number of free parameters: `sum (r_i - 1) q_i`.
    pub fn param_count(&self) -> u64 {
        (0..self.p())
            .map(|v| {
                let q: u64 = self.cpts[v]
                    .parents
                    .iter()
                    .map(|&u| self.cards[u] as u64)
                    .product();
                (self.cards[v] as u64 - 1) * q
            })
            .sum()
    }

    fn row_index(&self, v: usize, values: &[u32]) -> usize {
        let mut idx = 0usize;
        for &u in &self.cpts[v].parents {
            idx = idx * self.cards[u] as usize + values[u] as usize;
        }
        idx
    }

    /// Probability of a full joint configuration.
    pub fn joint_probability(&self, values: &[u32]) -> f64 {
        let mut prob = 1.0;
        for v in 0..self.p() {
            let row = &self.cpts[v].table[self.row_index(v, values)];
            prob *= row[values[v] as usize];
        }
        prob
    }

    /// i.i.d. forward samples in topological order. Each row draws from its
    /// own derived RNG stream, so the result does not depend on how rows are
    /// scheduled.
    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        assert!(n >= 1);
        let order = self
            .dag
            .directed_topological_order()
            .expect("validated DAG");
        let p = self.p();
        let mut columns = vec![vec![0u32; n]; p];
        let mut values = vec![0u32; p];
        for row in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(row as u64);
            for &v in &order {
                let cpt_row = &self.cpts[v].table[self.row_index(v, &values)];
                let u: f64 = rng.gen();
                let mut cum = 0.0;
                let mut drawn = self.cards[v] - 1;
                for (state, &prob) in cpt_row.iter().enumerate() {
                    cum += prob;
                    if u < cum {
                        drawn = state as u32;
                        break;
                    }
                }
                values[v] = drawn;
            }
            for v in 0..p {
                columns[v][row] = values[v];
            }
        }
        let mut data = Dataset::from_columns(columns, self.cards.clone())
            .expect("sampled data is well-formed");
        if let Some(name) = &self.name {
            data.set_names((0..p).map(|v| format!("{name}_{v}")).collect());
        }
        data
    }

    /// Exact marginal distribution of `v` by enumerating its ancestral
    /// configurations when small enough, otherwise a seeded sampling
    /// estimate.
    pub fn marginal(&self, v: usize) -> Vec<f64> {
        let mut ancestral = vec![false; self.p()];
        ancestral[v] = true;
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for par in self.dag.parents(u) {
                if !ancestral[par] {
                    ancestral[par] = true;
                    stack.push(par);
                }
            }
        }
        let nodes: Vec<usize> = self
            .dag
            .directed_topological_order()
            .unwrap()
            .into_iter()
            .filter(|&u| ancestral[u])
            .collect();
        let space: u128 = nodes.iter().map(|&u| self.cards[u] as u128).product();
        let r = self.cards[v] as usize;
        if space <= 1_000_000 {
            let mut out = vec![0.0; r];
            let mut values = vec![0u32; self.p()];
            let mut config = vec![0u32; nodes.len()];
            loop {
                for (pos, &u) in nodes.iter().enumerate() {
                    values[u] = config[pos];
                }
                let mut prob = 1.0;
                for &u in &nodes {
                    let row = &self.cpts[u].table[self.row_index(u, &values)];
                    prob *= row[values[u] as usize];
                }
                out[values[v] as usize] += prob;
                // mixed-radix increment
                let mut pos = nodes.len();
                loop {
                    if pos == 0 {
                        return out;
                    }
                    pos -= 1;
                    config[pos] += 1;
                    if config[pos] < self.cards[nodes[pos]] {
                        break;
                    }
                    config[pos] = 0;
                }
            }
        } else {
            let n = 100_000;
            let data = self.sample(n, 0x6d61_7267 ^ v as u64);
            let mut out = vec![0.0; r];
            for &x in data.column(v) {
                out[x as usize] += 1.0 / n as f64;
            }
            out
        }
    }

    /// Relabels nodes: node `v` becomes `perm[v]`, with CPT rows re-indexed
    /// to the new ascending parent order.
    pub fn relabel(&self, perm: &[usize]) -> BayesNet {
        assert_eq!(perm.len(), self.p());
        let dag = self.dag.relabel(perm);
        let mut cards = vec![0u32; self.p()];
        let mut cpts = vec![
            Cpt {
                parents: vec![],
                table: vec![],
            };
            self.p()
        ];
        for v in 0..self.p() {
            cards[perm[v]] = self.cards[v];
            let old_parents = &self.cpts[v].parents;
            let mut new_parents: Vec<usize> = old_parents.iter().map(|&u| perm[u]).collect();
            new_parents.sort_unstable();
            let old_dims: Vec<u32> = old_parents.iter().map(|&u| self.cards[u]).collect();
            let q: usize = old_dims.iter().map(|&d| d as usize).product();
            let mut table = vec![Vec::new(); q];
            let mut config = vec![0u32; old_parents.len()];
            for (row_idx, row) in self.cpts[v].table.iter().enumerate() {
                let mut rem = row_idx;
                for pos in (0..old_parents.len()).rev() {
                    config[pos] = (rem % old_dims[pos] as usize) as u32;
                    rem /= old_dims[pos] as usize;
                }
                let mut new_idx = 0usize;
                for &np in &new_parents {
                    let old_pos = old_parents
                        .iter()
                        .position(|&u| perm[u] == np)
                        .expect("parent present");
                    new_idx = new_idx * old_dims[old_pos] as usize + config[old_pos] as usize;
                }
                table[new_idx] = row.clone();
            }
            cpts[perm[v]] = Cpt {
                parents: new_parents,
                table,
            };
        }
        let mut out = BayesNet::new(dag, cards, cpts);
        out.name = self.name.clone();
        out
    }

    pub fn to_json_string(&self) -> String {
        let json = BayesNetJson {
            name: self.name.clone(),
            cards: self.cards.clone(),
            edges: self.dag.directed_edges(),
            cpts: self.cpts.clone(),
        };
        serde_json::to_string_pretty(&json).expect("serializable")
    }

    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        let json: BayesNetJson = serde_json::from_str(text)?;
        let p = json.cards.len();
        let mut dag = Pdag::new(p);
        for (a, b) in json.edges {
            dag.add_directed(a, b);
        }
        let mut bn = BayesNet::new(dag, json.cards, json.cpts);
        bn.name = json.name;
        Ok(bn)
    }

    /// Ships-with-the-crate example networks: `asia` (8 nodes), `cancer`
    /// (5 nodes), and `rand10` (10 nodes).
    pub fn fixture(name: &str) -> Option<BayesNet> {
        let text = match name {
            "asia" => include_str!("../fixtures/asia.json"),
            "cancer" => include_str!("../fixtures/cancer.json"),
            "rand10" => include_str!("../fixtures/rand10.json"),
            _ => return None,
        };
        Some(Self::from_json_str(text).expect("fixture parses"))
    }
}

/// Random DAG: node order shuffled, then each upper pair in that order holds
/// an edge with probability `edge_prob`.
pub fn random_dag(p: usize, edge_prob: f64, seed: u64) -> Pdag {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    let mut dag = Pdag::new(p);
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.gen_bool(edge_prob) {
                dag.add_directed(order[i], order[j]);
            }
        }
    }
    dag
}

/// Gamma(shape, 1) sample; Marsaglia-Tsang with the shape < 1 boost.
fn gamma_sample<R: RngCore>(rng: &mut R, shape: f64) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        return gamma_sample(rng, shape + 1.0) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        // normal via Box-Muller
        let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.gen();
        let x = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        let v = (1.0 + c * x).powi(3);
        if v <= 0.0 {
            continue;
        }
        let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            return d * v;
        }
    }
}

/// Symmetric Dirichlet draw of the given length.
fn dirichlet_row<R: RngCore>(rng: &mut R, len: usize, alpha: f64) -> Vec<f64> {
    let mut row: Vec<f64> = (0..len).map(|_| gamma_sample(rng, alpha)).collect();
    let sum: f64 = row.iter().sum();
    if sum <= 0.0 {
        return vec![1.0 / len as f64; len];
    }
    for v in &mut row {
        *v /= sum;
    }
    row
}

/// A CPT row that keeps every stratum populated: no state hogs more than
/// 0.9 of the mass.
fn bounded_row<R: RngCore>(rng: &mut R, len: usize) -> Vec<f64> {
    loop {
        let row = dirichlet_row(rng, len, 1.0);
        if row.iter().all(|&x| x <= 0.9) {
            return row;
        }
    }
}

/// Total-variation distance between the child distributions obtained by
/// fixing parent `pos` to each of its values (averaging over the other
/// parent configurations); the smallest pairwise gap is the parent's effect.
fn parent_effect(table: &[Vec<f64>], dims: &[u32], pos: usize, child_card: usize) -> f64 {
    let groups = dims[pos] as usize;
    let mut means = vec![vec![0.0; child_card]; groups];
    let mut counts = vec![0usize; groups];
    for (row_idx, row) in table.iter().enumerate() {
        let mut rem = row_idx;
        let mut value = 0usize;
        for p in (0..dims.len()).rev() {
            let d = dims[p] as usize;
            if p == pos {
                value = rem % d;
            }
            rem /= d;
        }
        counts[value] += 1;
        for (s, &x) in row.iter().enumerate() {
            means[value][s] += x;
        }
    }
    for (mean, &count) in means.iter_mut().zip(counts.iter()) {
        for x in mean.iter_mut() {
            *x /= count as f64;
        }
    }
    let mut min_gap = f64::INFINITY;
    for a in 0..groups {
        for b in (a + 1)..groups {
            let tv: f64 = means[a]
                .iter()
                .zip(means[b].iter())
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>()
                / 2.0;
            min_gap = min_gap.min(tv);
        }
    }
    min_gap
}

fn cpts_for_dag<R: RngCore>(dag: &Pdag, cards: &[u32], rng: &mut R) -> Vec<Cpt> {
    const MIN_EFFECT: f64 = 0.15;
    (0..dag.node_count())
        .map(|v| {
            let parents = dag.parents(v);
            let dims: Vec<u32> = parents.iter().map(|&u| cards[u]).collect();
            let q: usize = dims.iter().map(|&d| d as usize).product();
            let mut table = Vec::new();
            for attempt in 0..100 {
                table = (0..q)
                    .map(|_| bounded_row(rng, cards[v] as usize))
                    .collect();
                let detectable = (0..parents.len())
                    .all(|pos| parent_effect(&table, &dims, pos, cards[v] as usize) >= MIN_EFFECT);
                if detectable || attempt == 99 {
                    break;
                }
            }
            Cpt { parents, table }
        })
        .collect()
}

/// Random discrete Bayesian network for benchmarks. CPT rows are uniform
/// Dirichlet draws, redrawn until every parent shifts its child distribution
/// by a detectable margin and no stratum is starved, so sampled data at
/// moderate n carries the structure.
pub fn random_bn(p: usize, edge_prob: f64, max_card: u32, seed: u64) -> BayesNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(1));
    let dag = random_dag(p, edge_prob, seed);
    let cards: Vec<u32> = (0..p).map(|_| rng.gen_range(2..=max_card)).collect();
    let cpts = cpts_for_dag(&dag, &cards, &mut rng);
    BayesNet::new(dag, cards, cpts)
}

/// Tiles `copies` disjoint copies of `base`, then interconnects each minimal
/// node of every non-first copy with parents drawn uniformly from earlier
/// copies. The number of added parents follows the empirical in-degree law
/// of the pre-tiling node set, capped at `min(max in-degree, 4)`; nodes that
/// gain parents get fresh Dirichlet(1) CPT rows.
pub fn tile(base: &BayesNet, copies: usize, seed: u64) -> BayesNet {
    assert!(copies >= 1);
    if copies == 1 {
        return base.clone();
    }
    let p0 = base.p();
    let p = p0 * copies;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // empirical in-degree law over the base nodes
    let indegrees: Vec<usize> = (0..p0).map(|v| base.dag.parents(v).len()).collect();
    let d_max = indegrees.iter().copied().max().unwrap_or(0).min(4);
    let mut law = vec![0.0; d_max + 1];
    for &d in &indegrees {
        if d <= d_max {
            law[d] += 1.0 / p0 as f64;
        }
    }
    let mass: f64 = law.iter().sum();
    for w in &mut law {
        *w /= mass;
    }

    let mut dag = Pdag::new(p);
    let mut cards = Vec::with_capacity(p);
    for copy in 0..copies {
        let offset = copy * p0;
        for (a, b) in base.dag.directed_edges() {
            dag.add_directed(offset + a, offset + b);
        }
        cards.extend_from_slice(&base.cards);
    }

    let mut reparented: Vec<Vec<usize>> = vec![Vec::new(); p];
    for copy in 1..copies {
        let offset = copy * p0;
        for v in 0..p0 {
            if indegrees[v] != 0 {
                continue;
            }
            let node = offset + v;
            let u: f64 = rng.gen();
            let mut cum = 0.0;
            let mut e = 0usize;
            for (a, &w) in law.iter().enumerate() {
                cum += w;
                if u < cum {
                    e = a;
                    break;
                }
            }
            if e == 0 {
                continue;
            }
            let pool: Vec<usize> = (0..offset).collect();
            let chosen: Vec<usize> = pool
                .choose_multiple(&mut rng, e.min(pool.len()))
                .copied()
                .collect();
            let mut chosen = chosen;
            chosen.sort_unstable();
            for &parent in &chosen {
                dag.add_directed(parent, node);
            }
            reparented[node] = chosen;
        }
    }

    let mut cpts = Vec::with_capacity(p);
    for copy in 0..copies {
        let offset = copy * p0;
        for v in 0..p0 {
            let node = offset + v;
            if reparented[node].is_empty() {
                let mut cpt = base.cpts[v].clone();
                cpt.parents = cpt.parents.iter().map(|&u| offset + u).collect();
                cpts.push(cpt);
            } else {
                let parents = dag.parents(node);
                let q: usize = parents.iter().map(|&u| cards[u] as usize).product();
                let table = (0..q)
                    .map(|_| dirichlet_row(&mut rng, cards[node] as usize, 1.0))
                    .collect();
                cpts.push(Cpt { parents, table });
            }
        }
    }
    let mut bn = BayesNet::new(dag, cards, cpts);
    bn.name = base.name.as_ref().map(|n| format!("{n}x{copies}"));
    bn
}

/// Caps every variable at `max_levels` states by randomly merging state
/// pairs. Merged states sum within the variable's own CPT rows; children of
/// a merged parent average the affected rows, weighted by the merged states'
/// marginal probabilities.
pub fn merge_states(bn: &BayesNet, max_levels: u32, seed: u64) -> BayesNet {
    let mut out = bn.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in 0..out.p() {
        while out.cards[v] > max_levels {
            let r = out.cards[v];
            let a = rng.gen_range(0..r);
            let b = {
                let mut b = rng.gen_range(0..r - 1);
                if b >= a {
                    b += 1;
                }
                b
            };
            let (a, b) = (a.min(b), a.max(b));
            out = merge_one_state_pair(&out, v, a, b);
        }
    }
    out
}

fn merge_one_state_pair(bn: &BayesNet, v: usize, a: u32, b: u32) -> BayesNet {
    debug_assert!(a < b && b < bn.cards[v]);
    let marginal = bn.marginal(v);
    let (wa, wb) = (marginal[a as usize], marginal[b as usize]);
    let (wa, wb) = if wa + wb > 0.0 {
        (wa / (wa + wb), wb / (wa + wb))
    } else {
        (0.5, 0.5)
    };
    // old state -> new state indices: b folds into a, higher states shift
    let remap = |x: u32| -> u32 {
        if x == b {
            a
        } else if x > b {
            x - 1
        } else {
            x
        }
    };

    let mut cards = bn.cards.clone();
    cards[v] -= 1;
    let mut cpts = Vec::with_capacity(bn.p());
    for node in 0..bn.p() {
        let cpt = &bn.cpts[node];
        if node == v {
            // as child: merged-state probabilities add within each row
            let table = cpt
                .table
                .iter()
                .map(|row| {
                    let mut new_row = vec![0.0; cards[v] as usize];
                    for (state, &prob) in row.iter().enumerate() {
                        new_row[remap(state as u32) as usize] += prob;
                    }
                    new_row
                })
                .collect();
            cpts.push(Cpt {
                parents: cpt.parents.clone(),
                table,
            });
        } else if cpt.parents.contains(&v) {
            // as parent: rows for the merged states average, weighted by the
            // merged states' marginals, then renormalize
            let old_dims: Vec<u32> = cpt.parents.iter().map(|&u| bn.cards[u]).collect();
            let new_dims: Vec<u32> = cpt.parents.iter().map(|&u| cards[u]).collect();
            let new_q: usize = new_dims.iter().map(|&d| d as usize).product();
            let vpos = cpt.parents.iter().position(|&u| u == v).unwrap();
            let width = bn.cards[node] as usize;
            let mut table = vec![vec![0.0; width]; new_q];
            let mut config = vec![0u32; cpt.parents.len()];
            for (row_idx, row) in cpt.table.iter().enumerate() {
                let mut rem = row_idx;
                for pos in (0..old_dims.len()).rev() {
                    config[pos] = (rem % old_dims[pos] as usize) as u32;
                    rem /= old_dims[pos] as usize;
                }
                let weight = if config[vpos] == a {
                    wa
                } else if config[vpos] == b {
                    wb
                } else {
                    1.0
                };
                config[vpos] = remap(config[vpos]);
                let mut new_idx = 0usize;
                for (pos, &d) in new_dims.iter().enumerate() {
                    new_idx = new_idx * d as usize + config[pos] as usize;
                }
                for (s, &prob) in row.iter().enumerate() {
                    table[new_idx][s] += weight * prob;
                }
                // restore config[vpos] not needed; recomputed next iteration
            }
            for row in &mut table {
                let sum: f64 = row.iter().sum();
                if sum > 0.0 {
                    for x in row.iter_mut() {
                        *x /= sum;
                    }
                }
            }
            cpts.push(Cpt {
                parents: cpt.parents.clone(),
                table,
            });
        } else {
            cpts.push(cpt.clone());
        }
    }
    let mut out = BayesNet::new(bn.dag.clone(), cards, cpts);
    out.name = bn.name.clone();
    out
}
