//! Statistical evaluations: empirical entropy and mutual information, the
//! G-squared conditional independence test, and the decomposed penalized
//! log-likelihood (BIC) family score with memoization.
//!
//! All logarithms are natural, which makes the identity
//! `G2_ij = 2n * I(X_i, X_j)` exact and ties the statistic to its chi-square
//! reference distribution. Zero counts contribute nothing to any sum.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use serde::Serialize;

use crate::data::Dataset;
use crate::error::DataError;
use crate::graph::Pdag;

/// Result of a single G-squared test.
#[derive(Debug, Clone, Copy)]
pub struct CiTestResult {
    pub statistic: f64,
    pub df: u64,
    pub p_value: f64,
}

/// Upper-tail probability of a chi-square distribution with `df` degrees of
/// freedom, via the regularized upper incomplete gamma function.
pub fn chi_square_upper_tail(df: u64, x: f64) -> f64 {
    debug_assert!(df >= 1);
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(df as f64 / 2.0, x / 2.0)
}

/// Empirical marginal entropy of variable `i`, in nats.
pub fn entropy(data: &Dataset, i: usize) -> f64 {
    let n = data.n() as f64;
    let table = data
        .count(&[i])
        .expect("single-variable table is within any budget");
    let mut h = 0.0;
    for &c in table.cells() {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.ln();
        }
    }
    h
}

/// Empirical mutual information between distinct variables `i` and `j`.
pub fn mutual_information(data: &Dataset, i: usize, j: usize) -> f64 {
    assert_ne!(i, j, "use entropy for I(X, X)");
    let n = data.n() as f64;
    let joint = data.count(&[i, j]).expect("pairwise table within budget");
    let ri = data.cardinality(i) as usize;
    let rj = data.cardinality(j) as usize;
    let mut row = vec![0u64; ri];
    let mut col = vec![0u64; rj];
    for a in 0..ri {
        for b in 0..rj {
            let c = joint.cells()[a * rj + b];
            row[a] += c;
            col[b] += c;
        }
    }
    let mut mi = 0.0;
    for a in 0..ri {
        for b in 0..rj {
            let c = joint.cells()[a * rj + b];
            if c > 0 {
                let f = c as f64;
                mi += (f / n) * ((f * n) / (row[a] as f64 * col[b] as f64)).ln();
            }
        }
    }
    mi
}

/// Joint entropy of a variable pair; used by the clustering distance.
pub fn joint_entropy(data: &Dataset, i: usize, j: usize) -> f64 {
    entropy(data, i) + entropy(data, j) - mutual_information(data, i, j)
}

/// G-squared log-likelihood ratio test of `X_i` independent of `X_j` given
/// `cond`. Degrees of freedom are `(r_i - 1)(r_j - 1) * prod r_k` with no
/// adjustment for empty conditioning strata.
pub fn g_squared(
    data: &Dataset,
    i: usize,
    j: usize,
    cond: &[usize],
    counter: &CallCounter,
) -> Result<CiTestResult, DataError> {
    assert!(
        !cond.contains(&i) && !cond.contains(&j) && i != j,
        "i, j, cond must be disjoint"
    );
    let mut vars = Vec::with_capacity(cond.len() + 2);
    vars.push(i);
    vars.push(j);
    vars.extend_from_slice(cond);
    let joint = data.count(&vars)?;

    let ri = data.cardinality(i) as usize;
    let rj = data.cardinality(j) as usize;
    let strata: usize = cond
        .iter()
        .map(|&k| data.cardinality(k) as usize)
        .product::<usize>()
        .max(1);

    // Layout of `joint` is row-major over (i, j, cond...): for stratum s the
    // cell (a, b) sits at ((a * rj) + b) * strata + s.
    let cells = joint.cells();
    let mut n_ik = vec![0u64; ri * strata];
    let mut n_jk = vec![0u64; rj * strata];
    let mut n_k = vec![0u64; strata];
    for a in 0..ri {
        for b in 0..rj {
            let base = (a * rj + b) * strata;
            for s in 0..strata {
                let c = cells[base + s];
                if c > 0 {
                    n_ik[a * strata + s] += c;
                    n_jk[b * strata + s] += c;
                    n_k[s] += c;
                }
            }
        }
    }
    let mut stat = 0.0;
    for a in 0..ri {
        for b in 0..rj {
            let base = (a * rj + b) * strata;
            for s in 0..strata {
                let c = cells[base + s];
                if c > 0 {
                    let num = c as f64 * n_k[s] as f64;
                    let den = n_ik[a * strata + s] as f64 * n_jk[b * strata + s] as f64;
                    stat += c as f64 * (num / den).ln();
                }
            }
        }
    }
    stat = (2.0 * stat).max(0.0);

    let df = ((ri - 1) * (rj - 1) * strata) as u64;
    let p_value = chi_square_upper_tail(df, stat);
    counter.ci_tests.fetch_add(1, Ordering::Relaxed);
    Ok(CiTestResult {
        statistic: stat,
        df,
        p_value,
    })
}

/// BIC penalty weight, `log(n) / 2`.
pub fn bic_lambda(data: &Dataset) -> f64 {
    (data.n() as f64).ln() / 2.0
}

/// Smallest score difference treated as a real improvement by the greedy
/// procedures. Score-equivalent moves (say, reversing a covered edge) have
/// mathematically zero deltas that float arithmetic renders as ~1e-11 noise;
/// anything below this margin must not count as progress or greedy loops
/// would chase the noise forever.
pub const SCORE_IMPROVEMENT_EPS: f64 = 1e-6;

/// Memoized decomposed family scores keyed by (child, sorted parent set).
#[derive(Debug, Default)]
pub struct ScoreCache {
    entries: RwLock<HashMap<(usize, Vec<usize>), f64>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl ScoreCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Monotone counters for the statistical calls performed during a run.
#[derive(Debug, Default)]
pub struct CallCounter {
    ci_tests: AtomicU64,
    score_calls: AtomicU64,
    mi_entropy_calls: AtomicU64,
}

/// Plain snapshot of a [`CallCounter`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CallCounts {
    pub ci_tests: u64,
    pub score_calls: u64,
    pub mi_entropy_calls: u64,
}

impl CallCounts {
    pub fn total(&self) -> u64 {
        self.ci_tests + self.score_calls + self.mi_entropy_calls
    }
}

impl CallCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> CallCounts {
        CallCounts {
            ci_tests: self.ci_tests.load(Ordering::Relaxed),
            score_calls: self.score_calls.load(Ordering::Relaxed),
            mi_entropy_calls: self.mi_entropy_calls.load(Ordering::Relaxed),
        }
    }

    pub(crate) fn add_mi_entropy(&self, k: u64) {
        self.mi_entropy_calls.fetch_add(k, Ordering::Relaxed);
    }

    pub(crate) fn add_ci_test(&self) {
        self.ci_tests.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn add_score_call(&self) {
        self.score_calls.fetch_add(1, Ordering::Relaxed);
    }
}

/// Penalized multinomial log-likelihood of `X_i` given `parents`:
/// `sum n[x_i, pa] log(n[x_i, pa] / n[pa]) - lambda (r_i - 1) q_i`.
///
/// A table over the family that exceeds the cell budget scores negative
/// infinity, so over-large families lose every greedy comparison instead of
/// aborting the search. Cached values are returned without recounting; the
/// score-call counter moves only on cache misses.
pub fn family_score(
    data: &Dataset,
    i: usize,
    parents: &[usize],
    lambda: f64,
    cache: &ScoreCache,
    counter: &CallCounter,
) -> f64 {
    debug_assert!(!parents.contains(&i));
    let mut sorted: Vec<usize> = parents.to_vec();
    sorted.sort_unstable();
    let key = (i, sorted);
    if let Some(&v) = cache.entries.read().unwrap().get(&key) {
        cache.hits.fetch_add(1, Ordering::Relaxed);
        return v;
    }
    cache.misses.fetch_add(1, Ordering::Relaxed);
    counter.score_calls.fetch_add(1, Ordering::Relaxed);

    let value = family_score_uncached(data, i, &key.1, lambda);
    cache.entries.write().unwrap().insert(key, value);
    value
}

fn family_score_uncached(data: &Dataset, i: usize, parents: &[usize], lambda: f64) -> f64 {
    let ri = data.cardinality(i) as usize;
    let qi: f64 = parents
        .iter()
        .map(|&k| data.cardinality(k) as f64)
        .product();
    let penalty = lambda * (ri as f64 - 1.0) * qi;

    let mut vars = Vec::with_capacity(parents.len() + 1);
    vars.push(i);
    vars.extend_from_slice(parents);
    let joint = match data.count(&vars) {
        Ok(t) => t,
        Err(_) => return f64::NEG_INFINITY,
    };
    let strata: usize = parents
        .iter()
        .map(|&k| data.cardinality(k) as usize)
        .product::<usize>()
        .max(1);
    let cells = joint.cells();
    let mut n_pa = vec![0u64; strata];
    for a in 0..ri {
        for s in 0..strata {
            n_pa[s] += cells[a * strata + s];
        }
    }
    let mut ll = 0.0;
    for a in 0..ri {
        for s in 0..strata {
            let c = cells[a * strata + s];
            if c > 0 {
                ll += c as f64 * (c as f64 / n_pa[s] as f64).ln();
            }
        }
    }
    ll - penalty
}

/// Sum of family scores over a fully directed acyclic graph.
pub fn graph_score(
    data: &Dataset,
    dag: &Pdag,
    lambda: f64,
    cache: &ScoreCache,
    counter: &CallCounter,
) -> Result<f64, crate::error::GraphError> {
    if !dag.is_dag() {
        return Err(crate::error::GraphError::NotADag);
    }
    let mut total = 0.0;
    for i in 0..dag.node_count() {
        let parents = dag.parents(i);
        total += family_score(data, i, &parents, lambda, cache, counter);
    }
    Ok(total)
}
