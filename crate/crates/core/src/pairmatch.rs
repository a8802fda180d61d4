//! Bipartite aspect–opinion graph with similarity-weighted edges, and the
//! matchers that select pairs from it.
//!
//! Edge weight between aspect `a` and opinion `o`:
//!
//! ```text
//! w(a, o) = α · (cos(a, o) + 1) / 2  +  β · exp(−gap(a, o) / d₀)
//! ```
//!
//! where `gap` counts the tokens strictly between the two spans.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Scalar, Weight};
use crate::spanex::CandidateSpan;

/// Largest side for which [`match_weights`] runs the exact subset DP.
pub const EXACT_DP_LIMIT: usize = 12;

pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let dot = u.iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
    let nu = u.iter().fold(T::zero(), |acc, &a| acc + a * a).sqrt();
    let nv = v.iter().fold(T::zero(), |acc, &b| acc + b * b).sqrt();
    if nu == T::zero() || nv == T::zero() {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (nu * nv)).max(-T::one()).min(T::one()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cardinality {
    OneToOne,
    OneToMany,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct MatchPolicy<T> {
    /// Edges below this weight are never selected.
    pub tau_m: T,
    pub cardinality: Cardinality,
    /// Weight of the rescaled cosine term.
    pub alpha: T,
    /// Weight of the proximity term; `alpha + beta == 1`.
    pub beta: T,
    /// Token distance at which proximity decays by `1/e`.
    pub proximity_scale: T,
}

impl<T: Scalar> Default for MatchPolicy<T> {
    fn default() -> Self {
        MatchPolicy {
            tau_m: T::lit(0.4),
            cardinality: Cardinality::OneToOne,
            alpha: T::lit(0.7),
            beta: T::lit(0.3),
            proximity_scale: T::lit(5.0),
        }
    }
}

impl<T: Scalar> MatchPolicy<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: T| x >= T::zero() && x <= T::one();
        if !unit(self.tau_m) || !unit(self.alpha) || !unit(self.beta) {
            return Err(Error::Config("tau_m, alpha and beta must lie in [0, 1]".into()));
        }
        if (self.alpha + self.beta - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::Config(format!(
                "alpha + beta must equal 1, got {:?} + {:?}",
                self.alpha, self.beta
            )));
        }
        if self.proximity_scale < T::one() {
            return Err(Error::Config("proximity_scale must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mixes a cosine similarity and a token gap into an edge weight in `[0, 1]`.
pub fn edge_weight<T: Scalar>(cosine: T, gap: usize, policy: &MatchPolicy<T>) -> T {
    let two = T::one() + T::one();
    let similarity = (cosine + T::one()) / two;
    let gap = T::from_usize(gap).unwrap_or_else(T::max_value);
    let proximity = (-gap / policy.proximity_scale).exp();
    (policy.alpha * similarity + policy.beta * proximity)
        .max(T::zero())
        .min(T::one())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairGraph<T> {
    pub aspects: Vec<CandidateSpan>,
    pub opinions: Vec<CandidateSpan>,
    /// `weights[a][o]`, one row per aspect.
    pub weights: Vec<Vec<T>>,
}

impl<T: Scalar> PairGraph<T> {
    pub fn weight(&self, aspect: usize, opinion: usize) -> T {
        self.weights[aspect][opinion]
    }

    pub fn total_weight(&self, pairs: &[(usize, usize)]) -> T {
        pairs.iter().fold(T::zero(), |acc, &(a, o)| acc + self.weights[a][o])
    }
}

/// Builds the weighted graph from candidate spans and their pooled
/// embeddings. A zero pooled vector has no direction and contributes a
/// cosine of 0.
pub fn build_pair_graph<T: Scalar>(
    aspects: &[CandidateSpan],
    opinions: &[CandidateSpan],
    aspect_vectors: &[Vec<T>],
    opinion_vectors: &[Vec<T>],
    policy: &MatchPolicy<T>,
) -> Result<PairGraph<T>> {
    if aspect_vectors.len() != aspects.len() {
        return Err(Error::DimensionMismatch {
            expected: aspects.len(),
            actual: aspect_vectors.len(),
        });
    }
    if opinion_vectors.len() != opinions.len() {
        return Err(Error::DimensionMismatch {
            expected: opinions.len(),
            actual: opinion_vectors.len(),
        });
    }
    let dim = aspect_vectors.first().or(opinion_vectors.first()).map(Vec::len);
    if let Some(bad) = aspect_vectors
        .iter()
        .chain(opinion_vectors)
        .find(|v| Some(v.len()) != dim)
    {
        return Err(Error::DimensionMismatch {
            expected: dim.unwrap_or(0),
            actual: bad.len(),
        });
    }
    let mut weights = Vec::with_capacity(aspects.len());
    for (a, av) in aspects.iter().zip(aspect_vectors) {
        let mut row = Vec::with_capacity(opinions.len());
        for (o, ov) in opinions.iter().zip(opinion_vectors) {
            let cos = match cosine(av, ov) {
                Ok(c) => c,
                Err(Error::ZeroVector) => T::zero(),
                Err(e) => return Err(e),
            };
            row.push(edge_weight(cos, a.span.gap(&o.span), policy));
        }
        weights.push(row);
    }
    Ok(PairGraph {
        aspects: aspects.to_vec(),
        opinions: opinions.to_vec(),
        weights,
    })
}

/// Selects `(aspect, opinion)` pairs according to `policy.cardinality`.
pub fn match_pairs<T: Scalar>(graph: &PairGraph<T>, policy: &MatchPolicy<T>) -> Vec<(usize, usize)> {
    match_weights(&graph.weights, policy.tau_m, policy.cardinality)
}

/// Matching over a raw weight matrix (`weights[a][o]`).
///
/// `OneToOne` returns a maximum-total-weight matching using only edges with
/// weight `>= tau`. Among optimal matchings it prefers matching lower aspect
/// indices, each to the lowest opinion index possible. `OneToMany` attaches
/// each opinion to its best aspect (lowest index on ties) when that edge
/// reaches `tau`. Output is sorted by aspect, then opinion.
pub fn match_weights<W: Weight>(weights: &[Vec<W>], tau: W, cardinality: Cardinality) -> Vec<(usize, usize)> {
    let n_a = weights.len();
    let n_o = weights.first().map_or(0, Vec::len);
    if n_a == 0 || n_o == 0 {
        return Vec::new();
    }
    let mut pairs = match cardinality {
        Cardinality::OneToMany => (0..n_o)
            .filter_map(|o| {
                let best = (1..n_a).fold(0, |b, a| if weights[a][o] > weights[b][o] { a } else { b });
                (weights[best][o] >= tau).then_some((best, o))
            })
            .collect(),
        Cardinality::OneToOne => {
            if n_o <= EXACT_DP_LIMIT {
                subset_dp(weights, tau)
            } else if n_a <= EXACT_DP_LIMIT {
                let transposed: Vec<Vec<W>> =
                    (0..n_o).map(|o| (0..n_a).map(|a| weights[a][o]).collect()).collect();
                subset_dp(&transposed, tau).into_iter().map(|(o, a)| (a, o)).collect()
            } else {
                hungarian(weights, tau)
            }
        }
    };
    pairs.sort_unstable();
    pairs
}

fn bigger<W: Weight>(a: W, b: W) -> W {
    if b > a {
        b
    } else {
        a
    }
}

/// Exact maximum-weight matching, rows in order with a bitmask over columns.
fn subset_dp<W: Weight>(weights: &[Vec<W>], tau: W) -> Vec<(usize, usize)> {
    let rows = weights.len();
    let cols = weights[0].len();
    let states = 1usize << cols;
    // best[i][mask]: optimum using rows i.. with `mask` columns taken
    let mut best = vec![vec![W::zero(); states]; rows + 1];
    for i in (0..rows).rev() {
        for mask in 0..states {
            let mut value = best[i + 1][mask];
            for j in 0..cols {
                let bit = 1 << j;
                if mask & bit == 0 && weights[i][j] >= tau {
                    value = bigger(value, weights[i][j] + best[i + 1][mask | bit]);
                }
            }
            best[i][mask] = value;
        }
    }
    let mut pairs = Vec::new();
    let mut mask = 0usize;
    for i in 0..rows {
        let target = best[i][mask];
        let pick = (0..cols).find(|&j| {
            let bit = 1 << j;
            mask & bit == 0 && weights[i][j] >= tau && weights[i][j] + best[i + 1][mask | bit] == target
        });
        if let Some(j) = pick {
            pairs.push((i, j));
            mask |= 1 << j;
        }
    }
    pairs
}

fn less<W: Weight>(a: Option<W>, b: Option<W>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x < y,
        (Some(_), None) => true,
        _ => false,
    }
}

/// Kuhn–Munkres with potentials on the square padding of the matrix.
/// Ineligible and padding cells cost nothing, so the result maximizes total
/// eligible weight.
fn hungarian<W: Weight>(weights: &[Vec<W>], tau: W) -> Vec<(usize, usize)> {
    let n_a = weights.len();
    let n_o = weights[0].len();
    let n = n_a.max(n_o);
    let cost = |i: usize, j: usize| -> W {
        if i < n_a && j < n_o && weights[i][j] >= tau {
            W::zero() - weights[i][j]
        } else {
            W::zero()
        }
    };
    let mut u = vec![W::zero(); n + 1];
    let mut v = vec![W::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv: Vec<Option<W>> = vec![None; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta: Option<W> = None;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if less(Some(cur), minv[j]) {
                    minv[j] = Some(cur);
                    way[j] = j0;
                }
                if less(minv[j], delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            let delta = delta.expect("an unused column remains");
            for j in 0..=n {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else if let Some(m) = minv[j] {
                    minv[j] = Some(m - delta);
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n)
        .filter_map(|j| {
            let (a, o) = (p[j] - 1, j - 1);
            (a < n_a && o < n_o && weights[a][o] >= tau).then_some((a, o))
        })
        .collect()
}
