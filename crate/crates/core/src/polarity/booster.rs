//! Multi-class gradient-boosted decision trees.
//!
//! Softmax objective with second-order (Newton) leaf values and split gain
//!
//! ```text
//! gain = ½ · [ G_L²/(H_L+λ) + G_R²/(H_R+λ) − (G_L+G_R)²/(H_L+H_R+λ) ] − γ
//! ```
//!
//! Split search runs over per-feature quantile bins fixed at training time.
//! Each round grows one tree per class from the same margins.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::softmax;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoosterConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum gain for a split.
    pub gamma: f64,
    pub min_child_weight: f64,
    pub max_bins: usize,
    /// Row sampling rate per round; 1.0 disables sampling.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for BoosterConfig {
    fn default() -> Self {
        BoosterConfig {
            trees: 200,
            max_depth: 6,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1e-3,
            max_bins: 32,
            subsample: 1.0,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => idx = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    pub n_features: usize,
    pub n_classes: usize,
    /// `rounds[r][k]` is the class-`k` tree of round `r`.
    pub rounds: Vec<Vec<Tree>>,
}

impl Booster {
    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.n_classes];
        for round in &self.rounds {
            for (k, tree) in round.iter().enumerate() {
                m[k] += tree.predict(x);
            }
        }
        m
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.margins(x))
    }

    /// Fits on rows `xs` with class indices `ys` and per-row weights.
    pub fn fit(
        xs: &[Vec<f64>],
        ys: &[usize],
        row_weights: &[f64],
        n_classes: usize,
        config: &BoosterConfig,
    ) -> Booster {
        let n = xs.len();
        let n_features = xs.first().map_or(0, Vec::len);
        let bins = Binning::fit(xs, config.max_bins.clamp(2, 256));
        let binned = bins.apply(xs);

        let mut margins = vec![vec![0.0; n_classes]; n];
        let mut rounds = Vec::with_capacity(config.trees);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let all_rows: Vec<usize> = (0..n).collect();

        for _ in 0..config.trees {
            let rows: Vec<usize> = if config.subsample < 1.0 {
                let picked: Vec<usize> = (0..n).filter(|_| rng.gen::<f64>() < config.subsample).collect();
                if picked.is_empty() { all_rows.clone() } else { picked }
            } else {
                all_rows.clone()
            };
            let probs: Vec<Vec<f64>> = margins.iter().map(|m| softmax(m)).collect();
            let mut round = Vec::with_capacity(n_classes);
            for k in 0..n_classes {
                let mut grad = vec![0.0; n];
                let mut hess = vec![0.0; n];
                for &i in &rows {
                    let p = probs[i][k];
                    let y = if ys[i] == k { 1.0 } else { 0.0 };
                    grad[i] = row_weights[i] * (p - y);
                    hess[i] = (row_weights[i] * p * (1.0 - p)).max(1e-16);
                }
                let tree = TreeBuilder {
                    binned: &binned,
                    bins: &bins,
                    grad: &grad,
                    hess: &hess,
                    config,
                    n_features,
                }
                .build(rows.clone());
                round.push(tree);
            }
            for (i, m) in margins.iter_mut().enumerate() {
                for (k, tree) in round.iter().enumerate() {
                    m[k] += tree.predict(&xs[i]);
                }
            }
            rounds.push(round);
        }
        Booster {
            n_features,
            n_classes,
            rounds,
        }
    }
}

/// Per-feature cut points; bin `b` holds values in `(cuts[b-1], cuts[b]]`.
struct Binning {
    cuts: Vec<Vec<f64>>,
}

impl Binning {
    fn fit(xs: &[Vec<f64>], max_bins: usize) -> Self {
        let n_features = xs.first().map_or(0, Vec::len);
        let mut cuts = Vec::with_capacity(n_features);
        let mut column = Vec::with_capacity(xs.len());
        for f in 0..n_features {
            column.clear();
            column.extend(xs.iter().map(|x| x[f]));
            column.sort_by(f64::total_cmp);
            column.dedup();
            let feature_cuts: Vec<f64> = if column.len() <= max_bins {
                column.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
            } else {
                let mut c: Vec<f64> = (1..max_bins)
                    .map(|b| {
                        let pos = b * column.len() / max_bins;
                        0.5 * (column[pos - 1] + column[pos])
                    })
                    .collect();
                c.dedup();
                c
            };
            cuts.push(feature_cuts);
        }
        Binning { cuts }
    }

    fn bin(&self, feature: usize, x: f64) -> u8 {
        self.cuts[feature].partition_point(|&c| c < x) as u8
    }

    fn apply(&self, xs: &[Vec<f64>]) -> Vec<Vec<u8>> {
        xs.iter()
            .map(|x| x.iter().enumerate().map(|(f, &v)| self.bin(f, v)).collect())
            .collect()
    }
}

struct TreeBuilder<'a> {
    binned: &'a [Vec<u8>],
    bins: &'a Binning,
    grad: &'a [f64],
    hess: &'a [f64],
    config: &'a BoosterConfig,
    n_features: usize,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    bin: usize,
}

impl TreeBuilder<'_> {
    fn build(&self, rows: Vec<usize>) -> Tree {
        let mut nodes = Vec::new();
        self.grow(&mut nodes, rows, 0);
        Tree { nodes }
    }

    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        -self.config.learning_rate * g / (h + self.config.lambda)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.config.lambda)
    }

    fn grow(&self, nodes: &mut Vec<Node>, rows: Vec<usize>, depth: usize) -> usize {
        let idx = nodes.len();
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        nodes.push(Node::Leaf {
            value: self.leaf_value(g, h),
        });
        if depth >= self.config.max_depth || rows.len() < 2 {
            return idx;
        }
        let Some(best) = self.best_split(&rows, g, h) else {
            return idx;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| (self.binned[i][best.feature] as usize) <= best.bin);
        let left = self.grow(nodes, left_rows, depth + 1);
        let right = self.grow(nodes, right_rows, depth + 1);
        nodes[idx] = Node::Split {
            feature: best.feature,
            threshold: self.bins.cuts[best.feature][best.bin],
            left,
            right,
        };
        idx
    }

    fn best_split(&self, rows: &[usize], g: f64, h: f64) -> Option<BestSplit> {
        let parent = self.score(g, h);
        let mut best: Option<BestSplit> = None;
        let mut hist_g = [0.0f64; 256];
        let mut hist_h = [0.0f64; 256];
        for f in 0..self.n_features {
            let n_cuts = self.bins.cuts[f].len();
            if n_cuts == 0 {
                continue;
            }
            hist_g[..=n_cuts].fill(0.0);
            hist_h[..=n_cuts].fill(0.0);
            for &i in rows {
                let b = self.binned[i][f] as usize;
                hist_g[b] += self.grad[i];
                hist_h[b] += self.hess[i];
            }
            let (mut gl, mut hl) = (0.0, 0.0);
            for b in 0..n_cuts {
                gl += hist_g[b];
                hl += hist_h[b];
                let (gr, hr) = (g - gl, h - hl);
                if hl < self.config.min_child_weight || hr < self.config.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent) - self.config.gamma;
                if gain > 1e-12 && best.as_ref().is_none_or(|s| gain > s.gain) {
                    best = Some(BestSplit { gain, feature: f, bin: b });
                }
            }
        }
        best
    }
}
