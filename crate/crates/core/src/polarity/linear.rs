//! Multinomial logistic regression, the baseline polarity classifier.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::softmax;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            epochs: 50,
            learning_rate: 0.1,
            l2: 1e-4,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// One weight row per class.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(n_features: usize, n_classes: usize) -> Self {
        LinearModel {
            weights: vec![vec![0.0; n_features]; n_classes],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.margins(x))
    }

    /// Plain SGD on weighted cross-entropy, one shuffled pass per epoch.
    pub fn fit(
        xs: &[Vec<f64>],
        ys: &[usize],
        row_weights: &[f64],
        n_classes: usize,
        config: &LinearConfig,
    ) -> Self {
        let n_features = xs.first().map_or(0, Vec::len);
        let mut model = LinearModel::zeros(n_features, n_classes);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..xs.len()).collect();
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let lr = config.learning_rate / (1.0 + epoch as f64 * 0.1);
            for &i in &order {
                let p = model.predict_proba(&xs[i]);
                for k in 0..n_classes {
                    let g = row_weights[i] * (p[k] - if ys[i] == k { 1.0 } else { 0.0 });
                    let row = &mut model.weights[k];
                    for (w, x) in row.iter_mut().zip(&xs[i]) {
                        *w -= lr * (g * x + config.l2 * *w);
                    }
                    model.bias[k] -= lr * g;
                }
            }
        }
        model
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_is_uniform() {
        let p = LinearModel::zeros(4, 3).predict_proba(&[1.0, -2.0, 3.0, 0.5]);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn learns_two_clusters() {
        let xs: Vec<Vec<f64>> = (0..40)
            .map(|i| if i % 2 == 0 { vec![1.0, 0.1 * (i % 5) as f64] } else { vec![-1.0, 0.1 * (i % 7) as f64] })
            .collect();
        let ys: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let m = LinearModel::fit(&xs, &ys, &[1.0; 40], 3, &LinearConfig::default());
        for (x, &y) in xs.iter().zip(&ys) {
            let p = m.predict_proba(x);
            assert!(p[y] > 0.5, "{p:?}");
        }
    }
}
