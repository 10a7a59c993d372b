use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::LinkPredError;
use crate::rng;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledFeatures {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl LabeledFeatures {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            learning_rate: 0.1,
            l2: 1e-4,
            max_epochs: 200,
            batch_size: 32,
            patience: 10,
            seed: 0,
        }
    }
}

/// Logistic regression over raw edge features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl EdgeClassifier {
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn save(&self, path: &Path) -> Result<(), LinkPredError> {
        let text = serde_json::to_string_pretty(self).expect("classifier serializes");
        fs::write(path, text + "\n").map_err(|source| LinkPredError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<EdgeClassifier, LinkPredError> {
        let text = fs::read_to_string(path).map_err(|source| LinkPredError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| LinkPredError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Mean binary cross-entropy plus `l2/2 · |w|²` and its gradient
/// `(dw, db)`. The bias is not regularized.
pub fn logistic_loss_and_grad(model: &EdgeClassifier, data: &LabeledFeatures, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = data.len().max(1) as f64;
    let mut loss = 0.0;
    let mut dw = vec![0.0; model.weights.len()];
    let mut db = 0.0;
    for (x, &y) in data.features.iter().zip(&data.labels) {
        let z = model.logit(x);
        // -log σ(z) for positives, -log(1 - σ(z)) for negatives.
        loss += if y { log1p_exp(-z) } else { log1p_exp(z) };
        let r = sigmoid(z) - f64::from(u8::from(y));
        for (g, v) in dw.iter_mut().zip(x) {
            *g += r * v;
        }
        db += r;
    }
    loss /= n;
    db /= n;
    let reg: f64 = model.weights.iter().map(|w| w * w).sum();
    loss += 0.5 * l2 * reg;
    for (g, w) in dw.iter_mut().zip(&model.weights) {
        *g = *g / n + l2 * w;
    }
    (loss, dw, db)
}

struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(data: &LabeledFeatures, dims: usize) -> Self {
        let n = data.len() as f64;
        let mut mean = vec![0.0; dims];
        for x in &data.features {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dims];
        for x in &data.features {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var.into_iter().map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, data: &LabeledFeatures) -> LabeledFeatures {
        LabeledFeatures {
            features: data
                .features
                .iter()
                .map(|x| x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect())
                .collect(),
            labels: data.labels.clone(),
        }
    }

    /// Expresses a model over standardized inputs in terms of raw inputs.
    fn fold(&self, model: &EdgeClassifier) -> EdgeClassifier {
        let weights: Vec<f64> = model.weights.iter().zip(&self.scale).map(|(w, s)| w / s).collect();
        let shift: f64 = weights.iter().zip(&self.mean).map(|(w, m)| w * m).sum();
        EdgeClassifier {
            weights,
            bias: model.bias - shift,
        }
    }
}

/// Mini-batch SGD on standardized features. With validation data the
/// parameters with the lowest validation loss are kept and training stops
/// after `patience` epochs without improvement.
pub fn train_edge_classifier(
    train: &LabeledFeatures,
    val: Option<&LabeledFeatures>,
    config: &ClassifierConfig,
) -> Result<EdgeClassifier, LinkPredError> {
    if config.batch_size == 0 || config.max_epochs == 0 || !(config.learning_rate > 0.0) || config.l2 < 0.0 {
        return Err(LinkPredError::InvalidParams("classifier configuration".into()));
    }
    let positives = train.labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == train.len() {
        return Err(LinkPredError::SingleClassTraining);
    }
    let dims = train.features[0].len();
    if train.features.iter().any(|x| x.len() != dims) || train.features.len() != train.labels.len() {
        return Err(LinkPredError::InvalidParams("ragged feature matrix".into()));
    }

    let std = Standardizer::fit(train, dims);
    let train = std.apply(train);
    let val = val.map(|v| std.apply(v));

    let mut model = EdgeClassifier {
        weights: vec![0.0; dims],
        bias: 0.0,
    };
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut stale = 0;
    let mut rng = rng::rng(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch = LabeledFeatures {
                features: chunk.iter().map(|&i| train.features[i].clone()).collect(),
                labels: chunk.iter().map(|&i| train.labels[i]).collect(),
            };
            let (_, dw, db) = logistic_loss_and_grad(&model, &batch, config.l2);
            for (w, g) in model.weights.iter_mut().zip(&dw) {
                *w -= config.learning_rate * g;
            }
            model.bias -= config.learning_rate * db;
        }
        let monitor = val.as_ref().unwrap_or(&train);
        let (loss, _, _) = logistic_loss_and_grad(&model, monitor, 0.0);
        if loss < best_loss - 1e-9 {
            best_loss = loss;
            best = model.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                log::debug!("early stop after epoch {epoch}, best loss {best_loss:.6}");
                break;
            }
        }
    }
    Ok(std.fold(&best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) == 1.0 && sigmoid(-800.0) >= 0.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = LabeledFeatures {
            features: vec![vec![0.3, -1.2, 2.0], vec![-0.7, 0.4, 0.1], vec![1.5, 1.5, -0.5]],
            labels: vec![true, false, true],
        };
        let model = EdgeClassifier {
            weights: vec![0.2, -0.4, 0.7],
            bias: -0.1,
        };
        let l2 = 0.05;
        let (_, dw, db) = logistic_loss_and_grad(&model, &data, l2);
        let h = 1e-6;
        for i in 0..3 {
            let mut plus = model.clone();
            plus.weights[i] += h;
            let mut minus = model.clone();
            minus.weights[i] -= h;
            let numeric = (logistic_loss_and_grad(&plus, &data, l2).0 - logistic_loss_and_grad(&minus, &data, l2).0) / (2.0 * h);
            assert!((numeric - dw[i]).abs() < 1e-7, "w{i}: {numeric} vs {}", dw[i]);
        }
        let shifted = |b: f64| EdgeClassifier { bias: b, ..model.clone() };
        let numeric = (logistic_loss_and_grad(&shifted(model.bias + h), &data, l2).0
            - logistic_loss_and_grad(&shifted(model.bias - h), &data, l2).0)
            / (2.0 * h);
        assert!((numeric - db).abs() < 1e-7);
    }

    #[test]
    fn separates_linearly_separable_data() {
        let mut rng = rng::rng(1);
        let mut data = LabeledFeatures::default();
        for _ in 0..200 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0) * 100.0 + 500.0).collect();
            data.labels.push(x[0] + 2.0 * x[1] > 1500.0);
            data.features.push(x);
        }
        let model = train_edge_classifier(&data, None, &ClassifierConfig::default()).unwrap();
        let correct = data
            .features
            .iter()
            .zip(&data.labels)
            .filter(|(x, &y)| (model.probability(x) > 0.5) == y)
            .count();
        assert!(correct >= 194, "{correct}/200");
    }

    #[test]
    fn single_class_is_rejected() {
        let data = LabeledFeatures {
            features: vec![vec![1.0], vec![2.0]],
            labels: vec![true, true],
        };
        assert!(matches!(
            train_edge_classifier(&data, None, &ClassifierConfig::default()),
            Err(LinkPredError::SingleClassTraining)
        ));
    }

    #[test]
    fn deterministic_and_round_trips() {
        let data = LabeledFeatures {
            features: (0..40).map(|i| vec![i as f64, (i % 3) as f64]).collect(),
            labels: (0..40).map(|i| i >= 20).collect(),
        };
        let cfg = ClassifierConfig { seed: 4, ..Default::default() };
        let a = train_edge_classifier(&data, Some(&data), &cfg).unwrap();
        assert_eq!(a, train_edge_classifier(&data, Some(&data), &cfg).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clf.json");
        a.save(&path).unwrap();
        assert_eq!(EdgeClassifier::load(&path).unwrap(), a);
    }
}
