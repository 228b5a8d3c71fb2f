//! Desk-scale synthetic benchmark: Gaussian clusters, a linear softmax
//! classifier trained by full-batch gradient descent, and logit emission for
//! the evaluation pipeline. Novel clusters appear only on the test side.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataio::LogitRecord;
use crate::error::{Error, Result};
use crate::scores::LogitVector;

/// Where the held-out (novel) cluster means are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NovelPlacement {
    /// Midpoints between consecutive seen means: the hard case.
    Midpoint,
    /// Fresh directions at twice the seen radius: the easy case.
    Far,
}

impl NovelPlacement {
    pub fn name(self) -> &'static str {
        match self {
            NovelPlacement::Midpoint => "midpoint",
            NovelPlacement::Far => "far",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "midpoint" => Some(NovelPlacement::Midpoint),
            "far" => Some(NovelPlacement::Far),
            _ => None,
        }
    }
}

/// Generator and trainer configuration. Identical configs produce identical
/// outputs byte for byte.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_classes_seen: usize,
    pub n_classes_novel: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub cluster_separation: f64,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub novel_placement: NovelPlacement,
    pub n_groups: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_classes_seen: 5,
            n_classes_novel: 2,
            dim: 6,
            samples_per_class: 200,
            cluster_separation: 8.0,
            seed: 23,
            epochs: 60,
            learning_rate: 0.5,
            novel_placement: NovelPlacement::Midpoint,
            n_groups: 10,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("n_classes_seen", self.n_classes_seen),
            ("n_classes_novel", self.n_classes_novel),
            ("dim", self.dim),
            ("samples_per_class", self.samples_per_class),
            ("n_groups", self.n_groups),
        ] {
            if value == 0 {
                return Err(Error::InvalidInput(format!("{name} must be at least 1")));
            }
        }
        if !(self.cluster_separation >= 0.0 && self.cluster_separation.is_finite()) {
            return Err(Error::InvalidInput(
                "cluster_separation must be finite and non-negative".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput(
                "learning_rate must be finite and non-negative".into(),
            ));
        }
        if self.n_classes_seen < 2 {
            return Err(Error::InvalidInput(
                "n_classes_seen must be at least 2 so logit vectors have K >= 2".into(),
            ));
        }
        Ok(())
    }

    /// Parse a flat `key=value` file body. Unset keys keep their defaults;
    /// `#` starts a comment.
    pub fn from_kv_str(body: &str) -> Result<Self> {
        let mut config = Self::default();
        for (i, raw_line) in body.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i as u64 + 1,
                message: format!("expected key=value, got '{line}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Parse {
                line: i as u64 + 1,
                message: format!("{key}: {what} (got '{value}')"),
            };
            match key {
                "n_classes_seen" => {
                    config.n_classes_seen = value.parse().map_err(|_| bad("expected a count"))?
                }
                "n_classes_novel" => {
                    config.n_classes_novel = value.parse().map_err(|_| bad("expected a count"))?
                }
                "dim" => config.dim = value.parse().map_err(|_| bad("expected a count"))?,
                "samples_per_class" => {
                    config.samples_per_class =
                        value.parse().map_err(|_| bad("expected a count"))?
                }
                "cluster_separation" => {
                    config.cluster_separation =
                        value.parse().map_err(|_| bad("expected a number"))?
                }
                "seed" => config.seed = value.parse().map_err(|_| bad("expected an integer"))?,
                "epochs" => config.epochs = value.parse().map_err(|_| bad("expected a count"))?,
                "learning_rate" => {
                    config.learning_rate = value.parse().map_err(|_| bad("expected a number"))?
                }
                "novel_placement" => {
                    config.novel_placement = NovelPlacement::from_name(value)
                        .ok_or_else(|| bad("expected midpoint or far"))?
                }
                "n_groups" => {
                    config.n_groups = value.parse().map_err(|_| bad("expected a count"))?
                }
                other => {
                    return Err(Error::Parse {
                        line: i as u64 + 1,
                        message: format!("unknown key '{other}'"),
                    })
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "n_classes_seen={}\nn_classes_novel={}\ndim={}\nsamples_per_class={}\n\
             cluster_separation={}\nseed={}\nepochs={}\nlearning_rate={}\n\
             novel_placement={}\nn_groups={}\n",
            self.n_classes_seen,
            self.n_classes_novel,
            self.dim,
            self.samples_per_class,
            self.cluster_separation,
            self.seed,
            self.epochs,
            self.learning_rate,
            self.novel_placement.name(),
            self.n_groups,
        )
    }
}

/// A feature vector with its annotations, before any model is applied.
#[derive(Debug, Clone)]
pub struct FeatureRecord {
    pub sample_id: String,
    pub group_id: String,
    pub true_class: Option<usize>,
    pub is_novel: bool,
    pub features: Vec<f64>,
}

/// Linear softmax classifier: logits(x) = W x + b.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmaxModel {
    /// Row-major weights, one row per class.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl LinearSoftmaxModel {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        Self {
            weights: vec![vec![0.0; dim]; n_classes],
            biases: vec![0.0; n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.biases.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map(Vec::len).unwrap_or(0)
    }

    pub fn logits(&self, features: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(row, &b)| row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

/// Training record plus diagnostics.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LinearSoftmaxModel,
    /// Cross-entropy before training and after each accepted epoch.
    pub loss_history: Vec<f64>,
    pub train_accuracy: f64,
    pub final_learning_rate: f64,
}

fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        let mut fallback = vec![0.0; dim];
        fallback[0] = 1.0;
        return fallback;
    }
    raw.into_iter().map(|v| v / norm).collect()
}

/// Generate (train records, test records). Test records mix fresh draws from
/// every seen class with the novel clusters; group ids rotate round-robin so
/// the fold planner can split them.
pub fn generate(config: &SynthConfig) -> Result<(Vec<FeatureRecord>, Vec<FeatureRecord>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let seen_means: Vec<Vec<f64>> = (0..config.n_classes_seen)
        .map(|_| {
            unit_direction(&mut rng, config.dim)
                .into_iter()
                .map(|v| v * config.cluster_separation)
                .collect()
        })
        .collect();
    let novel_means: Vec<Vec<f64>> = (0..config.n_classes_novel)
        .map(|v| match config.novel_placement {
            NovelPlacement::Midpoint => {
                let a = &seen_means[v % config.n_classes_seen];
                let b = &seen_means[(v + 1) % config.n_classes_seen];
                a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
            }
            NovelPlacement::Far => unit_direction(&mut rng, config.dim)
                .into_iter()
                .map(|x| x * 2.0 * config.cluster_separation)
                .collect(),
        })
        .collect();

    let draw_around = |mean: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        mean.iter()
            .map(|&m| m + rng.sample::<f64, _>(StandardNormal))
            .collect()
    };

    let mut train = Vec::new();
    for class in 0..config.n_classes_seen {
        for _ in 0..config.samples_per_class {
            let index = train.len();
            train.push(FeatureRecord {
                sample_id: format!("train_{index:05}"),
                group_id: format!("g{}", 1 + index % config.n_groups),
                true_class: Some(class),
                is_novel: false,
                features: draw_around(&seen_means[class], &mut rng),
            });
        }
    }

    let mut test = Vec::new();
    for class in 0..config.n_classes_seen {
        for _ in 0..config.samples_per_class {
            let index = test.len();
            test.push(FeatureRecord {
                sample_id: format!("test_{index:05}"),
                group_id: format!("g{}", 1 + index % config.n_groups),
                true_class: Some(class),
                is_novel: false,
                features: draw_around(&seen_means[class], &mut rng),
            });
        }
    }
    for mean in &novel_means {
        for _ in 0..config.samples_per_class {
            let index = test.len();
            test.push(FeatureRecord {
                sample_id: format!("test_{index:05}"),
                group_id: format!("g{}", 1 + index % config.n_groups),
                true_class: None,
                is_novel: true,
                features: draw_around(mean, &mut rng),
            });
        }
    }

    Ok((train, test))
}

fn check_training_input(records: &[FeatureRecord], config: &SynthConfig) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    for record in records {
        if record.is_novel {
            return Err(Error::InvalidInput(format!(
                "novel record {} cannot be used for training",
                record.sample_id
            )));
        }
        if record.features.len() != config.dim {
            return Err(Error::InvalidInput(format!(
                "sample {} has dim {}, config says {}",
                record.sample_id,
                record.features.len(),
                config.dim
            )));
        }
        match record.true_class {
            Some(c) if c < config.n_classes_seen => {}
            Some(c) => {
                return Err(Error::InvalidInput(format!(
                    "sample {} has class {c}, model has {} classes",
                    record.sample_id, config.n_classes_seen
                )))
            }
            None => {
                return Err(Error::InvalidInput(format!(
                    "sample {} has no class label",
                    record.sample_id
                )))
            }
        }
    }
    Ok(())
}

/// Mean cross-entropy of the model over labeled records.
pub fn cross_entropy_loss(model: &LinearSoftmaxModel, records: &[FeatureRecord]) -> f64 {
    let mut total = 0.0;
    for record in records {
        let logits = model.logits(&record.features);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + logits.iter().map(|&a| (a - max).exp()).sum::<f64>().ln();
        let class = record.true_class.expect("labeled record");
        total += log_z - logits[class];
    }
    total / records.len() as f64
}

/// Analytic gradient of the mean cross-entropy: returns (dW, db).
pub fn cross_entropy_gradient(
    model: &LinearSoftmaxModel,
    records: &[FeatureRecord],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n_classes = model.n_classes();
    let dim = model.dim();
    let mut grad_w = vec![vec![0.0; dim]; n_classes];
    let mut grad_b = vec![0.0; n_classes];
    let scale = 1.0 / records.len() as f64;
    for record in records {
        let logits = model.logits(&record.features);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&a| (a - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let class = record.true_class.expect("labeled record");
        for c in 0..n_classes {
            let residual = (exps[c] / z - f64::from(c == class)) * scale;
            grad_b[c] += residual;
            for (g, &x) in grad_w[c].iter_mut().zip(&record.features) {
                *g += residual * x;
            }
        }
    }
    (grad_w, grad_b)
}

fn model_accuracy(model: &LinearSoftmaxModel, records: &[FeatureRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let correct = records
        .iter()
        .filter(|r| {
            let logits = model.logits(&r.features);
            let mut best = 0;
            for (i, &v) in logits.iter().enumerate().skip(1) {
                if v > logits[best] {
                    best = i;
                }
            }
            r.true_class == Some(best)
        })
        .count();
    correct as f64 / records.len() as f64
}

/// Full-batch gradient descent from zero init. With the safeguard on, any
/// epoch that would raise the loss by more than 1e-9 is rolled back and the
/// learning rate halved, so the recorded loss history never increases.
pub fn train_with(
    records: &[FeatureRecord],
    config: &SynthConfig,
    safeguard: bool,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_training_input(records, config)?;

    let mut model = LinearSoftmaxModel::zeros(config.n_classes_seen, config.dim);
    let mut learning_rate = config.learning_rate;
    let mut loss = cross_entropy_loss(&model, records);
    let mut loss_history = vec![loss];

    let mut epoch = 0;
    while epoch < config.epochs {
        let (grad_w, grad_b) = cross_entropy_gradient(&model, records);
        let mut stepped = model.clone();
        for (row, grad_row) in stepped.weights.iter_mut().zip(&grad_w) {
            for (w, g) in row.iter_mut().zip(grad_row) {
                *w -= learning_rate * g;
            }
        }
        for (b, g) in stepped.biases.iter_mut().zip(&grad_b) {
            *b -= learning_rate * g;
        }

        let stepped_loss = cross_entropy_loss(&stepped, records);
        if safeguard && stepped_loss > loss + 1e-9 {
            learning_rate /= 2.0;
            if learning_rate < 1e-15 {
                break;
            }
            continue; // retry this epoch with the smaller step
        }
        model = stepped;
        loss = stepped_loss;
        loss_history.push(loss);
        epoch += 1;
    }

    let train_accuracy = model_accuracy(&model, records);
    Ok(TrainOutcome {
        model,
        loss_history,
        train_accuracy,
        final_learning_rate: learning_rate,
    })
}

pub fn train(records: &[FeatureRecord], config: &SynthConfig) -> Result<TrainOutcome> {
    train_with(records, config, true)
}

/// Push records through the model and keep the raw logits (no softmax),
/// carrying all annotations through.
pub fn emit_logits(
    model: &LinearSoftmaxModel,
    records: &[FeatureRecord],
) -> Result<Vec<LogitRecord>> {
    records
        .iter()
        .map(|record| {
            if record.features.len() != model.dim() {
                return Err(Error::InvalidInput(format!(
                    "sample {} has dim {}, model expects {}",
                    record.sample_id,
                    record.features.len(),
                    model.dim()
                )));
            }
            LogitRecord::new(
                record.sample_id.clone(),
                record.group_id.clone(),
                record.true_class,
                record.is_novel,
                LogitVector::new(model.logits(&record.features))?,
            )
        })
        .collect()
}
