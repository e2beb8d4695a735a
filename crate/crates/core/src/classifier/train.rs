use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Gradients, Model, Prediction};
use super::{ClassifierError, Prng};
use crate::corpus::{load_image, DatasetManifest};
use crate::raster::ScImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
            epochs: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(ClassifierError::InvalidConfig(
                "learning_rate must be a finite non-negative number".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(ClassifierError::InvalidConfig(
                "momentum must lie in [0, 1)".into(),
            ));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(ClassifierError::InvalidConfig(
                "batch_size and epochs must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-sample loss seen during the epoch.
    pub loss: f64,
    /// Fraction of training samples classified correctly during the epoch.
    pub accuracy: f64,
    pub wall_ms: u64,
}

/// Decoded images with 0-based classes, all of the same side.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub side: u32,
    pub images: Vec<ScImage>,
    pub classes: Vec<usize>,
    /// Config hash of the manifest the images came from, if any.
    pub config_hash: Option<String>,
}

impl Dataset {
    pub fn new(side: u32, images: Vec<ScImage>, classes: Vec<usize>) -> Result<Self, ClassifierError> {
        if images.len() != classes.len() {
            return Err(ClassifierError::DatasetMismatch(
                "image and label counts differ".into(),
            ));
        }
        if let Some(img) = images.iter().find(|i| i.side != side) {
            return Err(ClassifierError::DatasetMismatch(format!(
                "found a {}px image in a {side}px dataset",
                img.side
            )));
        }
        Ok(Dataset {
            side,
            images,
            classes,
            config_hash: None,
        })
    }

    /// Load one split of a rendered dataset. `root` is the directory that
    /// holds the manifest.
    pub fn from_manifest(
        manifest: &DatasetManifest,
        root: &Path,
        split: &str,
    ) -> Result<Self, ClassifierError> {
        let entries: Vec<_> = manifest.split_entries(split).collect();
        let images = entries
            .par_iter()
            .map(|e| load_image(root, e))
            .collect::<Result<Vec<_>, _>>()?;
        let classes = entries.iter().map(|e| e.class()).collect();
        let mut ds = Dataset::new(manifest.layout.image_size, images, classes)?;
        ds.config_hash = Some(manifest.config_hash.clone());
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    fn input(&self, i: usize) -> Vec<f64> {
        self.images[i].to_unit_f64()
    }

    /// Check this dataset can be fed to `model`.
    pub fn check_compatible(&self, model: &Model) -> Result<(), ClassifierError> {
        if self.side != model.config.input_side {
            return Err(ClassifierError::DatasetMismatch(format!(
                "images are {}px but the model takes {}px",
                self.side, model.config.input_side
            )));
        }
        if let Some(&c) = self.classes.iter().find(|&&c| c >= model.num_classes()) {
            return Err(ClassifierError::DatasetMismatch(format!(
                "label {} exceeds the model's {} classes",
                c + 1,
                model.num_classes()
            )));
        }
        if let (Some(ours), Some(theirs)) = (&self.config_hash, &model.dataset_hash) {
            if ours != theirs {
                return Err(ClassifierError::DatasetMismatch(
                    "dataset config hash differs from the one the model was trained on".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Mini-batch SGD with momentum on the mean batch loss.
///
/// Sample order is reshuffled each epoch from a PRNG seeded with
/// `cfg.seed`. Per-sample gradients may be computed in parallel but are
/// summed in batch order, so results do not depend on thread count.
/// `on_epoch` sees each log record as it is produced.
pub fn train(
    mut model: Model,
    data: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<(Model, Vec<EpochLog>), ClassifierError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    data.check_compatible(&model)?;
    if model.dataset_hash.is_none() {
        model.dataset_hash = data.config_hash.clone();
    }

    let mut rng = Prng::new(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut velocity = Gradients::zeros_like(&model);
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;

        for batch in order.chunks(cfg.batch_size) {
            let per_sample = batch
                .par_iter()
                .map(|&i| {
                    let cache = model.forward_cached(&data.input(i))?;
                    let hit = Prediction::from_cache(&cache).class == data.classes[i];
                    let (g, loss) = model.backward(&cache, data.classes[i])?;
                    Ok((g, loss, hit))
                })
                .collect::<Result<Vec<_>, ClassifierError>>()?;

            let mut grad = Gradients::zeros_like(&model);
            for (g, loss, hit) in &per_sample {
                grad.add_assign(g);
                loss_sum += loss;
                correct += usize::from(*hit);
            }
            grad.scale(1.0 / batch.len() as f64);

            for ((p, v), g) in model
                .parameters_mut()
                .zip(velocity.0.iter_mut())
                .zip(&grad.0)
            {
                for ((pv, vv), gv) in p.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
                    *vv = cfg.momentum * *vv + gv;
                    *pv -= cfg.learning_rate * *vv;
                }
            }
        }

        let record = EpochLog {
            epoch,
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
            wall_ms: started.elapsed().as_millis() as u64,
        };
        on_epoch(&record);
        log.push(record);
    }
    Ok((model, log))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub total: usize,
    pub correct: usize,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

pub fn predict_all(model: &Model, data: &Dataset) -> Result<Vec<Prediction>, ClassifierError> {
    data.check_compatible(model)?;
    (0..data.len())
        .into_par_iter()
        .map(|i| model.predict_input(&data.input(i)))
        .collect()
}

pub fn evaluate(model: &Model, data: &Dataset) -> Result<Evaluation, ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let preds = predict_all(model, data)?;
    let k = model.num_classes();
    let mut confusion = vec![vec![0usize; k]; k];
    for (p, &truth) in preds.iter().zip(&data.classes) {
        confusion[truth][p.class] += 1;
    }
    let correct = (0..k).map(|i| confusion[i][i]).sum::<usize>();
    Ok(Evaluation {
        accuracy: correct as f64 / data.len() as f64,
        total: data.len(),
        correct,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{init_model, ModelConfig};

    fn toy(n: usize, side: u32) -> Dataset {
        // class 0 lights the left half, class 1 the right half
        let images = (0..n)
            .map(|i| {
                let mut img = ScImage::blank(side);
                for y in 0..side {
                    for x in 0..side {
                        let left = x < side / 2;
                        if left == (i % 2 == 0) && (x + y + i as u32).is_multiple_of(3) {
                            img.pixels[(y * side + x) as usize] = 255;
                        }
                    }
                }
                img
            })
            .collect();
        Dataset::new(side, images, (0..n).map(|i| i % 2).collect()).unwrap()
    }

    fn small_model(seed: u64) -> Model {
        init_model(ModelConfig {
            input_side: 8,
            num_classes: 2,
            conv_channels: vec![4],
            seed,
        })
        .unwrap()
    }

    fn bits(m: &Model) -> Vec<u64> {
        m.parameters().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect()
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let m = small_model(1);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let (trained, log) = train(m.clone(), &toy(20, 8), &cfg, |_| {}).unwrap();
        assert_eq!(bits(&trained), bits(&m));
        assert_eq!(log.len(), 3);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 5,
            seed: 9,
            ..TrainConfig::default()
        };
        let data = toy(30, 8);
        let (a, la) = train(small_model(2), &data, &cfg, |_| {}).unwrap();
        let (b, lb) = train(small_model(2), &data, &cfg, |_| {}).unwrap();
        assert_eq!(bits(&a), bits(&b));
        let strip = |l: &[EpochLog]| l.iter().map(|e| (e.loss.to_bits(), e.accuracy.to_bits())).collect::<Vec<_>>();
        assert_eq!(strip(&la), strip(&lb));
    }

    #[test]
    fn loss_goes_down_on_separable_data() {
        let cfg = TrainConfig {
            epochs: 8,
            batch_size: 8,
            seed: 3,
            ..TrainConfig::default()
        };
        let (_, log) = train(small_model(3), &toy(200, 8), &cfg, |_| {}).unwrap();
        assert!(log.last().unwrap().loss < log[0].loss);
    }

    #[test]
    fn duplicate_sample_batch_equals_single_gradient() {
        let m = small_model(4);
        let data = toy(1, 8);
        let x = data.input(0);
        let cache = m.forward_cached(&x).unwrap();
        let (single, _) = m.backward(&cache, 0).unwrap();
        let mut pair = Gradients::zeros_like(&m);
        pair.add_assign(&single);
        pair.add_assign(&single);
        pair.scale(0.5);
        assert_eq!(pair, single);
    }

    #[test]
    fn mismatches_are_reported() {
        let m = small_model(1);
        assert!(matches!(
            train(m.clone(), &toy(4, 16), &TrainConfig::default(), |_| {}),
            Err(ClassifierError::DatasetMismatch(_))
        ));
        let empty = Dataset::new(8, vec![], vec![]).unwrap();
        assert!(matches!(
            train(m.clone(), &empty, &TrainConfig::default(), |_| {}),
            Err(ClassifierError::EmptyDataset)
        ));
        let mut hashed = toy(4, 8);
        hashed.config_hash = Some("a".into());
        let mut mm = m.clone();
        mm.dataset_hash = Some("b".into());
        assert!(matches!(
            evaluate(&mm, &hashed),
            Err(ClassifierError::DatasetMismatch(_))
        ));
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(m, &toy(4, 8), &bad, |_| {}),
            Err(ClassifierError::InvalidConfig(_))
        ));
    }

    #[test]
    fn constant_predictor_on_balanced_set() {
        // zero weights and a bias favoring class 0
        let mut m = small_model(5);
        for p in m.parameters_mut() {
            p.data_mut().fill(0.0);
        }
        m.dense.bias.data_mut()[0] = 1.0;
        let ev = evaluate(&m, &toy(10, 8)).unwrap();
        assert_eq!(ev.accuracy, 0.5);
        assert_eq!(ev.confusion, vec![vec![5, 0], vec![5, 0]]);
        let total: usize = ev.confusion.iter().flatten().sum();
        assert_eq!(total, 10);
    }
}
