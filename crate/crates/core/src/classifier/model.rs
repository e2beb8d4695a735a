use serde::{Deserialize, Serialize};

use super::ops::{
    conv3x3_backward, conv3x3_forward, maxpool2_forward, relu_in_place, softmax_xent_slice,
};
use super::{ClassifierError, Prng, Tensor};

/// Network shape: a stack of `conv3x3 → ReLU → maxpool2` blocks on a
/// single-channel square input, then a linear layer to `num_classes` logits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_side: u32,
    pub num_classes: u32,
    /// Output channels of each conv block.
    pub conv_channels: Vec<u32>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_side: 64,
            num_classes: 2,
            conv_channels: vec![8, 16, 32],
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let blocks = self.conv_channels.len() as u32;
        if self.num_classes < 2 {
            return Err(ClassifierError::InvalidConfig(
                "num_classes must be at least 2".into(),
            ));
        }
        if self.conv_channels.contains(&0) {
            return Err(ClassifierError::InvalidConfig(
                "conv channel counts must be positive".into(),
            ));
        }
        let factor = 1u64.checked_shl(blocks).unwrap_or(0);
        if self.input_side == 0
            || factor == 0
            || u64::from(self.input_side) % factor != 0
            || u64::from(self.input_side) < factor
        {
            return Err(ClassifierError::InvalidConfig(format!(
                "input_side {} must be a positive multiple of 2^{blocks}",
                self.input_side
            )));
        }
        Ok(())
    }

    /// Length of the flattened feature vector fed to the dense head.
    pub fn feature_len(&self) -> usize {
        let side = (self.input_side >> self.conv_channels.len()) as usize;
        let ch = self.conv_channels.last().map_or(1, |&c| c as usize);
        ch * side * side
    }

    /// Parameter shapes in storage order.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::new();
        let mut c_in = 1usize;
        for &f in &self.conv_channels {
            let f = f as usize;
            shapes.push(vec![f, c_in, 3, 3]);
            shapes.push(vec![f]);
            c_in = f;
        }
        let k = self.num_classes as usize;
        shapes.push(vec![k, self.feature_len()]);
        shapes.push(vec![k]);
        shapes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    /// `[out, in, 3, 3]`
    pub kernels: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `[classes, features]`
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub convs: Vec<ConvLayer>,
    pub dense: DenseLayer,
    /// Config hash of the dataset this model was trained on.
    pub dataset_hash: Option<String>,
}

/// Gradients in the same order and shapes as [`Model::parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Tensor>);

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Gradients(
            model
                .parameters()
                .map(|p| Tensor::zeros(p.shape().to_vec()))
                .collect(),
        )
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.0 {
            for x in t.data_mut() {
                *x *= s;
            }
        }
    }
}

/// Class probabilities for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub probs: Vec<f64>,
}

impl Prediction {
    fn from_probs(probs: Vec<f64>) -> Self {
        // first maximum wins
        let class = probs
            .iter()
            .enumerate()
            .fold(0, |best, (i, &p)| if p > probs[best] { i } else { best });
        Prediction { class, probs }
    }

    pub(crate) fn from_cache(cache: &ForwardCache) -> Self {
        Self::from_probs(cache.probs.clone())
    }
}

struct BlockCache {
    dims: (usize, usize, usize),
    input: Vec<f64>,
    /// Conv output after ReLU.
    activated: Vec<f64>,
    argmax: Vec<usize>,
}

/// Activations kept from a forward pass for the matching backward pass.
pub struct ForwardCache {
    blocks: Vec<BlockCache>,
    features: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Initialize weights uniform in ±√(6/fan_in) from the seeded PRNG, layer by
/// layer in storage order; biases start at zero.
pub fn init_model(config: ModelConfig) -> Result<Model, ClassifierError> {
    config.validate()?;
    let mut rng = Prng::new(config.seed);
    let mut draw = |shape: Vec<usize>, fan_in: usize| {
        let bound = (6.0 / fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.uniform(-bound, bound)).collect();
        Tensor::new(shape, data).expect("shape/data agree")
    };
    let mut convs = Vec::new();
    let mut c_in = 1usize;
    for &f in &config.conv_channels {
        let f = f as usize;
        convs.push(ConvLayer {
            kernels: draw(vec![f, c_in, 3, 3], c_in * 9),
            bias: Tensor::zeros(vec![f]),
        });
        c_in = f;
    }
    let k = config.num_classes as usize;
    let d = config.feature_len();
    let dense = DenseLayer {
        weight: draw(vec![k, d], d),
        bias: Tensor::zeros(vec![k]),
    };
    Ok(Model {
        config,
        convs,
        dense,
        dataset_hash: None,
    })
}

impl Model {
    pub fn num_classes(&self) -> usize {
        self.config.num_classes as usize
    }

    pub fn input_len(&self) -> usize {
        let s = self.config.input_side as usize;
        s * s
    }

    pub fn parameters(&self) -> impl Iterator<Item = &Tensor> {
        self.convs
            .iter()
            .flat_map(|c| [&c.kernels, &c.bias])
            .chain([&self.dense.weight, &self.dense.bias])
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.convs
            .iter_mut()
            .flat_map(|c| [&mut c.kernels, &mut c.bias])
            .chain([&mut self.dense.weight, &mut self.dense.bias])
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().map(Tensor::len).sum()
    }

    fn check_input(&self, input: &[f64]) -> Result<(), ClassifierError> {
        if input.len() != self.input_len() {
            return Err(ClassifierError::ShapeMismatch(format!(
                "model expects {}x{} input ({} values), got {}",
                self.config.input_side,
                self.config.input_side,
                self.input_len(),
                input.len()
            )));
        }
        Ok(())
    }

    /// Forward pass keeping every activation needed by [`Model::backward`].
    /// `input` is the row-major single-channel image scaled into [0, 1].
    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache, ClassifierError> {
        self.check_input(input)?;
        let side = self.config.input_side as usize;
        let mut dims = (1usize, side, side);
        let mut x = input.to_vec();
        let mut blocks = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let (c, h, w) = dims;
            let f = conv.bias.len();
            let mut activated = vec![0.0; f * h * w];
            conv3x3_forward(&x, dims, conv.kernels.data(), conv.bias.data(), &mut activated);
            relu_in_place(&mut activated);
            let n = f * (h / 2) * (w / 2);
            let mut pooled = vec![0.0; n];
            let mut argmax = vec![0; n];
            maxpool2_forward(&activated, (f, h, w), &mut pooled, &mut argmax);
            blocks.push(BlockCache {
                dims: (c, h, w),
                input: std::mem::replace(&mut x, pooled),
                activated,
                argmax,
            });
            dims = (f, h / 2, w / 2);
        }
        let logits = self.dense_forward(&x);
        let (_, probs) = softmax_xent_slice(&logits, 0);
        Ok(ForwardCache {
            blocks,
            features: x,
            logits,
            probs,
        })
    }

    fn dense_forward(&self, features: &[f64]) -> Vec<f64> {
        let d = features.len();
        self.dense
            .weight
            .data()
            .chunks_exact(d)
            .zip(self.dense.bias.data())
            .map(|(row, b)| b + row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    pub fn predict_input(&self, input: &[f64]) -> Result<Prediction, ClassifierError> {
        Ok(Prediction::from_probs(self.forward_cached(input)?.probs))
    }

    /// Cross-entropy loss of one sample.
    pub fn loss(&self, input: &[f64], class: usize) -> Result<f64, ClassifierError> {
        self.check_class(class)?;
        let cache = self.forward_cached(input)?;
        Ok(softmax_xent_slice(&cache.logits, class).0)
    }

    fn check_class(&self, class: usize) -> Result<(), ClassifierError> {
        if class >= self.num_classes() {
            Err(ClassifierError::LabelOutOfRange {
                label: class,
                num_classes: self.num_classes(),
            })
        } else {
            Ok(())
        }
    }

    /// Exact gradients of the cross-entropy loss for the cached sample.
    /// Returns the gradients and the loss.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        class: usize,
    ) -> Result<(Gradients, f64), ClassifierError> {
        self.check_class(class)?;
        let (loss, probs) = softmax_xent_slice(&cache.logits, class);
        let mut dlogits = probs;
        dlogits[class] -= 1.0;

        let d = cache.features.len();
        let mut grads: Vec<Tensor> = Vec::with_capacity(2 * self.convs.len() + 2);

        let mut dweight = vec![0.0; dlogits.len() * d];
        let mut dfeat = vec![0.0; d];
        for (k, &g) in dlogits.iter().enumerate() {
            let row = &mut dweight[k * d..(k + 1) * d];
            for (dw, x) in row.iter_mut().zip(&cache.features) {
                *dw = g * x;
            }
            let wrow = &self.dense.weight.data()[k * d..(k + 1) * d];
            for (df, w) in dfeat.iter_mut().zip(wrow) {
                *df += g * w;
            }
        }
        let dense_grads = [
            Tensor::new(self.dense.weight.shape().to_vec(), dweight)?,
            Tensor::new(vec![dlogits.len()], dlogits)?,
        ];

        // Walk the conv blocks backwards; `dnext` is the gradient wrt the
        // pooled output of the current block.
        let mut dnext = dfeat;
        let mut conv_grads = Vec::with_capacity(self.convs.len());
        for (i, (conv, block)) in self.convs.iter().zip(&cache.blocks).enumerate().rev() {
            let (c, h, w) = block.dims;
            let f = conv.bias.len();
            let mut dact = vec![0.0; f * h * w];
            for (g, &idx) in dnext.iter().zip(&block.argmax) {
                dact[idx] += g;
            }
            for (g, &a) in dact.iter_mut().zip(&block.activated) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            let mut dk = vec![0.0; f * c * 9];
            let mut db = vec![0.0; f];
            let mut dinput = if i > 0 { Some(vec![0.0; c * h * w]) } else { None };
            conv3x3_backward(
                &block.input,
                (c, h, w),
                conv.kernels.data(),
                &dact,
                &mut dk,
                &mut db,
                dinput.as_deref_mut(),
            );
            conv_grads.push([
                Tensor::new(conv.kernels.shape().to_vec(), dk)?,
                Tensor::new(vec![f], db)?,
            ]);
            dnext = dinput.unwrap_or_default();
        }
        for pair in conv_grads.into_iter().rev() {
            grads.extend(pair);
        }
        grads.extend(dense_grads);
        Ok((Gradients(grads), loss))
    }
}

/// Forward/backward driver that remembers the last forward pass.
pub struct Executor<'m> {
    model: &'m Model,
    cache: Option<ForwardCache>,
}

impl<'m> Executor<'m> {
    pub fn new(model: &'m Model) -> Self {
        Executor { model, cache: None }
    }

    pub fn forward(&mut self, input: &[f64]) -> Result<Prediction, ClassifierError> {
        let cache = self.model.forward_cached(input)?;
        let pred = Prediction::from_probs(cache.probs.clone());
        self.cache = Some(cache);
        Ok(pred)
    }

    pub fn backward(&self, class: usize) -> Result<Gradients, ClassifierError> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| ClassifierError::StateError("backward called before forward".into()))?;
        Ok(self.model.backward(cache, class)?.0)
    }
}
