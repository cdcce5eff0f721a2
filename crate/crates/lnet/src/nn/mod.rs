//! Model variants built from DeepMax blocks (DSConv → MFM → 2×2 pool).
//!
//! A [`ModelConfig`] declares the LNet topology; the [`Variant`] decides how
//! each block is realized: `lnet` uses depthwise+pointwise convolution,
//! `cnn` swaps in a standard convolution, and `lnet_minus` halves the
//! convolution width and drops MFM so every downstream shape matches `lnet`.

pub mod serial;
pub mod store;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::tape::{Tape, Var};
use crate::tensor::{ops, Tensor};
pub use store::ParameterStore;

/// Architecture family of Table-style ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Lnet,
    Cnn,
    LnetMinus,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Lnet => "lnet",
            Variant::Cnn => "cnn",
            Variant::LnetMinus => "lnet_minus",
        }
    }
}

/// One DeepMax block: convolution to `conv_out_channels`, optional MFM
/// halving, optional 2×2 pooling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeepMaxBlockConfig {
    pub in_channels: usize,
    /// Convolution output channels before MFM halving.
    pub conv_out_channels: usize,
    pub kernel_size: usize,
    pub padding: usize,
    pub use_mfm: bool,
    pub pool: bool,
}

/// Declarative model description; `blocks` always describe the LNet plan and
/// the variant transforms it at build time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// `(channels, height, width)` of the input grid.
    pub input_shape: (usize, usize, usize),
    pub blocks: Vec<DeepMaxBlockConfig>,
    pub num_classes: usize,
}

impl ModelConfig {
    /// Default geometry for 12×12 grids over 5 classes.
    pub fn default_nslkdd(variant: Variant) -> Self {
        ModelConfig {
            variant,
            input_shape: (1, 12, 12),
            blocks: vec![
                DeepMaxBlockConfig { in_channels: 1, conv_out_channels: 32, kernel_size: 3, padding: 1, use_mfm: true, pool: true },
                DeepMaxBlockConfig { in_channels: 16, conv_out_channels: 64, kernel_size: 3, padding: 1, use_mfm: true, pool: true },
            ],
            num_classes: 5,
        }
    }

    /// Default geometry for 9×9 grids over 6 classes.
    pub fn default_cicids(variant: Variant) -> Self {
        ModelConfig {
            variant,
            input_shape: (1, 9, 9),
            blocks: vec![
                DeepMaxBlockConfig { in_channels: 1, conv_out_channels: 32, kernel_size: 3, padding: 1, use_mfm: true, pool: true },
                DeepMaxBlockConfig { in_channels: 16, conv_out_channels: 64, kernel_size: 3, padding: 1, use_mfm: true, pool: true },
            ],
            num_classes: 6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (c, h, w) = self.input_shape;
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::Config(format!("input shape {:?} has a zero dimension", self.input_shape)));
        }
        if self.blocks.is_empty() {
            return Err(Error::Config("model needs at least one block".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!("num_classes must be >= 2, got {}", self.num_classes)));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.kernel_size == 0 || b.kernel_size % 2 == 0 {
                return Err(Error::Config(format!("block{i}: kernel_size must be odd and >= 1, got {}", b.kernel_size)));
            }
            if b.use_mfm && b.conv_out_channels % 2 != 0 {
                return Err(Error::Config(format!(
                    "block{i}: conv_out_channels must be even with MFM, got {}",
                    b.conv_out_channels
                )));
            }
            if self.variant == Variant::LnetMinus && b.conv_out_channels % 2 != 0 {
                return Err(Error::Config(format!(
                    "block{i}: conv_out_channels must be even to halve for lnet_minus, got {}",
                    b.conv_out_channels
                )));
            }
        }
        // Chained channel counts and spatial algebra are checked by plan().
        self.plan().map(|_| ())
    }

    /// Shape-propagated layer sequence for this config under its variant.
    pub fn plan(&self) -> Result<Vec<Layer>> {
        let variant = self.variant;
        let (mut c, mut h, mut w) = self.input_shape;
        let mut layers = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            if b.in_channels != c {
                return Err(Error::Config(format!(
                    "block{i}: in_channels {} does not match incoming channel count {c}",
                    b.in_channels
                )));
            }
            let conv_out = match variant {
                Variant::LnetMinus => b.conv_out_channels / 2,
                _ => b.conv_out_channels,
            };
            if conv_out == 0 {
                return Err(Error::Config(format!("block{i}: zero convolution output channels")));
            }
            let oh = ops::conv_out_dim("plan", h, b.kernel_size, b.padding)
                .map_err(|_| Error::Config(format!("block{i}: kernel {} too large for {h}x{w} input", b.kernel_size)))?;
            let ow = ops::conv_out_dim("plan", w, b.kernel_size, b.padding)
                .map_err(|_| Error::Config(format!("block{i}: kernel {} too large for {h}x{w} input", b.kernel_size)))?;
            match variant {
                Variant::Cnn => layers.push(Layer::Standard {
                    name: format!("block{i}.conv"),
                    c_in: c,
                    c_out: conv_out,
                    kernel: b.kernel_size,
                    padding: b.padding,
                    in_hw: (h, w),
                    out_hw: (oh, ow),
                }),
                Variant::Lnet | Variant::LnetMinus => {
                    layers.push(Layer::Depthwise {
                        name: format!("block{i}.depthwise"),
                        channels: c,
                        kernel: b.kernel_size,
                        padding: b.padding,
                        in_hw: (h, w),
                        out_hw: (oh, ow),
                    });
                    layers.push(Layer::Pointwise {
                        name: format!("block{i}.pointwise"),
                        c_in: c,
                        c_out: conv_out,
                        hw: (oh, ow),
                    });
                }
            }
            c = conv_out;
            h = oh;
            w = ow;
            if b.use_mfm && variant != Variant::LnetMinus {
                layers.push(Layer::Mfm { name: format!("block{i}.mfm"), c_in: c, hw: (h, w) });
                c /= 2;
            }
            if b.pool {
                let (eh, ew) = (h - h % 2, w - w % 2);
                if eh == 0 || ew == 0 {
                    return Err(Error::Config(format!("block{i}: cannot pool {h}x{w} feature maps")));
                }
                if (eh, ew) != (h, w) {
                    layers.push(Layer::Crop { name: format!("block{i}.crop"), channels: c, in_hw: (h, w), out_hw: (eh, ew) });
                    h = eh;
                    w = ew;
                }
                layers.push(Layer::Pool { name: format!("block{i}.pool"), channels: c, in_hw: (h, w) });
                h /= 2;
                w /= 2;
            }
        }
        let flat = c * h * w;
        if flat == 0 {
            return Err(Error::Config("flatten dimension collapsed to zero".into()));
        }
        layers.push(Layer::Flatten { in_dims: (c, h, w) });
        layers.push(Layer::Linear { name: "head".into(), d_in: flat, d_out: self.num_classes });
        Ok(layers)
    }
}

/// One executable step of a planned model, with resolved shapes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Layer {
    Depthwise { name: String, channels: usize, kernel: usize, padding: usize, in_hw: (usize, usize), out_hw: (usize, usize) },
    Pointwise { name: String, c_in: usize, c_out: usize, hw: (usize, usize) },
    Standard { name: String, c_in: usize, c_out: usize, kernel: usize, padding: usize, in_hw: (usize, usize), out_hw: (usize, usize) },
    Mfm { name: String, c_in: usize, hw: (usize, usize) },
    Crop { name: String, channels: usize, in_hw: (usize, usize), out_hw: (usize, usize) },
    Pool { name: String, channels: usize, in_hw: (usize, usize) },
    Flatten { in_dims: (usize, usize, usize) },
    Linear { name: String, d_in: usize, d_out: usize },
}

/// One trainable tensor of a layer. Weights draw from
/// `U(−bound, bound)` with `bound = √(6/(fan_in + fan_out))`; biases
/// (`bound = 0`) start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init_bound: f64,
}

fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl Layer {
    /// Trainable tensors this layer owns. Depthwise convolutions carry no
    /// bias; pointwise/standard/linear do.
    pub fn parameters(&self) -> Vec<ParamSpec> {
        match self {
            Layer::Depthwise { name, channels, kernel, .. } => {
                let k2 = kernel * kernel;
                vec![ParamSpec {
                    name: format!("{name}.kernel"),
                    shape: vec![*channels, *kernel, *kernel],
                    init_bound: glorot(k2, k2),
                }]
            }
            Layer::Pointwise { name, c_in, c_out, .. } => vec![
                ParamSpec { name: format!("{name}.kernel"), shape: vec![*c_out, *c_in], init_bound: glorot(*c_in, *c_out) },
                ParamSpec { name: format!("{name}.bias"), shape: vec![*c_out], init_bound: 0.0 },
            ],
            Layer::Standard { name, c_in, c_out, kernel, .. } => {
                let k2 = kernel * kernel;
                vec![
                    ParamSpec {
                        name: format!("{name}.kernel"),
                        shape: vec![*c_out, *c_in, *kernel, *kernel],
                        init_bound: glorot(c_in * k2, c_out * k2),
                    },
                    ParamSpec { name: format!("{name}.bias"), shape: vec![*c_out], init_bound: 0.0 },
                ]
            }
            Layer::Linear { name, d_in, d_out } => vec![
                ParamSpec { name: format!("{name}.weight"), shape: vec![*d_out, *d_in], init_bound: glorot(*d_in, *d_out) },
                ParamSpec { name: format!("{name}.bias"), shape: vec![*d_out], init_bound: 0.0 },
            ],
            _ => Vec::new(),
        }
    }
}

/// A built model: config, resolved plan and the parameter store.
#[derive(Debug, Clone)]
pub struct Model<F: Real> {
    config: ModelConfig,
    plan: Vec<Layer>,
    params: ParameterStore<F>,
    seed: u64,
}

/// Parameter tape handles in store order, shared by every forward of one
/// batch.
pub struct TapeParams(Vec<Var>);

/// Validates the config, allocates parameters and initializes them from the
/// seed. Two builds with equal `(config, seed)` are bit-identical.
pub fn build_model<F: Real>(config: &ModelConfig, seed: u64) -> Result<Model<F>> {
    config.validate()?;
    let plan = config.plan()?;
    let mut params = ParameterStore::new();
    for layer in &plan {
        for spec in layer.parameters() {
            params.insert(&spec.name, Tensor::zeros(spec.shape))?;
        }
    }
    let mut model = Model { config: config.clone(), plan, params, seed };
    model.init_weights(seed);
    Ok(model)
}

impl<F: Real> Model<F> {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn plan(&self) -> &[Layer] {
        &self.plan
    }

    pub fn params(&self) -> &ParameterStore<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterStore<F> {
        &mut self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    /// Replaces the store contents (shapes must match the plan).
    pub(crate) fn from_parts(config: ModelConfig, plan: Vec<Layer>, params: ParameterStore<F>, seed: u64) -> Self {
        Model { config, plan, params, seed }
    }

    /// Fan-scaled uniform initialization: weights from `U(−b, b)` with
    /// `b = √(6/(fan_in + fan_out))`, biases zero, reproducible from `seed`.
    /// Draws happen in store order from one seeded stream.
    pub fn init_weights(&mut self, seed: u64) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        self.seed = seed;
        let specs: Vec<ParamSpec> = self.plan.iter().flat_map(|l| l.parameters()).collect();
        for spec in specs {
            let tensor = self.params.get_mut(&spec.name).expect("plan and store stay aligned");
            if spec.init_bound == 0.0 {
                tensor.data_mut().iter_mut().for_each(|v| *v = F::zero());
            } else {
                for v in tensor.data_mut() {
                    *v = F::from_f64_c(rng.gen_range(-spec.init_bound..spec.init_bound));
                }
            }
            tensor.zero_grad();
        }
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let (c, h, w) = self.config.input_shape;
        if shape != [c, h, w] {
            return Err(Error::shape(
                "forward",
                format!("input shape {shape:?} does not match model input [{c}, {h}, {w}]"),
            ));
        }
        Ok(())
    }

    /// Pure forward pass to logits `[num_classes]`.
    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        self.check_input(x.shape())?;
        let mut cur = x.clone();
        for layer in &self.plan {
            cur = match layer {
                Layer::Depthwise { name, padding, .. } => {
                    ops::conv2d_depthwise(&cur, self.param(name, "kernel"), None, *padding)?
                }
                Layer::Pointwise { name, .. } => {
                    ops::conv2d_pointwise(&cur, self.param(name, "kernel"), Some(self.param(name, "bias")))?
                }
                Layer::Standard { name, padding, .. } => {
                    ops::conv2d_standard(&cur, self.param(name, "kernel"), Some(self.param(name, "bias")), *padding)?
                }
                Layer::Mfm { .. } => ops::mfm_max(&cur)?,
                Layer::Crop { out_hw, .. } => ops::crop2d(&cur, out_hw.0, out_hw.1)?,
                Layer::Pool { .. } => ops::maxpool2x2(&cur)?,
                Layer::Flatten { .. } => ops::flatten(&cur)?,
                Layer::Linear { name, .. } => {
                    ops::linear(&cur, self.param(name, "weight"), self.param(name, "bias"))?
                }
            };
        }
        Ok(cur)
    }

    fn param(&self, layer: &str, suffix: &str) -> &Tensor<F> {
        self.params.get(&format!("{layer}.{suffix}")).expect("plan and store stay aligned")
    }

    /// Registers every parameter as a tape leaf (in store order).
    pub fn register_params(&self, tape: &mut Tape<F>) -> TapeParams {
        TapeParams(self.params.tensors().iter().map(|t| tape.leaf(t)).collect())
    }

    /// Recorded forward pass; `x` enters as a constant.
    pub fn forward_recorded(&self, tape: &mut Tape<F>, params: &TapeParams, x: &Tensor<F>) -> Result<Var> {
        self.check_input(x.shape())?;
        let mut cur = tape.constant(x);
        let mut next_param = 0usize;
        let mut take = |n: usize| {
            let vars = &params.0[next_param..next_param + n];
            next_param += n;
            vars.to_vec()
        };
        for layer in &self.plan {
            cur = match layer {
                Layer::Depthwise { padding, .. } => {
                    let p = take(1);
                    tape.conv2d_depthwise(cur, p[0], None, *padding)?
                }
                Layer::Pointwise { .. } => {
                    let p = take(2);
                    tape.conv2d_pointwise(cur, p[0], Some(p[1]))?
                }
                Layer::Standard { padding, .. } => {
                    let p = take(2);
                    tape.conv2d_standard(cur, p[0], Some(p[1]), *padding)?
                }
                Layer::Mfm { .. } => tape.mfm_max(cur)?,
                Layer::Crop { out_hw, .. } => tape.crop2d(cur, out_hw.0, out_hw.1)?,
                Layer::Pool { .. } => tape.maxpool2x2(cur)?,
                Layer::Flatten { .. } => tape.flatten(cur)?,
                Layer::Linear { .. } => {
                    let p = take(2);
                    tape.linear(cur, p[0], p[1])?
                }
            };
        }
        Ok(cur)
    }

    /// Copies gradients accumulated on tape leaves back into the store.
    pub fn accumulate_grads_from(&mut self, tape: &Tape<F>, params: &TapeParams) -> Result<()> {
        for (var, tensor) in params.0.iter().zip(self.params.tensors_mut()) {
            if let Some(g) = tape.grad(*var) {
                tensor.accumulate_grad(g)?;
            }
        }
        Ok(())
    }

    pub fn cast<G: Real>(&self) -> Model<G> {
        Model {
            config: self.config.clone(),
            plan: self.plan.clone(),
            params: self.params.cast(),
            seed: self.seed,
        }
    }
}
