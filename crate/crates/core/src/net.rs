//! The dual network: a Liquidation Net mapping shocks to per-bank, per-asset
//! liquidations, holdings-weighted aggregation, and a Price Net mapping
//! aggregate liquidations to prices.
//!
//! Monotonicity comes from the construction rather than from training: every
//! weight matrix is kept non-negative (projected after each optimizer step) and
//! every activation is non-decreasing. The Price Net's output layer applies its
//! weights with a negative sign, so prices fall as liquidations rise while the
//! free output bias sets the price level.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{self, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    /// `max(0, x)` on every unit.
    Relu,
    /// `max(0, x)` on the first half of the units and `min(0, x)` on the
    /// rest. With non-negative weights plain ReLU stacks can only express
    /// convex maps; the reflected half adds the concave pieces.
    MixedRelu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Shocks only, two monotone networks.
    Proposed,
    /// Price Net replaced by one affine layer.
    LinearPrice,
    /// Liquidation Net also sees the true per-bank liquidations.
    Inclusive,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Proposed, Variant::LinearPrice, Variant::Inclusive];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Proposed => "proposed",
            Variant::LinearPrice => "linear-price",
            Variant::Inclusive => "inclusive",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out×in`, row-major.
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Fully connected network with non-negative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneMlp {
    layers: Vec<Layer>,
    activation: Activation,
    /// `+1`: non-decreasing in every input; `−1`: non-increasing.
    output_sign: f64,
    final_relu: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitOptions {
    /// Hidden biases start uniform on `[−spread, 0]`.
    pub hidden_bias_spread: f64,
    pub output_bias: f64,
}

impl MonotoneMlp {
    /// Weights uniform on `[0, 1/√fan_in]`.
    pub fn new(
        dims: &[usize],
        activation: Activation,
        output_sign: f64,
        final_relu: bool,
        init: InitOptions,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid layer dims {dims:?}")));
        }
        if output_sign != 1.0 && output_sign != -1.0 {
            return Err(Error::InvalidArgument("output sign must be +1 or -1".into()));
        }
        let depth = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let scale = 1.0 / (fan_in as f64).sqrt();
                let weights = (0..fan_in * fan_out).map(|_| rng.random::<f64>() * scale).collect();
                let bias = if k + 1 == depth {
                    vec![init.output_bias; fan_out]
                } else if init.hidden_bias_spread > 0.0 {
                    (0..fan_out).map(|_| -rng.random::<f64>() * init.hidden_bias_spread).collect()
                } else {
                    vec![0.0; fan_out]
                };
                Layer {
                    weights: Tensor::matrix(fan_out, fan_in, weights).expect("sized"),
                    bias: Tensor::vector(bias),
                }
            })
            .collect();
        Ok(MonotoneMlp {
            layers,
            activation,
            output_sign,
            final_relu,
        })
    }

    pub fn from_layers(layers: Vec<Layer>, activation: Activation, output_sign: f64, final_relu: bool) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for (k, l) in layers.iter().enumerate() {
            let [out, inp] = l.weights.shape() else {
                return Err(Error::shape("network", format!("layer {k} weights are not a matrix")));
            };
            if l.bias.shape() != [*out] {
                return Err(Error::shape("network", format!("layer {k} bias does not match {out} outputs")));
            }
            if k > 0 && layers[k - 1].weights.shape()[0] != *inp {
                return Err(Error::shape("network", format!("layer {k} expects {inp} inputs")));
            }
        }
        if output_sign != 1.0 && output_sign != -1.0 {
            return Err(Error::InvalidArgument("output sign must be +1 or -1".into()));
        }
        Ok(MonotoneMlp {
            layers,
            activation,
            output_sign,
            final_relu,
        })
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].weights.shape()[1]];
        dims.extend(self.layers.iter().map(|l| l.weights.shape()[0]));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weights.shape()[0]
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_sign(&self) -> f64 {
        self.output_sign
    }

    pub fn final_relu(&self) -> bool {
        self.final_relu
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Projects every weight onto `[0, ∞)`. Biases are left alone.
    pub fn clamp(&mut self) {
        for l in &mut self.layers {
            for w in l.weights.data_mut() {
                if *w < 0.0 {
                    *w = 0.0;
                }
            }
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.layers.iter().all(|l| l.weights.data().iter().all(|w| *w >= 0.0))
    }

    fn split(&self, width: usize) -> usize {
        match self.activation {
            Activation::Relu => width,
            Activation::MixedRelu => width.div_ceil(2),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (_, cols) = x.dims2()?;
        if cols != self.input_dim() {
            return Err(Error::shape(
                "network",
                format!("expected {} inputs, got {cols}", self.input_dim()),
            ));
        }
        let depth = self.layers.len();
        let mut h = x.clone();
        for (k, l) in self.layers.iter().enumerate() {
            if k + 1 < depth {
                h = autodiff::affine(&h, &l.weights, &l.bias)?;
                h = autodiff::mixed_relu(&h, self.split(l.bias.len()))?;
            } else {
                h = autodiff::affine_signed(&h, &l.weights, &l.bias, self.output_sign)?;
                if self.final_relu {
                    h = autodiff::relu(&h);
                }
            }
        }
        Ok(h)
    }

    /// Records the forward pass on `tape`; returns the output and the
    /// parameter leaves as `[w_0, b_0, w_1, b_1, …]`.
    pub fn trace(&self, tape: &mut Tape, x: Var) -> Result<(Var, Vec<Var>)> {
        let depth = self.layers.len();
        let mut params = Vec::with_capacity(2 * depth);
        let mut h = x;
        for (k, l) in self.layers.iter().enumerate() {
            let w = tape.leaf(l.weights.clone());
            let b = tape.leaf(l.bias.clone());
            params.extend([w, b]);
            if k + 1 < depth {
                h = tape.affine(h, w, b)?;
                h = match self.activation {
                    Activation::Relu => tape.relu(h),
                    Activation::MixedRelu => tape.mixed_relu(h, self.split(l.bias.len()))?,
                };
            } else {
                h = tape.affine_signed(h, w, b, self.output_sign)?;
                if self.final_relu {
                    h = tape.relu(h);
                }
            }
        }
        Ok((h, params))
    }
}

/// Widths and initialization of both networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub liquidation_hidden: Vec<usize>,
    pub price_hidden: Vec<usize>,
    pub liquidation_activation: Activation,
    pub price_activation: Activation,
    pub hidden_bias_spread: f64,
    pub price_output_bias: f64,
    /// Resize the benchmark variants' Liquidation Net so their total
    /// parameter count matches the proposed model's.
    pub match_parameter_count: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            liquidation_hidden: vec![32, 32],
            price_hidden: vec![32, 32],
            liquidation_activation: Activation::Relu,
            price_activation: Activation::MixedRelu,
            hidden_bias_spread: 1.0,
            price_output_bias: 1.0,
            match_parameter_count: true,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.liquidation_hidden.contains(&0) || self.price_hidden.contains(&0) {
            problems.push("model: hidden widths must be positive".to_string());
        }
        if !(self.hidden_bias_spread.is_finite() && self.hidden_bias_spread >= 0.0) {
            problems.push("model.hidden_bias_spread: must be non-negative".to_string());
        }
        if !self.price_output_bias.is_finite() {
            problems.push("model.price_output_bias: must be finite".to_string());
        }
        problems
    }
}

fn dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut d = vec![input];
    d.extend_from_slice(hidden);
    d.push(output);
    d
}

fn mlp_params(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Uniform hidden width (with `depth` hidden layers) whose parameter count is
/// closest to `target`.
fn matched_width(target: usize, input: usize, output: usize, depth: usize) -> usize {
    (1..=4096)
        .min_by_key(|&w| mlp_params(&dims(input, &vec![w; depth], output)).abs_diff(target))
        .expect("non-empty range")
}

/// Liquidation Net, aggregation and Price Net for one banking system.
#[derive(Debug, Clone, PartialEq)]
pub struct DualModel {
    variant: Variant,
    liquidation_net: MonotoneMlp,
    price_net: MonotoneMlp,
    holdings: Tensor,
    fingerprint: String,
}

/// Intermediate and final outputs of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    /// `[batch, N·M]` per-bank liquidations.
    pub ell_bar: Tensor,
    /// `[batch, M]` aggregate liquidations.
    pub ell_hat: Tensor,
    /// `[batch, M]` prices.
    pub p_hat: Tensor,
}

/// Tape handles for one traced forward pass.
pub struct Traced {
    pub ell_hat: Var,
    pub p_hat: Var,
    /// Liquidation Net parameters then Price Net parameters, each as
    /// `[w_0, b_0, …]`; same order as [`DualModel::parameters_mut`].
    pub params: Vec<Var>,
}

impl DualModel {
    pub fn new(variant: Variant, holdings: &Tensor, arch: &Architecture, seed: u64) -> Result<Self> {
        let [banks, assets] = *holdings.shape() else {
            return Err(Error::shape("model", "holdings must be an NxM matrix"));
        };
        if holdings.data().iter().any(|a| *a < 0.0) {
            return Err(Error::InvalidArgument("holdings must be non-negative".into()));
        }
        let problems = arch.validate();
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let k = banks * assets;
        let price_dims = match variant {
            Variant::LinearPrice => vec![assets, assets],
            _ => dims(assets, &arch.price_hidden, assets),
        };
        let liq_input = match variant {
            Variant::Inclusive => banks + k,
            _ => banks,
        };
        let mut liq_hidden = arch.liquidation_hidden.clone();
        if arch.match_parameter_count && variant != Variant::Proposed && !liq_hidden.is_empty() {
            let target = mlp_params(&dims(banks, &arch.liquidation_hidden, k))
                + mlp_params(&dims(assets, &arch.price_hidden, assets));
            let budget = target.saturating_sub(mlp_params(&price_dims));
            let w = matched_width(budget, liq_input, k, liq_hidden.len());
            liq_hidden = vec![w; liq_hidden.len()];
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = InitOptions {
            hidden_bias_spread: arch.hidden_bias_spread,
            output_bias: 0.0,
        };
        let liquidation_net = MonotoneMlp::new(
            &dims(liq_input, &liq_hidden, k),
            arch.liquidation_activation,
            1.0,
            true,
            init,
            &mut rng,
        )?;
        let price_net = MonotoneMlp::new(
            &price_dims,
            arch.price_activation,
            -1.0,
            false,
            InitOptions {
                output_bias: arch.price_output_bias,
                ..init
            },
            &mut rng,
        )?;
        Ok(DualModel {
            variant,
            liquidation_net,
            price_net,
            holdings: holdings.clone(),
            fingerprint: String::new(),
        })
    }

    pub fn from_parts(variant: Variant, liquidation_net: MonotoneMlp, price_net: MonotoneMlp, holdings: Tensor) -> Result<Self> {
        let [banks, assets] = *holdings.shape() else {
            return Err(Error::shape("model", "holdings must be an NxM matrix"));
        };
        let k = banks * assets;
        let liq_in = if variant == Variant::Inclusive { banks + k } else { banks };
        if liquidation_net.input_dim() != liq_in || liquidation_net.output_dim() != k {
            return Err(Error::shape(
                "model",
                format!("liquidation net must map {liq_in} inputs to {k} outputs for {variant}"),
            ));
        }
        if price_net.input_dim() != assets || price_net.output_dim() != assets {
            return Err(Error::shape("model", format!("price net must map {assets} to {assets}")));
        }
        if variant == Variant::LinearPrice && price_net.layers().len() != 1 {
            return Err(Error::Contract("linear-price variant needs a single affine price layer".into()));
        }
        if liquidation_net.output_sign() != 1.0 || price_net.output_sign() != -1.0 {
            return Err(Error::Contract("liquidation net must be increasing and price net decreasing".into()));
        }
        Ok(DualModel {
            variant,
            liquidation_net,
            price_net,
            holdings,
            fingerprint: String::new(),
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn banks(&self) -> usize {
        self.holdings.shape()[0]
    }

    pub fn assets(&self) -> usize {
        self.holdings.shape()[1]
    }

    pub fn holdings(&self) -> &Tensor {
        &self.holdings
    }

    pub fn liquidation_net(&self) -> &MonotoneMlp {
        &self.liquidation_net
    }

    pub fn price_net(&self) -> &MonotoneMlp {
        &self.price_net
    }

    pub fn liquidation_net_mut(&mut self) -> &mut MonotoneMlp {
        &mut self.liquidation_net
    }

    pub fn price_net_mut(&mut self) -> &mut MonotoneMlp {
        &mut self.price_net
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn set_fingerprint(&mut self, fingerprint: impl Into<String>) {
        self.fingerprint = fingerprint.into();
    }

    pub fn param_count(&self) -> usize {
        self.liquidation_net.param_count() + self.price_net.param_count()
    }

    pub fn clamp(&mut self) {
        self.liquidation_net.clamp();
        self.price_net.clamp();
    }

    pub fn is_feasible(&self) -> bool {
        self.liquidation_net.is_feasible() && self.price_net.is_feasible()
    }

    /// `(tensor, is_weight)` for every parameter, Liquidation Net first.
    pub fn parameters_mut(&mut self) -> Vec<(&mut Tensor, bool)> {
        let mut out = Vec::new();
        for net in [&mut self.liquidation_net, &mut self.price_net] {
            for l in net.layers_mut() {
                out.push((&mut l.weights, true));
                out.push((&mut l.bias, false));
            }
        }
        out
    }

    fn liquidation_input(&self, s: &Tensor, true_liq: Option<&Tensor>) -> Result<Tensor> {
        let (_, cols) = s.dims2()?;
        if cols != self.banks() {
            return Err(Error::shape("model", format!("expected {} shocks, got {cols}", self.banks())));
        }
        match (self.variant, true_liq) {
            (Variant::Inclusive, Some(liq)) => autodiff::concat(s, liq),
            (Variant::Inclusive, None) => Err(Error::Contract(
                "inclusive model needs the true per-bank liquidations".into(),
            )),
            (_, Some(_)) => Err(Error::Contract(format!(
                "{} model takes shocks only, true liquidations were supplied",
                self.variant
            ))),
            (_, None) => Ok(s.clone()),
        }
    }

    /// Liquidation Net output `ℓ̄`. The inclusive variant also needs the true
    /// per-bank liquidations.
    pub fn predict_bank_liquidations(&self, s: &Tensor, true_liq: Option<&Tensor>) -> Result<Tensor> {
        let input = self.liquidation_input(s, true_liq)?;
        self.liquidation_net.forward(&input)
    }

    /// `ℓ̂_m = Σ_n a[n][m]·ℓ̄[n][m]`.
    pub fn aggregate(&self, ell_bar: &Tensor) -> Result<Tensor> {
        autodiff::aggregate(&self.holdings, ell_bar)
    }

    pub fn predict_prices(&self, ell_hat: &Tensor) -> Result<Tensor> {
        self.price_net.forward(ell_hat)
    }

    pub fn forward(&self, s: &Tensor, true_liq: Option<&Tensor>) -> Result<Forward> {
        let ell_bar = self.predict_bank_liquidations(s, true_liq)?;
        let ell_hat = self.aggregate(&ell_bar)?;
        let p_hat = self.predict_prices(&ell_hat)?;
        Ok(Forward { ell_bar, ell_hat, p_hat })
    }

    pub fn trace(&self, tape: &mut Tape, s: &Tensor, true_liq: Option<&Tensor>) -> Result<Traced> {
        let input = self.liquidation_input(s, true_liq)?;
        let x = tape.leaf(input);
        let (ell_bar, mut params) = self.liquidation_net.trace(tape, x)?;
        let ell_hat = tape.aggregate(&self.holdings, ell_bar)?;
        let (p_hat, price_params) = self.price_net.trace(tape, ell_hat)?;
        params.extend(price_params);
        Ok(Traced { ell_hat, p_hat, params })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&ModelFile::from(self)).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        file.into_model()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::format(path, e))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetFile {
    layer_dims: Vec<usize>,
    activation: Activation,
    output_sign: f64,
    final_relu: bool,
    /// Row-major `out×in` per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl From<&MonotoneMlp> for NetFile {
    fn from(net: &MonotoneMlp) -> Self {
        NetFile {
            layer_dims: net.layer_dims(),
            activation: net.activation,
            output_sign: net.output_sign,
            final_relu: net.final_relu,
            weights: net.layers.iter().map(|l| l.weights.data().to_vec()).collect(),
            biases: net.layers.iter().map(|l| l.bias.data().to_vec()).collect(),
        }
    }
}

impl NetFile {
    fn into_net(self) -> Result<MonotoneMlp> {
        let depth = self.layer_dims.len().saturating_sub(1);
        if depth == 0 || self.weights.len() != depth || self.biases.len() != depth {
            return Err(Error::InvalidArgument("layer_dims disagree with stored layers".into()));
        }
        let layers = self
            .layer_dims
            .windows(2)
            .zip(self.weights.into_iter().zip(self.biases))
            .map(|(d, (w, b))| {
                Ok(Layer {
                    weights: Tensor::matrix(d[1], d[0], w)?,
                    bias: Tensor::new(vec![d[1]], b)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let net = MonotoneMlp::from_layers(layers, self.activation, self.output_sign, self.final_relu)?;
        if !net.is_feasible() {
            return Err(Error::Contract("stored model has negative weights".into()));
        }
        Ok(net)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    variant: Variant,
    holdings: Vec<Vec<f64>>,
    fingerprint: String,
    liquidation_net: NetFile,
    price_net: NetFile,
}

impl From<&DualModel> for ModelFile {
    fn from(m: &DualModel) -> Self {
        ModelFile {
            variant: m.variant,
            holdings: (0..m.banks()).map(|n| m.holdings.row(n).to_vec()).collect(),
            fingerprint: m.fingerprint.clone(),
            liquidation_net: NetFile::from(&m.liquidation_net),
            price_net: NetFile::from(&m.price_net),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<DualModel> {
        let holdings = Tensor::from_rows(&self.holdings)?;
        let mut model = DualModel::from_parts(
            self.variant,
            self.liquidation_net.into_net()?,
            self.price_net.into_net()?,
            holdings,
        )?;
        model.fingerprint = self.fingerprint;
        Ok(model)
    }
}
