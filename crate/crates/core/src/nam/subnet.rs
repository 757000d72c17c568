use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::{gcu, gcu_with_derivative};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Hidden architecture of one single-input, single-output subnet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubnetSpec {
    pub hidden_widths: Vec<usize>,
    #[serde(default)]
    pub dropout: f64,
}

/// Architecture presets used in the model-selection study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Model1,
    Model2,
    Model3,
    Model4,
}

impl Preset {
    pub fn widths(self) -> &'static [usize] {
        match self {
            Preset::Model1 => &[64, 128, 64],
            Preset::Model2 => &[128, 256, 64],
            Preset::Model3 => &[256, 512, 256, 128],
            Preset::Model4 => &[512, 1024, 512, 256, 128],
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "model1" | "m1" => Some(Preset::Model1),
            "model2" | "m2" => Some(Preset::Model2),
            "model3" | "m3" => Some(Preset::Model3),
            "model4" | "m4" => Some(Preset::Model4),
            _ => None,
        }
    }
}

impl SubnetSpec {
    pub fn new(hidden_widths: Vec<usize>, dropout: f64) -> Result<Self> {
        let spec = SubnetSpec {
            hidden_widths,
            dropout,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn preset(p: Preset, dropout: f64) -> Self {
        SubnetSpec {
            hidden_widths: p.widths().to_vec(),
            dropout,
        }
    }

    /// `model1`..`model4` or a dash/comma separated width list like `64-128-64`.
    pub fn parse_arch(s: &str, dropout: f64) -> Result<Self> {
        if let Some(p) = Preset::parse(s.trim()) {
            return Self::new(p.widths().to_vec(), dropout);
        }
        let widths = s
            .split(['-', ',', ' '])
            .filter(|w| !w.is_empty())
            .map(|w| w.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse(format!("architecture '{s}'"), "expected widths"))?;
        Self::new(widths, dropout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return Err(Error::config(
                "subnet needs at least one hidden layer and every width >= 1",
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Canonical width label, e.g. `64-128-64`.
    pub fn arch_label(&self) -> String {
        self.hidden_widths
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// Training-set range of a covariate; inputs are mapped to [0, 1] with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputBounds {
    pub lo: f64,
    pub hi: f64,
}

impl InputBounds {
    pub const UNIT: InputBounds = InputBounds { lo: 0.0, hi: 1.0 };

    #[inline]
    pub fn rescale(&self, x: f64) -> f64 {
        let span = self.hi - self.lo;
        if span > 0.0 {
            (x - self.lo) / span
        } else {
            x - self.lo
        }
    }
}

/// Affine layer, weights stored `(out, in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DenseRepr", into = "DenseRepr")]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Serialize, Deserialize)]
struct DenseRepr {
    shape: [usize; 2],
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl From<Dense> for DenseRepr {
    fn from(d: Dense) -> Self {
        let shape = [d.weights.nrows(), d.weights.ncols()];
        DenseRepr {
            shape,
            weights: d.weights.iter().copied().collect(),
            bias: d.bias.to_vec(),
        }
    }
}

impl TryFrom<DenseRepr> for Dense {
    type Error = String;

    fn try_from(r: DenseRepr) -> std::result::Result<Self, String> {
        let [out, inp] = r.shape;
        if r.bias.len() != out {
            return Err(format!("bias length {} != {out}", r.bias.len()));
        }
        let weights = Array2::from_shape_vec((out, inp), r.weights).map_err(|e| e.to_string())?;
        Ok(Dense {
            weights,
            bias: Array1::from(r.bias),
        })
    }
}

impl Dense {
    fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let a = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((outputs, inputs), || rng.random_range(-a..a));
        Dense {
            weights,
            bias: Array1::zeros(outputs),
        }
    }

    fn affine(&self, a: &ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = a.dot(&self.weights.t());
        z += &self.bias;
        z
    }
}

/// Intermediate values of one batched forward pass.
#[derive(Debug, Clone)]
pub struct SubnetCache {
    /// `acts[0]` is the rescaled input column; `acts[l]` is hidden layer `l`'s output.
    acts: Vec<Array2<f64>>,
    /// Local gradient g'(z) times the dropout scale, per hidden layer.
    local_grad: Vec<Array2<f64>>,
    /// Output without the final bias, one entry per row.
    pub out: Array1<f64>,
}

/// Gradient with the parameter layout of a [`Subnet`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubnetGradients {
    pub layers: Vec<Dense>,
}

/// f_k: rescale, GCU hidden layers, affine output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subnet {
    pub spec: SubnetSpec,
    pub bounds: InputBounds,
    pub layers: Vec<Dense>,
}

impl Subnet {
    pub fn new<R: Rng + ?Sized>(spec: SubnetSpec, bounds: InputBounds, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut dims = vec![1];
        dims.extend(&spec.hidden_widths);
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| Dense::glorot(w[0], w[1], rng))
            .collect();
        Ok(Subnet {
            spec,
            bounds,
            layers,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let mut dims = vec![1];
        dims.extend(&self.spec.hidden_widths);
        dims.push(1);
        if self.layers.len() + 1 != dims.len() {
            return Err(Error::config("layer count does not match spec"));
        }
        for (l, w) in self.layers.iter().zip(dims.windows(2)) {
            if l.weights.dim() != (w[1], w[0]) || l.bias.len() != w[1] {
                return Err(Error::config("layer shapes do not chain"));
            }
            if l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::config("non-finite parameter"));
            }
        }
        Ok(())
    }

    pub fn output_bias(&self) -> f64 {
        self.layers.last().expect("subnet has layers").bias[0]
    }

    pub fn output_bias_mut(&mut self) -> &mut f64 {
        &mut self.layers.last_mut().expect("subnet has layers").bias[0]
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Batched forward over raw covariate values. Dropout is applied to the
    /// hidden activations when `dropout` is given and the rate is positive.
    pub fn forward(&self, xs: &[f64], dropout: Option<&mut StreamRng>, keep_grad: bool) -> SubnetCache {
        let n = xs.len();
        let input = Array2::from_shape_fn((n, 1), |(i, _)| self.bounds.rescale(xs[i]));
        let hidden = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(hidden + 1);
        let mut local_grad = Vec::with_capacity(if keep_grad { hidden } else { 0 });
        acts.push(input);
        let rate = self.spec.dropout;
        let mut rng = dropout.filter(|_| rate > 0.0);
        let keep = 1.0 / (1.0 - rate);
        for layer in &self.layers[..hidden] {
            let mut z = layer.affine(&acts.last().unwrap().view());
            let mut mask = rng.as_deref_mut().map(|r| {
                Array2::from_shape_simple_fn(z.dim(), || {
                    if r.random::<f64>() < rate {
                        0.0
                    } else {
                        keep
                    }
                })
            });
            if keep_grad {
                let mut d = Array2::zeros(z.dim());
                Zip::from(&mut z).and(&mut d).for_each(|z, d| {
                    let (v, g) = gcu_with_derivative(*z);
                    *z = v;
                    *d = g;
                });
                if let Some(m) = &mask {
                    d *= m;
                }
                local_grad.push(d);
            } else {
                z.mapv_inplace(gcu);
            }
            if let Some(m) = mask.take() {
                z *= &m;
            }
            acts.push(z);
        }
        let last = self.layers.last().unwrap();
        let out = acts.last().unwrap().dot(&last.weights.row(0));
        SubnetCache {
            acts,
            local_grad,
            out,
        }
    }

    /// Eval-mode outputs f_k(x), final bias included.
    pub fn evaluate(&self, xs: &[f64]) -> Vec<f64> {
        let b = self.output_bias();
        self.forward(xs, None, false)
            .out
            .iter()
            .map(|v| v + b)
            .collect()
    }

    /// Backpropagates `grad_out` (d loss / d output per row) through a
    /// forward cache built with `keep_grad`. Rows `..split` and `split..` are
    /// reduced separately and then added, so two row blocks that mirror each
    /// other with opposite signs cancel exactly.
    pub fn backward(&self, cache: &SubnetCache, grad_out: &[f64], split: usize) -> SubnetGradients {
        let n = grad_out.len();
        assert_eq!(n, cache.out.len(), "gradient rows must match the forward batch");
        assert_eq!(cache.local_grad.len() + 1, self.layers.len(), "forward cache lacks gradients");
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut dz = Array2::from_shape_fn((n, 1), |(i, _)| grad_out[i]);
        for li in (0..self.layers.len()).rev() {
            let a_prev = &cache.acts[li];
            let (dz0, dz1) = (dz.slice(s![..split, ..]), dz.slice(s![split.., ..]));
            let (a0, a1) = (a_prev.slice(s![..split, ..]), a_prev.slice(s![split.., ..]));
            let weights = (dz0.t().dot(&a0) + dz1.t().dot(&a1))
                .as_standard_layout()
                .into_owned();
            let bias = dz0.sum_axis(Axis(0)) + dz1.sum_axis(Axis(0));
            grads.push(Dense { weights, bias });
            if li > 0 {
                let mut da = dz.dot(&self.layers[li].weights);
                da *= &cache.local_grad[li - 1];
                dz = da;
            }
        }
        grads.reverse();
        SubnetGradients { layers: grads }
    }
}

impl SubnetGradients {
    pub fn zeros_like(net: &Subnet) -> Self {
        SubnetGradients {
            layers: net
                .layers
                .iter()
                .map(|l| Dense {
                    weights: Array2::zeros(l.weights.dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }
}
