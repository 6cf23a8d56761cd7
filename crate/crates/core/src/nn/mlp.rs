use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::init;
use crate::nn::linalg::{matvec_add, matvec_t_add, outer_add};
use crate::nn::tensor::{GradBuffer, ParamId, ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `a` and output `y`.
    #[inline]
    pub fn derivative(self, a: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layer {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

/// Borrowed view of one affine layer: `(weight [out x in], bias [out], activation)`.
pub type LayerRef<'a> = (&'a Tensor, &'a [f64], Activation);

/// Composes affine maps and activations.
pub fn mlp_forward(x: &[f64], layers: &[LayerRef<'_>]) -> Result<Vec<f64>> {
    let mut h = x.to_vec();
    for (i, (w, b, act)) in layers.iter().enumerate() {
        let (rows, cols) = (w.rows(), w.cols());
        if w.shape().len() != 2 || cols != h.len() || b.len() != rows {
            return Err(Error::Shape(format!(
                "layer {i}: weight {:?}, bias {}, input {}",
                w.shape(),
                b.len(),
                h.len()
            )));
        }
        let mut y = b.to_vec();
        matvec_add(w.values(), rows, cols, &h, &mut y);
        y.iter_mut().for_each(|v| *v = act.apply(*v));
        h = y;
    }
    Ok(h)
}

#[derive(Debug, Clone)]
pub struct MlpTrace {
    /// Input of every layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of every layer.
    pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// Registers layers `dims[0] -> dims[1] -> ...` under `prefix`; every
    /// hidden layer uses `hidden_act`, the last one `out_act`.
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        dims: &[usize],
        hidden_act: Activation,
        out_act: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Shape("an MLP needs at least two dimensions".into()));
        }
        let mut layers = Vec::new();
        for (i, pair) in dims.windows(2).enumerate() {
            let (input, output) = (pair[0], pair[1]);
            let w = store.add(
                format!("{prefix}.{i}.w"),
                init::fan_in(vec![output, input], input, rng)?,
            )?;
            let b = store.add(format!("{prefix}.{i}.b"), init::fan_in(vec![output], input, rng)?)?;
            let activation = if i + 2 == dims.len() { out_act } else { hidden_act };
            layers.push(Layer {
                w,
                b,
                input,
                output,
                activation,
            });
        }
        Ok(Mlp { layers })
    }

    pub fn lookup(store: &ParamStore, prefix: &str, activations: &[Activation]) -> Result<Self> {
        let mut layers = Vec::new();
        for (i, &activation) in activations.iter().enumerate() {
            let get = |n: &str| {
                store
                    .id(&format!("{prefix}.{i}.{n}"))
                    .ok_or_else(|| Error::Checkpoint(format!("missing parameter {prefix}.{i}.{n}")))
            };
            let w = get("w")?;
            let b = get("b")?;
            let t = store.get(w);
            layers.push(Layer {
                w,
                b,
                input: t.cols(),
                output: t.rows(),
                activation,
            });
        }
        Ok(Mlp { layers })
    }

    pub fn ids(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| [l.w, l.b]).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.output).unwrap_or(0)
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> Result<Vec<f64>> {
        let refs: Vec<LayerRef<'_>> = self
            .layers
            .iter()
            .map(|l| (store.get(l.w), store.value(l.b), l.activation))
            .collect();
        mlp_forward(x, &refs)
    }

    pub fn forward_traced(&self, store: &ParamStore, x: &[f64]) -> Result<MlpTrace> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "MLP input {} expected {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for l in &self.layers {
            let mut a = store.value(l.b).to_vec();
            matvec_add(store.value(l.w), l.output, l.input, &h, &mut a);
            let y = a.iter().map(|v| l.activation.apply(*v)).collect();
            inputs.push(std::mem::replace(&mut h, y));
            pre.push(a);
        }
        Ok(MlpTrace {
            inputs,
            pre,
            output: h,
        })
    }

    /// Accumulates parameter gradients given `dy = dL/d output` and returns
    /// `dL/d input`.
    pub fn backward(
        &self,
        store: &ParamStore,
        trace: &MlpTrace,
        dy: &[f64],
        grads: &mut GradBuffer,
    ) -> Vec<f64> {
        let mut g = dy.to_vec();
        for (k, l) in self.layers.iter().enumerate().rev() {
            let out = if k + 1 == self.layers.len() {
                &trace.output
            } else {
                &trace.inputs[k + 1]
            };
            for ((gi, a), y) in g.iter_mut().zip(&trace.pre[k]).zip(out) {
                *gi *= l.activation.derivative(*a, *y);
            }
            outer_add(grads.slot(l.w), l.output, l.input, &g, &trace.inputs[k]);
            grads.slot(l.b).iter_mut().zip(&g).for_each(|(d, s)| *d += s);
            let mut dx = vec![0.0; l.input];
            matvec_t_add(store.value(l.w), l.output, l.input, &g, &mut dx);
            g = dx;
        }
        g
    }
}
