//! GRU cell with update convention `h' = (1 - z) * h + z * h_tilde`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::init;
use crate::nn::linalg::{matvec_add, matvec_t_add, outer_add, sigmoid};
use crate::nn::tensor::{GradBuffer, ParamId, ParamStore};

/// Handles to the nine GRU parameter tensors inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruParams {
    pub w_z: ParamId,
    pub w_r: ParamId,
    pub w_h: ParamId,
    pub u_z: ParamId,
    pub u_r: ParamId,
    pub u_h: ParamId,
    pub b_z: ParamId,
    pub b_r: ParamId,
    pub b_h: ParamId,
    pub input: usize,
    pub hidden: usize,
}

/// Cached activations of one cell evaluation.
#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    h_tilde: Vec<f64>,
    rh: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct GruTrace {
    steps: Vec<StepCache>,
    /// Hidden state after every step.
    pub hidden: Vec<Vec<f64>>,
}

impl GruTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.hidden.last().map(Vec::as_slice)
    }
}

impl GruParams {
    /// Registers a fresh GRU under `prefix` with fan-in initialization
    /// Uniform(-1/sqrt(H), 1/sqrt(H)) on every tensor.
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut add = |name: &str, shape: Vec<usize>| {
            let t = init::fan_in(shape, hidden, rng)?;
            store.add(format!("{prefix}.{name}"), t)
        };
        Ok(GruParams {
            w_z: add("w_z", vec![hidden, input])?,
            w_r: add("w_r", vec![hidden, input])?,
            w_h: add("w_h", vec![hidden, input])?,
            u_z: add("u_z", vec![hidden, hidden])?,
            u_r: add("u_r", vec![hidden, hidden])?,
            u_h: add("u_h", vec![hidden, hidden])?,
            b_z: add("b_z", vec![hidden])?,
            b_r: add("b_r", vec![hidden])?,
            b_h: add("b_h", vec![hidden])?,
            input,
            hidden,
        })
    }

    /// Looks up an already registered GRU by prefix.
    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        let get = |name: &str| {
            store
                .id(&format!("{prefix}.{name}"))
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {prefix}.{name}")))
        };
        let w_z = get("w_z")?;
        let u_z = get("u_z")?;
        let shape = store.get(w_z).shape().to_vec();
        if shape.len() != 2 || store.get(u_z).shape() != [shape[0], shape[0]] {
            return Err(Error::Shape(format!("inconsistent GRU tensors under {prefix}")));
        }
        Ok(GruParams {
            w_z,
            w_r: get("w_r")?,
            w_h: get("w_h")?,
            u_z,
            u_r: get("u_r")?,
            u_h: get("u_h")?,
            b_z: get("b_z")?,
            b_r: get("b_r")?,
            b_h: get("b_h")?,
            input: shape[1],
            hidden: shape[0],
        })
    }

    pub fn ids(&self) -> [ParamId; 9] {
        [
            self.w_z, self.w_r, self.w_h, self.u_z, self.u_r, self.u_h, self.b_z, self.b_r,
            self.b_h,
        ]
    }

    fn check_params(&self, store: &ParamStore) -> Result<()> {
        let (e, h) = (self.input, self.hidden);
        for (id, shape) in [
            (self.w_z, vec![h, e]),
            (self.w_r, vec![h, e]),
            (self.w_h, vec![h, e]),
            (self.u_z, vec![h, h]),
            (self.u_r, vec![h, h]),
            (self.u_h, vec![h, h]),
            (self.b_z, vec![h]),
            (self.b_r, vec![h]),
            (self.b_h, vec![h]),
        ] {
            if store.get(id).shape() != shape.as_slice() {
                return Err(Error::Shape(format!(
                    "{} has shape {:?}, expected {shape:?}",
                    store.name(id),
                    store.get(id).shape()
                )));
            }
        }
        Ok(())
    }

    fn check_io(&self, x: &[f64], h: &[f64]) -> Result<()> {
        if x.len() != self.input || h.len() != self.hidden {
            return Err(Error::Shape(format!(
                "gru_step expects input {} and hidden {}, got {} and {}",
                self.input,
                self.hidden,
                x.len(),
                h.len()
            )));
        }
        Ok(())
    }

    fn forward_cell(&self, store: &ParamStore, x: &[f64], h_prev: &[f64]) -> StepCache {
        let (e, hs) = (self.input, self.hidden);
        let gate = |w: ParamId, u: ParamId, b: ParamId, hin: &[f64]| {
            let mut a = store.value(b).to_vec();
            matvec_add(store.value(w), hs, e, x, &mut a);
            matvec_add(store.value(u), hs, hs, hin, &mut a);
            a
        };
        let mut z = gate(self.w_z, self.u_z, self.b_z, h_prev);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut r = gate(self.w_r, self.u_r, self.b_r, h_prev);
        r.iter_mut().for_each(|v| *v = sigmoid(*v));
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        let mut h_tilde = gate(self.w_h, self.u_h, self.b_h, &rh);
        h_tilde.iter_mut().for_each(|v| *v = v.tanh());
        StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            z,
            r,
            h_tilde,
            rh,
        }
    }

    fn cell_output(c: &StepCache) -> Vec<f64> {
        c.z.iter()
            .zip(&c.h_prev)
            .zip(&c.h_tilde)
            .map(|((z, h), ht)| (1.0 - z) * h + z * ht)
            .collect()
    }

    /// One cell evaluation.
    pub fn step(&self, store: &ParamStore, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
        self.check_params(store)?;
        self.check_io(x, h_prev)?;
        Ok(Self::cell_output(&self.forward_cell(store, x, h_prev)))
    }

    /// Folds the cell over `inputs` from `h0`, keeping everything needed for
    /// [`GruParams::backward`].
    pub fn forward_traced(
        &self,
        store: &ParamStore,
        inputs: &[&[f64]],
        h0: &[f64],
    ) -> Result<GruTrace> {
        self.check_params(store)?;
        let mut trace = GruTrace::default();
        let mut h = h0.to_vec();
        for x in inputs {
            self.check_io(x, &h)?;
            let c = self.forward_cell(store, x, &h);
            h = Self::cell_output(&c);
            trace.steps.push(c);
            trace.hidden.push(h.clone());
        }
        Ok(trace)
    }

    /// Final hidden state after folding from `h0 = 0`.
    pub fn encode(&self, store: &ParamStore, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        if inputs.is_empty() {
            return Err(Error::EmptySequence("gru_encode"));
        }
        self.check_params(store)?;
        let mut h = vec![0.0; self.hidden];
        for x in inputs {
            self.check_io(x, &h)?;
            h = Self::cell_output(&self.forward_cell(store, x, &h));
        }
        Ok(h)
    }

    /// Back-propagation through time.
    ///
    /// `dh` is the gradient with respect to the final hidden state.
    /// `step_grad(t, dh)` may add the loss gradient flowing directly into the
    /// hidden state of step `t` (used by the decoder); `on_dx(t, dx)` receives
    /// the gradient with respect to input `t`. Returns the gradient with
    /// respect to `h0`.
    pub fn backward(
        &self,
        store: &ParamStore,
        trace: &GruTrace,
        mut dh: Vec<f64>,
        grads: &mut GradBuffer,
        mut step_grad: impl FnMut(usize, &mut [f64]),
        mut on_dx: impl FnMut(usize, &[f64]),
    ) -> Vec<f64> {
        let (e, hs) = (self.input, self.hidden);
        let mut da = vec![0.0; hs];
        let mut dx = vec![0.0; e];
        let mut drh = vec![0.0; hs];
        for t in (0..trace.steps.len()).rev() {
            step_grad(t, &mut dh);
            let c = &trace.steps[t];
            let mut dh_prev: Vec<f64> = dh.iter().zip(&c.z).map(|(g, z)| g * (1.0 - z)).collect();
            dx.iter_mut().for_each(|v| *v = 0.0);

            // candidate
            for i in 0..hs {
                let d_ht = dh[i] * c.z[i];
                da[i] = d_ht * (1.0 - c.h_tilde[i] * c.h_tilde[i]);
            }
            outer_add(grads.slot(self.w_h), hs, e, &da, &c.x);
            outer_add(grads.slot(self.u_h), hs, hs, &da, &c.rh);
            grads.slot(self.b_h).iter_mut().zip(&da).for_each(|(g, d)| *g += d);
            matvec_t_add(store.value(self.w_h), hs, e, &da, &mut dx);
            drh.iter_mut().for_each(|v| *v = 0.0);
            matvec_t_add(store.value(self.u_h), hs, hs, &da, &mut drh);
            for i in 0..hs {
                dh_prev[i] += drh[i] * c.r[i];
            }

            // update gate
            for i in 0..hs {
                let dz = dh[i] * (c.h_tilde[i] - c.h_prev[i]);
                da[i] = dz * c.z[i] * (1.0 - c.z[i]);
            }
            outer_add(grads.slot(self.w_z), hs, e, &da, &c.x);
            outer_add(grads.slot(self.u_z), hs, hs, &da, &c.h_prev);
            grads.slot(self.b_z).iter_mut().zip(&da).for_each(|(g, d)| *g += d);
            matvec_t_add(store.value(self.w_z), hs, e, &da, &mut dx);
            matvec_t_add(store.value(self.u_z), hs, hs, &da, &mut dh_prev);

            // reset gate
            for i in 0..hs {
                let dr = drh[i] * c.h_prev[i];
                da[i] = dr * c.r[i] * (1.0 - c.r[i]);
            }
            outer_add(grads.slot(self.w_r), hs, e, &da, &c.x);
            outer_add(grads.slot(self.u_r), hs, hs, &da, &c.h_prev);
            grads.slot(self.b_r).iter_mut().zip(&da).for_each(|(g, d)| *g += d);
            matvec_t_add(store.value(self.w_r), hs, e, &da, &mut dx);
            matvec_t_add(store.value(self.u_r), hs, hs, &da, &mut dh_prev);

            on_dx(t, &dx);
            dh = dh_prev;
        }
        dh
    }
}
