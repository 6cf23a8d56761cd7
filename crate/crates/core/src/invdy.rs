//! Inverse-dynamics regularizer: decode the action from the representations
//! of the observations before and after it, reconstruct the action from its
//! own representation, and reuse the inverse loss as an exploration bonus.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, DecodeTrace, Decoder, GradBuffer, Mlp, MlpTrace, ParamStore, Tensor};
use crate::text::BOS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_inv: f64,
    pub lambda_dec: f64,
    /// Scale of the intrinsic reward added to the extrinsic one.
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_inv: 1.0,
            lambda_dec: 1.0,
            beta: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_inv", self.lambda_inv),
            ("lambda_dec", self.lambda_dec),
            ("beta", self.beta),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        Ok(())
    }
}

/// `td + lambda_inv * inv + lambda_dec * dec`
pub fn combined_loss(td: f64, inv: f64, dec: f64, w: &LossWeights) -> f64 {
    td + w.lambda_inv * inv + w.lambda_dec * dec
}

/// `g_inv: 2d -> d -> d` and the action decoder. The decoder reads its input
/// tokens from the shared embedding table, which lives with the encoders.
#[derive(Debug, Clone)]
pub struct InvDynHead {
    pub theta: ParamStore,
    pub g_inv: Mlp,
    pub decoder: Decoder,
}

pub(crate) struct InvTrace {
    mlp: MlpTrace,
    pub(crate) dec: DecodeTrace,
}

impl InvDynHead {
    pub fn new<R: Rng>(embed: usize, hidden: usize, vocab: usize, rng: &mut R) -> Result<Self> {
        let mut theta = ParamStore::new();
        let g_inv = Mlp::register(
            &mut theta,
            "g_inv",
            &[2 * hidden, hidden, hidden],
            Activation::Relu,
            Activation::Identity,
            rng,
        )?;
        let decoder = Decoder::register(&mut theta, "dec", embed, hidden, vocab, rng)?;
        Ok(InvDynHead { theta, g_inv, decoder })
    }

    pub fn from_store(theta: ParamStore) -> Result<Self> {
        let g_inv = Mlp::lookup(&theta, "g_inv", &[Activation::Relu, Activation::Identity])?;
        let decoder = Decoder::lookup(&theta, "dec")?;
        Ok(InvDynHead { theta, g_inv, decoder })
    }

    pub(crate) fn inv_forward(
        &self,
        embedding: &Tensor,
        o_repr: &[f64],
        o2_repr: &[f64],
        target: &[u32],
    ) -> Result<InvTrace> {
        let mut x = Vec::with_capacity(o_repr.len() + o2_repr.len());
        x.extend_from_slice(o_repr);
        x.extend_from_slice(o2_repr);
        let mlp = self.g_inv.forward_traced(&self.theta, &x)?;
        let dec = self.decoder.forward_traced(&self.theta, embedding, &mlp.output, target, BOS)?;
        Ok(InvTrace { mlp, dec })
    }

    /// Back-propagates `scale * log_prob` and returns the gradient with
    /// respect to `concat(o_repr, o2_repr)`.
    pub(crate) fn inv_backward(
        &self,
        trace: &InvTrace,
        scale: f64,
        grads: &mut GradBuffer,
        on_embed: impl FnMut(u32, &[f64]),
    ) -> Vec<f64> {
        let dh0 = self.decoder.backward(&self.theta, &trace.dec, scale, grads, on_embed);
        self.g_inv.backward(&self.theta, &trace.mlp, &dh0, grads)
    }

    pub(crate) fn dec_forward(&self, embedding: &Tensor, a_repr: &[f64], target: &[u32]) -> Result<DecodeTrace> {
        self.decoder.forward_traced(&self.theta, embedding, a_repr, target, BOS)
    }
}

/// `-log p(target | g_inv(concat(o_repr, o2_repr)))`. `target` is the
/// action tokens followed by EOS.
pub fn inv_loss(o_repr: &[f64], o2_repr: &[f64], target: &[u32], head: &InvDynHead, embedding: &Tensor) -> Result<f64> {
    Ok(-head.inv_forward(embedding, o_repr, o2_repr, target)?.dec.log_prob)
}

/// `-log p(target | a_repr)`.
pub fn dec_loss(a_repr: &[f64], target: &[u32], head: &InvDynHead, embedding: &Tensor) -> Result<f64> {
    Ok(-head.dec_forward(embedding, a_repr, target)?.log_prob)
}

/// Exploration bonus: the current inverse-dynamics loss of a transition.
pub fn intrinsic_reward(
    o_repr: &[f64],
    o2_repr: &[f64],
    target: &[u32],
    head: &InvDynHead,
    embedding: &Tensor,
) -> Result<f64> {
    inv_loss(o_repr, o2_repr, target, head, embedding)
}
