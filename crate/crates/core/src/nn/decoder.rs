//! Teacher-forced GRU decoder returning `log p(target | h0)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::gru::{GruParams, GruTrace};
use crate::nn::init;
use crate::nn::linalg::{log_sum_exp, matvec_add, matvec_t_add, outer_add};
use crate::nn::tensor::{GradBuffer, ParamId, ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decoder {
    pub gru: GruParams,
    /// Output projection `[vocab x hidden]`.
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub vocab: usize,
}

#[derive(Debug, Clone)]
pub struct DecodeTrace {
    gru: GruTrace,
    inputs: Vec<u32>,
    targets: Vec<u32>,
    probs: Vec<Vec<f64>>,
    pub log_prob: f64,
}

impl Decoder {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        embed: usize,
        hidden: usize,
        vocab: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let gru = GruParams::register(store, &format!("{prefix}.gru"), embed, hidden, rng)?;
        let out_w = store.add(
            format!("{prefix}.out.w"),
            init::fan_in(vec![vocab, hidden], hidden, rng)?,
        )?;
        let out_b = store.add(format!("{prefix}.out.b"), init::fan_in(vec![vocab], hidden, rng)?)?;
        Ok(Decoder {
            gru,
            out_w,
            out_b,
            vocab,
        })
    }

    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        let gru = GruParams::lookup(store, &format!("{prefix}.gru"))?;
        let get = |n: &str| {
            store
                .id(&format!("{prefix}.out.{n}"))
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {prefix}.out.{n}")))
        };
        let out_w = get("w")?;
        Ok(Decoder {
            gru,
            out_w,
            out_b: get("b")?,
            vocab: store.get(out_w).rows(),
        })
    }

    pub fn ids(&self) -> Vec<ParamId> {
        let mut v = self.gru.ids().to_vec();
        v.extend([self.out_w, self.out_b]);
        v
    }

    /// Runs the decoder with teacher forcing: the input at step 0 is `start`,
    /// at step `t > 0` it is `target[t - 1]`.
    pub fn forward_traced(
        &self,
        store: &ParamStore,
        embedding: &Tensor,
        h0: &[f64],
        target: &[u32],
        start: u32,
    ) -> Result<DecodeTrace> {
        if target.is_empty() {
            return Err(Error::EmptySequence("gru_decode_logprob"));
        }
        if let Some(&bad) = target.iter().find(|&&t| t as usize >= self.vocab) {
            return Err(Error::TokenOutOfRange {
                id: bad,
                size: self.vocab,
            });
        }
        let mut inputs = Vec::with_capacity(target.len());
        inputs.push(start);
        inputs.extend_from_slice(&target[..target.len() - 1]);
        if let Some(&bad) = inputs.iter().find(|&&t| t as usize >= embedding.rows()) {
            return Err(Error::TokenOutOfRange {
                id: bad,
                size: embedding.rows(),
            });
        }
        if embedding.cols() != self.gru.input {
            return Err(Error::Shape(format!(
                "embedding width {} does not match decoder input {}",
                embedding.cols(),
                self.gru.input
            )));
        }
        let xs: Vec<&[f64]> = inputs.iter().map(|&t| embedding.row(t as usize)).collect();
        let gru = self.gru.forward_traced(store, &xs, h0)?;
        let (v, h) = (self.vocab, self.gru.hidden);
        let mut probs = Vec::with_capacity(target.len());
        let mut log_prob = 0.0;
        for (ht, &tgt) in gru.hidden.iter().zip(target) {
            let mut logits = store.value(self.out_b).to_vec();
            matvec_add(store.value(self.out_w), v, h, ht, &mut logits);
            let lse = log_sum_exp(&logits);
            log_prob += logits[tgt as usize] - lse;
            probs.push(logits.iter().map(|l| (l - lse).exp()).collect());
        }
        Ok(DecodeTrace {
            gru,
            inputs,
            targets: target.to_vec(),
            probs,
            log_prob,
        })
    }

    /// Back-propagates `scale * log_prob`. Decoder parameter gradients go to
    /// `grads`; `on_embed(token, dx)` receives input-embedding gradients.
    /// Returns the gradient with respect to `h0`.
    pub fn backward(
        &self,
        store: &ParamStore,
        trace: &DecodeTrace,
        scale: f64,
        grads: &mut GradBuffer,
        mut on_embed: impl FnMut(u32, &[f64]),
    ) -> Vec<f64> {
        let (v, h) = (self.vocab, self.gru.hidden);
        let mut dlogits = vec![0.0; v];
        let mut dh_steps: Vec<Vec<f64>> = Vec::with_capacity(trace.targets.len());
        for (t, &tgt) in trace.targets.iter().enumerate() {
            for (d, p) in dlogits.iter_mut().zip(&trace.probs[t]) {
                *d = -scale * p;
            }
            dlogits[tgt as usize] += scale;
            outer_add(grads.slot(self.out_w), v, h, &dlogits, &trace.gru.hidden[t]);
            grads.slot(self.out_b).iter_mut().zip(&dlogits).for_each(|(g, d)| *g += d);
            let mut dh = vec![0.0; h];
            matvec_t_add(store.value(self.out_w), v, h, &dlogits, &mut dh);
            dh_steps.push(dh);
        }
        let inputs = &trace.inputs;
        self.gru.backward(
            store,
            &trace.gru,
            vec![0.0; h],
            grads,
            |t, dh| dh.iter_mut().zip(&dh_steps[t]).for_each(|(a, b)| *a += b),
            |t, dx| on_embed(inputs[t], dx),
        )
    }
}

/// `sum_t log softmax(logits_t)[target_t]` for a teacher-forced decode.
pub fn decode_logprob(
    decoder: &Decoder,
    store: &ParamStore,
    embedding: &Tensor,
    h0: &[f64],
    target: &[u32],
    start: u32,
) -> Result<f64> {
    Ok(decoder
        .forward_traced(store, embedding, h0, target, start)?
        .log_prob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_projection(vocab: usize) -> (ParamStore, Decoder, Tensor) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dec = Decoder::register(&mut store, "d", 3, 4, vocab, &mut rng).unwrap();
        store.get_mut(dec.out_w).values_mut().fill(0.0);
        store.get_mut(dec.out_b).values_mut().fill(0.0);
        let emb = init::uniform(vec![vocab.max(4), 3], 1.0, &mut rng).unwrap();
        (store, dec, emb)
    }

    #[test]
    fn single_token_vocab_is_certain() {
        let (store, dec, emb) = zero_projection(1);
        let lp = decode_logprob(&dec, &store, &emb, &[0.1; 4], &[0], 0).unwrap();
        assert_eq!(lp, 0.0);
    }

    #[test]
    fn uniform_logits_give_length_times_log_v() {
        let (store, dec, emb) = zero_projection(100);
        let lp = decode_logprob(&dec, &store, &emb, &[0.3; 4], &[17, 3], 2).unwrap();
        assert!((lp - 2.0 * (1.0f64 / 100.0).ln()).abs() < 1e-12);
        assert!((lp + 9.21034).abs() < 1e-5);
    }

    #[test]
    fn out_of_range_target() {
        let (store, dec, emb) = zero_projection(5);
        assert!(matches!(
            decode_logprob(&dec, &store, &emb, &[0.0; 4], &[9], 0),
            Err(Error::TokenOutOfRange { id: 9, size: 5 })
        ));
    }

    #[test]
    fn random_decoder_is_nonpositive() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dec = Decoder::register(&mut store, "d", 3, 4, 7, &mut rng).unwrap();
        let emb = init::uniform(vec![7, 3], 1.0, &mut rng).unwrap();
        for tgt in [[1u32, 2, 3], [6, 6, 0], [3, 0, 5]] {
            let lp = decode_logprob(&dec, &store, &emb, &[0.2, -0.1, 0.0, 0.5], &tgt, 2).unwrap();
            assert!(lp < 0.0 && lp.is_finite());
        }
    }
}
