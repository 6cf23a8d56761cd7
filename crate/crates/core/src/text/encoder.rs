use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::gru::{GruParams, GruTrace};
use crate::nn::init;
use crate::nn::tensor::{GradBuffer, ParamId, ParamStore};
use crate::text::vocab::TokenSeq;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderMode {
    Base,
    MinOb,
    Hash,
}

impl EncoderMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderMode::Base => "base",
            EncoderMode::MinOb => "min-ob",
            EncoderMode::Hash => "hash",
        }
    }
}

impl fmt::Display for EncoderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncoderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(EncoderMode::Base),
            "min-ob" => Ok(EncoderMode::MinOb),
            "hash" => Ok(EncoderMode::Hash),
            other => Err(Error::Config(format!("unknown encoder mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub mode: EncoderMode,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            embed_dim: 64,
            hidden_dim: 128,
            mode: EncoderMode::Base,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        if !self.hidden_dim.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "hidden dimension must be even, got {}",
                self.hidden_dim
            )));
        }
        Ok(())
    }
}

/// Which of the two encoders a sequence goes through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Observation,
    Action,
}

/// Shared token embedding plus the two GRU encoders `f_o` and `f_a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextEncoders {
    pub embedding: ParamId,
    pub f_o: GruParams,
    pub f_a: GruParams,
}

/// Everything needed to back-propagate one encoded sequence.
#[derive(Debug, Clone)]
pub struct EncodeTrace {
    pub which: Which,
    tokens: TokenSeq,
    gru: GruTrace,
}

impl EncodeTrace {
    pub fn output(&self) -> &[f64] {
        self.gru.last().expect("non-empty sequence")
    }
}

impl TextEncoders {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        vocab_size: usize,
        config: &EncoderConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let (e, h) = (config.embed_dim, config.hidden_dim);
        // unit-variance uniform
        let embedding = store.add("embedding", init::uniform(vec![vocab_size, e], 3f64.sqrt(), rng)?)?;
        let f_o = GruParams::register(store, "f_o", e, h, rng)?;
        let f_a = GruParams::register(store, "f_a", e, h, rng)?;
        Ok(TextEncoders { embedding, f_o, f_a })
    }

    pub fn lookup(store: &ParamStore) -> Result<Self> {
        Ok(TextEncoders {
            embedding: store
                .id("embedding")
                .ok_or_else(|| Error::Checkpoint("missing parameter embedding".into()))?,
            f_o: GruParams::lookup(store, "f_o")?,
            f_a: GruParams::lookup(store, "f_a")?,
        })
    }

    pub fn gru(&self, which: Which) -> &GruParams {
        match which {
            Which::Observation => &self.f_o,
            Which::Action => &self.f_a,
        }
    }

    pub fn ids(&self) -> Vec<ParamId> {
        let mut v = vec![self.embedding];
        v.extend(self.f_o.ids());
        v.extend(self.f_a.ids());
        v
    }

    fn inputs<'a>(&self, store: &'a ParamStore, seq: &TokenSeq) -> Result<Vec<&'a [f64]>> {
        let emb = store.get(self.embedding);
        seq.iter()
            .map(|&t| {
                if (t as usize) < emb.rows() {
                    Ok(emb.row(t as usize))
                } else {
                    Err(Error::TokenOutOfRange {
                        id: t,
                        size: emb.rows(),
                    })
                }
            })
            .collect()
    }

    /// Embedding lookup followed by the GRU owned by `which`.
    pub fn encode(&self, store: &ParamStore, seq: &TokenSeq, which: Which) -> Result<Vec<f64>> {
        let xs = self.inputs(store, seq)?;
        self.gru(which).encode(store, &xs)
    }

    pub fn encode_traced(&self, store: &ParamStore, seq: &TokenSeq, which: Which) -> Result<EncodeTrace> {
        if seq.is_empty() {
            return Err(Error::EmptySequence("gru_encode"));
        }
        let xs = self.inputs(store, seq)?;
        let gru = self.gru(which);
        let trace = gru.forward_traced(store, &xs, &vec![0.0; gru.hidden])?;
        Ok(EncodeTrace {
            which,
            tokens: seq.clone(),
            gru: trace,
        })
    }

    /// Accumulates gradients of the encoder and the embedding rows it read.
    pub fn backward(&self, store: &ParamStore, trace: &EncodeTrace, d_out: &[f64], grads: &mut GradBuffer) {
        let gru = self.gru(trace.which);
        let e = gru.input;
        let mut d_emb: Vec<(u32, Vec<f64>)> = Vec::with_capacity(trace.tokens.len());
        gru.backward(
            store,
            &trace.gru,
            d_out.to_vec(),
            grads,
            |_, _| {},
            |t, dx| d_emb.push((trace.tokens[t], dx.to_vec())),
        );
        let slot = grads.slot(self.embedding);
        for (tok, dx) in d_emb {
            let row = &mut slot[tok as usize * e..(tok as usize + 1) * e];
            row.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (ParamStore, TextEncoders) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let enc = TextEncoders::register(&mut store, 20, &EncoderConfig::default(), &mut rng).unwrap();
        (store, enc)
    }

    #[test]
    fn shapes_and_separate_encoders() {
        let (store, enc) = setup();
        let seq = TokenSeq::new(vec![5, 6, 7]);
        let o = enc.encode(&store, &seq, Which::Observation).unwrap();
        let a = enc.encode(&store, &seq, Which::Action).unwrap();
        assert_eq!(o.len(), 128);
        assert_ne!(o, a);
        assert_eq!(o, enc.encode(&store, &seq, Which::Observation).unwrap());
    }

    #[test]
    fn traced_matches_plain() {
        let (store, enc) = setup();
        let seq = TokenSeq::new(vec![9, 1, 0, 4]);
        let t = enc.encode_traced(&store, &seq, Which::Action).unwrap();
        assert_eq!(t.output(), enc.encode(&store, &seq, Which::Action).unwrap().as_slice());
    }

    #[test]
    fn out_of_range_token() {
        let (store, enc) = setup();
        assert!(matches!(
            enc.encode(&store, &TokenSeq::new(vec![99]), Which::Observation),
            Err(Error::TokenOutOfRange { .. })
        ));
    }

    #[test]
    fn mode_parsing() {
        for m in [EncoderMode::Base, EncoderMode::MinOb, EncoderMode::Hash] {
            assert_eq!(m.as_str().parse::<EncoderMode>().unwrap(), m);
        }
        assert!("semantic".parse::<EncoderMode>().is_err());
    }
}
