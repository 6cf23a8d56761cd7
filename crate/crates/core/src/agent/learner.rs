use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invdy::{combined_loss, InvDynHead, LossWeights};
use crate::nn::linalg::axpy;
use crate::nn::{adam_step, AdamConfig, AdamState, GradBuffer, Objective, ParamStore};
use crate::par::Exec;
use crate::text::{EncodeTrace, TokenSeq, Which};

use super::qnet::QNetwork;
use super::replay::{ReplayBuffer, Transition};

/// Work items per chunk in chunked reductions. Fixed so that results do not
/// depend on the thread count.
const CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub td: f64,
    pub inv: f64,
    pub dec: f64,
    pub total: f64,
}

/// `r + gamma * max_next`, or `r` at episode end.
pub fn td_target(reward: f64, gamma: f64, max_next: Option<f64>) -> f64 {
    match max_next {
        Some(m) => reward + gamma * m,
        None => reward,
    }
}

#[derive(Default)]
struct SeqTable {
    index: HashMap<TokenSeq, usize>,
    seqs: Vec<TokenSeq>,
}

impl SeqTable {
    fn add(&mut self, seq: &TokenSeq) -> usize {
        if let Some(&i) = self.index.get(seq) {
            return i;
        }
        self.seqs.push(seq.clone());
        self.index.insert(seq.clone(), self.seqs.len() - 1);
        self.seqs.len() - 1
    }
}

struct Row {
    o: usize,
    o2: usize,
    a: usize,
    next: Vec<usize>,
}

struct Encoded {
    reprs: Vec<Vec<f64>>,
    traces: Option<Vec<EncodeTrace>>,
}

#[derive(Default)]
struct HeadAcc {
    theta: Option<GradBuffer>,
    emb: Option<GradBuffer>,
    d_obs: Vec<(usize, Vec<f64>)>,
    d_act: Vec<(usize, Vec<f64>)>,
    inv: f64,
    dec: f64,
}

/// Q-network, optional inverse-dynamics head and their optimizers.
#[derive(Debug, Clone)]
pub struct Agent {
    pub qnet: QNetwork,
    pub head: Option<InvDynHead>,
    pub weights: LossWeights,
    pub exec: Exec,
    phi_opt: AdamState,
    theta_opt: Option<AdamState>,
}

impl Agent {
    pub fn new(qnet: QNetwork, head: Option<InvDynHead>, weights: LossWeights, adam: AdamConfig, exec: Exec) -> Result<Self> {
        weights.validate()?;
        if head.is_some() && qnet.encoders.is_none() {
            return Err(Error::Config("inverse dynamics needs trainable encoders".into()));
        }
        let phi_opt = AdamState::new(&qnet.phi, adam);
        let theta_opt = head.as_ref().map(|h| AdamState::new(&h.theta, adam));
        Ok(Agent {
            qnet,
            head,
            weights,
            exec,
            phi_opt,
            theta_opt,
        })
    }

    pub fn updates(&self) -> u64 {
        self.phi_opt.steps()
    }

    fn encode_table(&self, seqs: &[TokenSeq], which: Which) -> Result<Encoded> {
        let q = &self.qnet;
        match q.encoders.filter(|e| e.ids().iter().any(|&id| q.phi.is_trainable(id))) {
            None => {
                let reprs = self.exec.map(seqs, |s| q.encode(s, which)).into_iter().collect::<Result<_>>()?;
                Ok(Encoded { reprs, traces: None })
            }
            Some(enc) => {
                let traces: Vec<EncodeTrace> = self
                    .exec
                    .map(seqs, |s| enc.encode_traced(&q.phi, s, which))
                    .into_iter()
                    .collect::<Result<_>>()?;
                Ok(Encoded {
                    reprs: traces.iter().map(|t| t.output().to_vec()).collect(),
                    traces: Some(traces),
                })
            }
        }
    }

    /// Loss components and gradients for `phi` and (when present) `theta`.
    pub fn losses_and_grads(
        &self,
        batch: &[&Transition],
        gamma: f64,
    ) -> Result<(LossBreakdown, GradBuffer, Option<GradBuffer>)> {
        if batch.is_empty() {
            return Err(Error::Invalid("empty training batch".into()));
        }
        let q = &self.qnet;
        let d = q.hidden();
        let n = batch.len() as f64;

        let mut obs = SeqTable::default();
        let mut act = SeqTable::default();
        let rows: Vec<Row> = batch
            .iter()
            .map(|t| Row {
                o: obs.add(&t.obs),
                o2: obs.add(&t.next_obs),
                a: act.add(&t.action),
                next: if t.done {
                    Vec::new()
                } else {
                    t.next_actions.iter().map(|s| act.add(s)).collect()
                },
            })
            .collect();
        if let Some(i) = batch.iter().position(|t| !t.done && t.next_actions.is_empty()) {
            return Err(Error::Invalid(format!("transition {i} is not terminal but has no next actions")));
        }

        let eo = self.encode_table(&obs.seqs, Which::Observation)?;
        let ea = self.encode_table(&act.seqs, Which::Action)?;
        let po = self.exec.map(&eo.reprs, |r| q.project(r, Which::Observation));
        let pa = self.exec.map(&ea.reprs, |r| q.project(r, Which::Action));

        // TD part through the factored aggregator
        let l0 = &q.g.layers[0];
        let l1 = &q.g.layers[1];
        let w2 = q.phi.value(l1.w);
        let mut g_grads = GradBuffer::for_store(&q.phi);
        let mut dpo = vec![vec![0.0; d]; obs.seqs.len()];
        let mut dpa = vec![vec![0.0; d]; act.seqs.len()];
        let mut td = 0.0;
        {
            let mut db1 = vec![0.0; d];
            let mut dw2 = vec![0.0; d];
            let mut db2 = 0.0;
            for (row, t) in rows.iter().zip(batch) {
                let max_next = (!t.done).then(|| {
                    row.next
                        .iter()
                        .map(|&k| q.head(&po[row.o2], &pa[k]).0)
                        .fold(f64::NEG_INFINITY, f64::max)
                });
                let y = td_target(t.reward, gamma, max_next);
                let (qv, pre) = q.head(&po[row.o], &pa[row.a]);
                let resid = qv - y;
                td += resid * resid;
                let dq = 2.0 * resid / n;
                db2 += dq;
                for k in 0..d {
                    if pre[k] > 0.0 {
                        dw2[k] += dq * pre[k];
                        let dp = dq * w2[k];
                        db1[k] += dp;
                        dpo[row.o][k] += dp;
                        dpa[row.a][k] += dp;
                    }
                }
            }
            td /= n;
            g_grads.slot(l1.w).copy_from_slice(&dw2);
            g_grads.slot(l1.b)[0] = db2;
            g_grads.slot(l0.b).copy_from_slice(&db1);
        }
        let mut d_obs = vec![vec![0.0; d]; obs.seqs.len()];
        let mut d_act = vec![vec![0.0; d]; act.seqs.len()];
        {
            let dw1 = g_grads.slot(l0.w);
            for (off, dp, reprs) in [(0, &dpo, &eo.reprs), (d, &dpa, &ea.reprs)] {
                for (dpk, r) in dp.iter().zip(reprs) {
                    for (i, &g) in dpk.iter().enumerate() {
                        if g != 0.0 {
                            axpy(g, r, &mut dw1[i * 2 * d + off..i * 2 * d + off + d]);
                        }
                    }
                }
            }
        }
        for (k, dp) in dpo.iter().enumerate() {
            q.project_back(dp, Which::Observation, &mut d_obs[k]);
        }
        for (k, dp) in dpa.iter().enumerate() {
            q.project_back(dp, Which::Action, &mut d_act[k]);
        }

        // inverse dynamics and action reconstruction
        let mut inv = 0.0;
        let mut dec = 0.0;
        let mut theta_grads = None;
        let mut phi_grads = g_grads;
        if let (Some(head), Some(enc)) = (&self.head, &q.encoders) {
            let emb_t = q.phi.get(enc.embedding);
            let (si, sd) = (-self.weights.lambda_inv / n, -self.weights.lambda_dec / n);
            let row_step = |acc: &mut HeadAcc, row: &Row, t: &Transition| -> Result<()> {
                let theta = acc.theta.get_or_insert_with(|| GradBuffer::for_store(&head.theta));
                let emb = acc.emb.get_or_insert_with(|| GradBuffer::for_store(&q.phi));
                let target = t.action.with_eos();
                let tr = head.inv_forward(emb_t, &eo.reprs[row.o], &eo.reprs[row.o2], &target)?;
                acc.inv -= tr.dec.log_prob;
                if si != 0.0 {
                    let dx = head.inv_backward(&tr, si, theta, |tok, dx| scatter(emb, enc.embedding, tok, dx));
                    acc.d_obs.push((row.o, dx[..d].to_vec()));
                    acc.d_obs.push((row.o2, dx[d..].to_vec()));
                }
                let tr = head.dec_forward(emb_t, &ea.reprs[row.a], &target)?;
                acc.dec -= tr.log_prob;
                if sd != 0.0 {
                    let dh0 = head
                        .decoder
                        .backward(&head.theta, &tr, sd, theta, |tok, dx| scatter(emb, enc.embedding, tok, dx));
                    acc.d_act.push((row.a, dh0));
                }
                Ok(())
            };
            let items: Vec<(&Row, &Transition)> = rows.iter().zip(batch.iter().copied()).collect();
            let acc: Result<HeadAcc> = self.exec.fold_chunks(
                &items,
                CHUNK,
                || Ok(HeadAcc::default()),
                |slot, _, &(row, t)| {
                    if let Ok(a) = slot {
                        if let Err(e) = row_step(a, row, t) {
                            *slot = Err(e);
                        }
                    }
                },
                |acc, other| match other {
                    Err(e) => {
                        if acc.is_ok() {
                            *acc = Err(e);
                        }
                    }
                    Ok(b) => {
                        if let Ok(a) = acc {
                            merge(&mut a.theta, b.theta);
                            merge(&mut a.emb, b.emb);
                            a.d_obs.extend(b.d_obs);
                            a.d_act.extend(b.d_act);
                            a.inv += b.inv;
                            a.dec += b.dec;
                        }
                    }
                },
            );
            let acc = acc?;
            inv = acc.inv / n;
            dec = acc.dec / n;
            for (k, v) in acc.d_obs {
                d_obs[k].iter_mut().zip(&v).for_each(|(a, b)| *a += b);
            }
            for (k, v) in acc.d_act {
                d_act[k].iter_mut().zip(&v).for_each(|(a, b)| *a += b);
            }
            if let Some(e) = acc.emb {
                phi_grads.add_assign(e);
            }
            theta_grads = Some(acc.theta.unwrap_or_else(|| GradBuffer::for_store(&head.theta)));
        }

        // encoder backward, one trace per unique sequence
        if let Some(enc) = &q.encoders {
            for (enc_out, grads) in [(&eo, &d_obs), (&ea, &d_act)] {
                // frozen encoders keep no traces
                let Some(traces) = enc_out.traces.as_ref() else { continue };
                let work: Vec<(&EncodeTrace, &Vec<f64>)> = traces
                    .iter()
                    .zip(grads)
                    .filter(|(_, g)| g.iter().any(|v| *v != 0.0))
                    .collect();
                let buf = self.exec.fold_chunks(
                    &work,
                    CHUNK,
                    || None,
                    |acc: &mut Option<GradBuffer>, _, (tr, g)| {
                        let b = acc.get_or_insert_with(|| GradBuffer::for_store(&q.phi));
                        enc.backward(&q.phi, tr, g, b);
                    },
                    merge,
                );
                if let Some(b) = buf {
                    phi_grads.add_assign(b);
                }
            }
        }

        let losses = LossBreakdown {
            td,
            inv,
            dec,
            total: if self.head.is_some() {
                combined_loss(td, inv, dec, &self.weights)
            } else {
                td
            },
        };
        Ok((losses, phi_grads, theta_grads))
    }

    /// One optimizer update from an explicit batch.
    pub fn update(&mut self, batch: &[&Transition], gamma: f64) -> Result<LossBreakdown> {
        let (losses, gphi, gtheta) = self.losses_and_grads(batch, gamma)?;
        self.qnet.phi.apply_grads(&gphi);
        adam_step(&mut self.qnet.phi, &mut self.phi_opt);
        if let (Some(head), Some(opt), Some(g)) = (self.head.as_mut(), self.theta_opt.as_mut(), gtheta) {
            head.theta.apply_grads(&g);
            adam_step(&mut head.theta, opt);
        }
        Ok(losses)
    }

    /// Samples a batch and runs one update.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        buf: &ReplayBuffer,
        batch: usize,
        gamma: f64,
        rng: &mut R,
    ) -> Result<LossBreakdown> {
        let sample = buf.sample(batch, rng)?;
        self.update(&sample, gamma)
    }

    /// Intrinsic bonus for one transition, from its raw token sequences.
    pub fn intrinsic_reward(&self, obs: &TokenSeq, next_obs: &TokenSeq, action: &TokenSeq) -> Result<f64> {
        let (Some(head), Some(enc)) = (&self.head, &self.qnet.encoders) else {
            return Ok(0.0);
        };
        let q = &self.qnet;
        let o = q.encode(obs, Which::Observation)?;
        let o2 = q.encode(next_obs, Which::Observation)?;
        crate::invdy::intrinsic_reward(&o, &o2, &action.with_eos(), head, q.phi.get(enc.embedding))
    }
}

fn scatter(buf: &mut GradBuffer, id: crate::nn::ParamId, tok: u32, dx: &[f64]) {
    let e = dx.len();
    let slot = buf.slot(id);
    slot[tok as usize * e..(tok as usize + 1) * e]
        .iter_mut()
        .zip(dx)
        .for_each(|(a, b)| *a += b);
}

fn merge(acc: &mut Option<GradBuffer>, other: Option<GradBuffer>) {
    match (acc.as_mut(), other) {
        (Some(a), Some(b)) => a.add_assign(b),
        (None, b) => *acc = b,
        (Some(_), None) => {}
    }
}

/// Wraps an agent and a fixed batch as a scalar objective over `phi` and
/// `theta`, for finite-difference checks.
pub struct BatchObjective {
    pub agent: Agent,
    pub batch: Vec<Transition>,
    pub gamma: f64,
}

impl Objective for BatchObjective {
    fn stores(&self) -> Vec<&ParamStore> {
        let mut v = vec![&self.agent.qnet.phi];
        if let Some(h) = &self.agent.head {
            v.push(&h.theta);
        }
        v
    }

    fn store_mut(&mut self, index: usize) -> &mut ParamStore {
        match index {
            0 => &mut self.agent.qnet.phi,
            _ => &mut self.agent.head.as_mut().expect("theta store").theta,
        }
    }

    fn loss(&self) -> f64 {
        self.loss_and_grads().0
    }

    fn loss_and_grads(&self) -> (f64, Vec<GradBuffer>) {
        let refs: Vec<&Transition> = self.batch.iter().collect();
        let (l, gphi, gtheta) = self
            .agent
            .losses_and_grads(&refs, self.gamma)
            .expect("objective batch is valid");
        let mut grads = vec![gphi];
        grads.extend(gtheta);
        (l.total, grads)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::agent::qnet::td_loss;
    use crate::nn::gradcheck::{grad_check, spread_probes};
    use crate::text::{tokenize, EncoderConfig, EncoderMode, Vocab};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TEXTS: [&str; 6] = [
        "you are in a dark cave",
        "a narrow tunnel runs east",
        "you see a lamp",
        "take lamp",
        "go east",
        "open chest",
    ];

    fn agent(mode: EncoderMode, invdy: bool, weights: LossWeights, exec: Exec) -> Agent {
        let vocab = Arc::new(Vocab::build(TEXTS));
        let config = EncoderConfig {
            embed_dim: 5,
            hidden_dim: 4,
            mode,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let qnet = QNetwork::new(vocab.clone(), config, &mut rng).unwrap();
        let head = invdy.then(|| InvDynHead::new(5, 4, vocab.len(), &mut rng).unwrap());
        Agent::new(qnet, head, weights, AdamConfig::default(), exec).unwrap()
    }

    fn batch(a: &Agent) -> Vec<Transition> {
        let s = |t: &str| tokenize(t, &a.qnet.vocab);
        let acts: Arc<[TokenSeq]> = vec![s("take lamp"), s("go east"), s("open chest")].into();
        let mut out = Vec::new();
        for (i, (o, act, o2)) in [
            (TEXTS[0], "take lamp", TEXTS[2]),
            (TEXTS[2], "go east", TEXTS[1]),
            (TEXTS[1], "open chest", TEXTS[1]),
            (TEXTS[0], "take lamp", TEXTS[2]),
            (TEXTS[1], "go east", TEXTS[0]),
        ]
        .into_iter()
        .enumerate()
        {
            let done = i == 2;
            out.push(Transition {
                obs: s(o),
                action: s(act),
                reward: [0.0, 1.0, 5.0, 0.0, -0.5][i],
                extrinsic: [0.0, 1.0, 5.0, 0.0, 0.0][i],
                next_obs: s(o2),
                next_actions: if done { Arc::from(Vec::new()) } else { acts.clone() },
                done,
            });
        }
        out
    }

    fn refs(b: &[Transition]) -> Vec<&Transition> {
        b.iter().collect()
    }

    fn no_aux() -> LossWeights {
        LossWeights {
            lambda_inv: 0.0,
            lambda_dec: 0.0,
            beta: 0.0,
        }
    }

    #[test]
    fn td_matches_reference() {
        for mode in [EncoderMode::Base, EncoderMode::MinOb, EncoderMode::Hash] {
            let a = agent(mode, false, LossWeights::default(), Exec::Sequential);
            let b = batch(&a);
            let (l, _, theta) = a.losses_and_grads(&refs(&b), 0.9).unwrap();
            let reference = td_loss(&refs(&b), &a.qnet, 0.9).unwrap();
            assert!((l.td - reference).abs() < 1e-12, "{mode}: {} vs {reference}", l.td);
            assert_eq!(l.total, l.td);
            assert!(theta.is_none());
        }
    }

    #[test]
    fn zero_weights_leave_only_td() {
        let a = agent(EncoderMode::Base, true, no_aux(), Exec::Sequential);
        let b = batch(&a);
        let (l, _, theta) = a.losses_and_grads(&refs(&b), 0.9).unwrap();
        assert_eq!(l.total, l.td);
        assert!(l.inv > 0.0 && l.dec > 0.0);
        // the head still reports its losses but receives no gradient
        let theta = theta.unwrap();
        assert_eq!(theta.touched().count(), 0);
    }

    #[test]
    fn combined_total() {
        let a = agent(EncoderMode::Base, true, LossWeights::default(), Exec::Sequential);
        let b = batch(&a);
        let (l, _, _) = a.losses_and_grads(&refs(&b), 0.9).unwrap();
        assert!((l.total - (l.td + l.inv + l.dec)).abs() < 1e-12);
    }

    #[test]
    fn hash_gradients_touch_only_g() {
        let a = agent(EncoderMode::Hash, false, LossWeights::default(), Exec::Sequential);
        let b = batch(&a);
        let (_, g, _) = a.losses_and_grads(&refs(&b), 0.9).unwrap();
        let names: Vec<&str> = g.touched().map(|id| a.qnet.phi.name(id)).collect();
        assert!(!names.is_empty());
        assert!(names.iter().all(|n| n.starts_with("g.")), "{names:?}");
    }

    #[test]
    fn head_is_rejected_in_hash_mode() {
        let vocab = Arc::new(Vocab::build(TEXTS));
        let config = EncoderConfig {
            embed_dim: 5,
            hidden_dim: 4,
            mode: EncoderMode::Hash,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let qnet = QNetwork::new(vocab.clone(), config, &mut rng).unwrap();
        let head = InvDynHead::new(5, 4, vocab.len(), &mut rng).unwrap();
        assert!(Agent::new(qnet, Some(head), LossWeights::default(), AdamConfig::default(), Exec::Sequential).is_err());
    }

    #[test]
    fn every_network_gets_gradient() {
        let a = agent(EncoderMode::Base, true, LossWeights::default(), Exec::Sequential);
        let b = batch(&a);
        let (_, gphi, gtheta) = a.losses_and_grads(&refs(&b), 0.9).unwrap();
        let gtheta = gtheta.unwrap();
        for prefix in ["embedding", "f_o.", "f_a.", "g."] {
            let hit = a
                .qnet
                .phi
                .iter()
                .filter(|(_, n, _, _)| n.starts_with(prefix))
                .any(|(id, _, _, _)| gphi.max_abs(id) > 0.0);
            assert!(hit, "no gradient on {prefix}");
        }
        let head = a.head.as_ref().unwrap();
        for prefix in ["g_inv.", "dec."] {
            let hit = head
                .theta
                .iter()
                .filter(|(_, n, _, _)| n.starts_with(prefix))
                .any(|(id, _, _, _)| gtheta.max_abs(id) > 0.0);
            assert!(hit, "no gradient on {prefix}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (mode, invdy) in [(EncoderMode::Base, true), (EncoderMode::Hash, false)] {
            let a = agent(mode, invdy, LossWeights::default(), Exec::Sequential);
            // the bootstrap target is held constant, so only terminal rows
            // describe a differentiable function
            let mut b = batch(&a);
            for t in &mut b {
                t.done = true;
                t.next_actions = Arc::from(Vec::new());
            }
            let mut obj = BatchObjective {
                agent: a,
                batch: b,
                gamma: 0.9,
            };
            let probes = spread_probes(&obj.stores(), 6);
            let report = grad_check(&mut obj, &probes, 1e-5);
            assert!(report.max_rel_error < 1e-4, "{mode}: {:?}", report.per_param);
        }
    }

    #[test]
    fn frozen_encoders_get_no_gradient() {
        let mut a = agent(EncoderMode::Base, false, LossWeights::default(), Exec::Sequential);
        a.qnet.freeze_encoders();
        let before: Vec<Vec<f64>> = a.qnet.encoders.unwrap().ids().iter().map(|&id| a.qnet.phi.value(id).to_vec()).collect();
        let b = batch(&a);
        let (_, g, _) = a.losses_and_grads(&refs(&b), 0.9).unwrap();
        assert!(g.touched().all(|id| a.qnet.phi.name(id).starts_with("g.")));
        a.update(&refs(&b), 0.9).unwrap();
        let after: Vec<Vec<f64>> = a.qnet.encoders.unwrap().ids().iter().map(|&id| a.qnet.phi.value(id).to_vec()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn updates_reduce_loss_on_fixed_batch() {
        let mut a = agent(EncoderMode::Base, true, LossWeights::default(), Exec::Sequential);
        let adam = AdamConfig {
            lr: 1e-2,
            ..AdamConfig::default()
        };
        a.phi_opt = AdamState::new(&a.qnet.phi, adam);
        a.theta_opt = Some(AdamState::new(&a.head.as_ref().unwrap().theta, adam));
        let b = batch(&a);
        let first = a.update(&refs(&b), 0.9).unwrap().total;
        let mut last = first;
        for _ in 0..200 {
            last = a.update(&refs(&b), 0.9).unwrap().total;
        }
        assert_eq!(a.updates(), 201);
        assert!(last < 0.5 * first, "{first} -> {last}");
    }

    #[test]
    fn rejects_bad_batches() {
        let a = agent(EncoderMode::Base, false, LossWeights::default(), Exec::Sequential);
        assert!(a.losses_and_grads(&[], 0.9).is_err());
        let mut b = batch(&a);
        b[0].next_actions = Arc::from(Vec::new());
        assert!(a.losses_and_grads(&refs(&b), 0.9).is_err());
    }

    #[test]
    fn intrinsic_reward_needs_head() {
        let a = agent(EncoderMode::Base, false, LossWeights::default(), Exec::Sequential);
        let b = batch(&a);
        assert_eq!(a.intrinsic_reward(&b[0].obs, &b[0].next_obs, &b[0].action).unwrap(), 0.0);
        let a = agent(EncoderMode::Base, true, LossWeights::default(), Exec::Sequential);
        assert!(a.intrinsic_reward(&b[0].obs, &b[0].next_obs, &b[0].action).unwrap() > 0.0);
    }

    #[test]
    fn td_target_cases() {
        assert_eq!(td_target(1.0, 0.9, None), 1.0);
        assert_eq!(td_target(1.0, 0.5, Some(4.0)), 3.0);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_is_bitwise_sequential() {
        let mut s = agent(EncoderMode::Base, true, LossWeights::default(), Exec::Sequential);
        let mut p = agent(EncoderMode::Base, true, LossWeights::default(), Exec::Parallel);
        let mut b = batch(&s);
        // enough rows for several chunks
        for _ in 0..4 {
            b.extend(b.clone());
        }
        for _ in 0..3 {
            let ls = s.update(&refs(&b), 0.9).unwrap();
            let lp = p.update(&refs(&b), 0.9).unwrap();
            assert_eq!(ls.total.to_bits(), lp.total.to_bits());
        }
        assert_eq!(s.qnet.phi.snapshot(), p.qnet.phi.snapshot());
        assert_eq!(s.head.unwrap().theta.snapshot(), p.head.unwrap().theta.snapshot());
    }
}
