use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semprobe::agent::train::{game_vocab, init_agent, seen_texts};
use semprobe::agent::{run_training, Variant};
use semprobe::config::desk_config;
use semprobe::env::fixtures::fixture;
use semprobe::experiments::{export_embeddings, project_2d, EmbeddingDump, EmbeddingRow};
use semprobe::par::Exec;

fn random_dump(n: usize, d: usize, seed: u64) -> EmbeddingDump {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EmbeddingDump {
        dim: d,
        rows: (0..n)
            .map(|i| EmbeddingRow {
                state: i,
                seen: false,
                values: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect(),
    }
}

#[test]
fn projection_matches_eigensolver() {
    for (seed, (n, d)) in [(10, 128), (10, 128), (40, 8), (9, 9)].into_iter().enumerate() {
        let dump = random_dump(n, d, seed as u64);
        let (n, d) = (dump.rows.len(), dump.dim);
        let mut x = DMatrix::from_fn(n, d, |i, j| dump.rows[i].values[j]);
        for j in 0..d {
            let m = x.column(j).mean();
            x.column_mut(j).add_scalar_mut(-m);
        }
        let cov = x.transpose() * &x / n as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);

        let p = project_2d(&dump).unwrap();
        let var = |f: fn(&(usize, f64, f64)) -> f64| p.iter().map(|q| f(q).powi(2)).sum::<f64>() / n as f64;
        let (v1, v2) = (var(|q| q.1), var(|q| q.2));
        assert!(v1 >= v2);
        assert!((v1 - l1).abs() < 1e-6, "{v1} vs {l1}");
        assert!((v2 - l2).abs() < 1e-6, "{v2} vs {l2}");

        // coordinates agree with the oracle's directions up to sign
        for (k, col) in [(0, order[0]), (1, order[1])] {
            let oracle = &x * eig.eigenvectors.column(col);
            let ours: Vec<f64> = p.iter().map(|q| if k == 0 { q.1 } else { q.2 }).collect();
            let dot: f64 = ours.iter().zip(oracle.iter()).map(|(a, b)| a * b).sum();
            let norms = ours.iter().map(|a| a * a).sum::<f64>().sqrt() * oracle.norm();
            assert!((dot.abs() / norms - 1.0).abs() < 1e-6, "component {k}");
        }
    }
}

#[test]
fn projection_is_reproducible() {
    let dump = random_dump(12, 16, 5);
    assert_eq!(project_2d(&dump).unwrap(), project_2d(&dump).unwrap());
}

#[test]
fn walkthrough_dump_shape() {
    let spec = fixture("treasure-hunt").unwrap();
    for v in Variant::ALL {
        let mut c = desk_config();
        c.set_variant(v);
        let agent = init_agent(Arc::new(game_vocab(&spec)), &c, Exec::Sequential).unwrap();
        let dump = export_embeddings(&agent.qnet, &spec, &HashSet::new()).unwrap();
        assert_eq!(dump.rows.len(), 11);
        assert!(dump.rows.iter().all(|r| r.values.len() == c.hidden_dim && !r.seen));
        assert_eq!(dump.dim, c.hidden_dim);
        let states: Vec<usize> = dump.rows.iter().map(|r| r.state).collect();
        assert_eq!(states, (0..11).collect::<Vec<_>>());
    }
}

#[test]
fn hash_dump_repeats_identical_states() {
    let spec = fixture("treasure-hunt").unwrap();
    let mut c = desk_config();
    c.set_variant(Variant::Hash);
    let agent = init_agent(Arc::new(game_vocab(&spec)), &c, Exec::Sequential).unwrap();
    let a = export_embeddings(&agent.qnet, &spec, &HashSet::new()).unwrap();
    let b = export_embeddings(&agent.qnet, &spec, &HashSet::new()).unwrap();
    assert_eq!(a, b);
    let mut dup = a.clone();
    dup.rows.extend(a.rows.clone());
    let p = project_2d(&dup).unwrap();
    for i in 0..a.rows.len() {
        assert_eq!((p[i].1, p[i].2), (p[i + a.rows.len()].1, p[i + a.rows.len()].2));
    }
}

#[test]
fn seen_labels_follow_the_training_log() {
    let spec = fixture("treasure-hunt").unwrap();
    let mut c = desk_config();
    c.total_steps = 400;
    let out = run_training(&spec, &c).unwrap();
    let seen = seen_texts(&out.log);
    let dump = export_embeddings(&out.agent.qnet, &spec, &seen).unwrap();
    assert!(dump.rows[0].seen);
    let everything: HashSet<&str> = HashSet::new();
    let none = export_embeddings(&out.agent.qnet, &spec, &everything).unwrap();
    assert!(none.rows.iter().all(|r| !r.seen));
    assert_eq!(
        none.rows.iter().map(|r| &r.values).collect::<Vec<_>>(),
        dump.rows.iter().map(|r| &r.values).collect::<Vec<_>>()
    );
}

#[test]
fn no_walkthrough_is_an_error() {
    let spec = semprobe::env::parse_game_spec(
        r#"{"rooms": [{"id": "r", "name": "Room", "description": "A room."}], "max_score": 0}"#,
    )
    .unwrap();
    let c = desk_config();
    let agent = init_agent(Arc::new(game_vocab(&spec)), &c, Exec::Sequential).unwrap();
    assert!(export_embeddings(&agent.qnet, &spec, &HashSet::new()).is_err());
}
