use std::collections::HashSet;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::agent::QNetwork;
use crate::env::{GameSpec, GameState};
use crate::error::{Error, Result};
use crate::text::{compose_observation_text, tokenize, EncoderMode, Which};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    /// Position along the walkthrough; 0 is the initial state.
    pub state: usize,
    pub seen: bool,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDump {
    pub dim: usize,
    pub rows: Vec<EmbeddingRow>,
}

impl EmbeddingDump {
    /// `state,seen,e0,...,e{d-1}` header followed by one line per row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("state,seen");
        for i in 0..self.dim {
            let _ = write!(s, ",e{i}");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{},{}", r.state, u8::from(r.seen));
            for v in &r.values {
                let _ = write!(s, ",{v:e}");
            }
            s.push('\n');
        }
        s
    }

    /// Parses the output of [`EmbeddingDump::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, what: &str| Error::Invalid(format!("embedding dump line {}: {what}", line + 1));
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(0, "missing header"))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 2 || cols[0] != "state" || cols[1] != "seen" {
            return Err(bad(0, "header must start with state,seen"));
        }
        let dim = cols.len() - 2;
        let mut rows = Vec::new();
        for (i, line) in lines {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != dim + 2 {
                return Err(bad(i, &format!("expected {} fields, found {}", dim + 2, cells.len())));
            }
            let state = cells[0].trim().parse().map_err(|_| bad(i, "bad state id"))?;
            let seen = match cells[1].trim() {
                "0" => false,
                "1" => true,
                _ => return Err(bad(i, "seen must be 0 or 1")),
            };
            let values = cells[2..]
                .iter()
                .map(|c| c.trim().parse::<f64>().map_err(|_| bad(i, &format!("bad number {c:?}"))))
                .collect::<Result<_>>()?;
            rows.push(EmbeddingRow { state, seen, values });
        }
        Ok(EmbeddingDump { dim, rows })
    }
}

/// `state,x,y` lines for the output of [`project_2d`].
pub fn projection_csv(points: &[(usize, f64, f64)]) -> String {
    let mut s = String::from("state,x,y\n");
    for (i, x, y) in points {
        let _ = writeln!(s, "{i},{x:e},{y:e}");
    }
    s
}

/// Replays the walkthrough of `spec` and encodes every observation along it
/// with the observation encoder. A state is marked seen iff its full
/// observation text is in `seen`.
pub fn export_embeddings(qnet: &QNetwork, spec: &Arc<GameSpec>, seen: &HashSet<&str>) -> Result<EmbeddingDump> {
    let walk = spec
        .walkthrough
        .as_ref()
        .ok_or_else(|| Error::Invalid("the game has no walkthrough".into()))?;
    let (mut state, mut res) = GameState::reset(spec.clone(), 0, false);
    let mut rows = Vec::with_capacity(walk.len() + 1);
    for i in 0..=walk.len() {
        let text = compose_observation_text(&res.observation, qnet.mode());
        let values = qnet.encode(&tokenize(&text, &qnet.vocab), Which::Observation)?;
        let full = compose_observation_text(&res.observation, EncoderMode::Base);
        rows.push(EmbeddingRow {
            state: i,
            seen: seen.contains(full.as_str()),
            values,
        });
        if i < walk.len() {
            res = state.step(&walk[i])?;
        }
    }
    Ok(EmbeddingDump {
        dim: qnet.hidden(),
        rows,
    })
}

const JACOBI_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric row-major `m x m` matrix by cyclic Jacobi
/// rotations. Returns eigenvalues and the matching eigenvectors as columns.
fn symmetric_eigen(mut a: Vec<f64>, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        v[i * m + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum();
    let rotate = |w: &mut [f64], i: usize, j: usize, c: f64, s: f64| {
        let (x, y) = (w[i], w[j]);
        w[i] = c * x - s * y;
        w[j] = s * x + c * y;
    };
    for _ in 0..JACOBI_SWEEPS {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| i * m + j))
            .map(|k| a[k] * a[k])
            .sum();
        if off <= f64::EPSILON * f64::EPSILON * scale {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..m {
                    rotate(&mut a, k * m + p, k * m + q, c, s);
                    rotate(&mut v, k * m + p, k * m + q, c, s);
                }
                for k in 0..m {
                    rotate(&mut a, p * m + k, q * m + k, c, s);
                }
            }
        }
    }
    ((0..m).map(|i| a[i * m + i]).collect(), v)
}

/// Mean-centers the rows and projects them on the top two principal
/// directions of their covariance.
pub fn project_2d(dump: &EmbeddingDump) -> Result<Vec<(usize, f64, f64)>> {
    let n = dump.rows.len();
    if n < 2 {
        return Err(Error::Invalid(format!("projection needs at least two rows, got {n}")));
    }
    let d = dump.dim;
    if let Some(r) = dump.rows.iter().find(|r| r.values.len() != d) {
        return Err(Error::Shape(format!("row {} has {} values, expected {d}", r.state, r.values.len())));
    }
    let mut mean = vec![0.0; d];
    for r in &dump.rows {
        mean.iter_mut().zip(&r.values).for_each(|(m, v)| *m += v / n as f64);
    }
    let centered: Vec<Vec<f64>> = dump
        .rows
        .iter()
        .map(|r| r.values.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    // eigen-decompose whichever of X^T X and X X^T is smaller
    let m = d.min(n);
    let mut gram = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let g = if d <= n {
                centered.iter().map(|x| x[i] * x[j]).sum::<f64>()
            } else {
                dot(&centered[i], &centered[j])
            } / n as f64;
            gram[i * m + j] = g;
            gram[j * m + i] = g;
        }
    }
    let (values, vectors) = symmetric_eigen(gram, m);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let direction = |k: usize| -> Vec<f64> {
        let Some(&col) = order.get(k) else {
            return vec![0.0; d];
        };
        let u: Vec<f64> = (0..m).map(|i| vectors[i * m + col]).collect();
        let mut v = if d <= n {
            u
        } else {
            (0..d).map(|j| centered.iter().zip(&u).map(|(x, w)| x[j] * w).sum()).collect()
        };
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        // deterministic sign: largest-magnitude entry positive
        let big = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if big < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    let (v1, v2) = (direction(0), direction(1));
    Ok(dump
        .rows
        .iter()
        .zip(&centered)
        .map(|(r, x)| (r.state, dot(x, &v1), dot(x, &v2)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dump(rows: Vec<Vec<f64>>) -> EmbeddingDump {
        EmbeddingDump {
            dim: rows[0].len(),
            rows: rows
                .into_iter()
                .enumerate()
                .map(|(i, values)| EmbeddingRow {
                    state: i,
                    seen: i % 2 == 0,
                    values,
                })
                .collect(),
        }
    }

    fn variance(p: &[(usize, f64, f64)]) -> (f64, f64) {
        let n = p.len() as f64;
        (
            p.iter().map(|r| r.1 * r.1).sum::<f64>() / n,
            p.iter().map(|r| r.2 * r.2).sum::<f64>() / n,
        )
    }

    #[test]
    fn collinear_points() {
        let rows = (0..6).map(|i| vec![i as f64, 2.0 * i as f64, -(i as f64)]).collect();
        let p = project_2d(&dump(rows)).unwrap();
        let (v1, v2) = variance(&p);
        assert!(v2 < 1e-8 * v1, "{v1} {v2}");
    }

    #[test]
    fn duplicates_project_identically() {
        let base = vec![vec![1.0, 0.0, 3.0], vec![0.0, 2.0, 1.0], vec![-1.0, 1.0, 0.5]];
        let mut rows = Vec::new();
        for r in &base {
            rows.push(r.clone());
            rows.push(r.clone());
        }
        let p = project_2d(&dump(rows)).unwrap();
        for pair in p.chunks(2) {
            assert_eq!((pair[0].1, pair[0].2), (pair[1].1, pair[1].2));
        }
    }

    #[test]
    fn too_few_rows() {
        assert!(project_2d(&dump(vec![vec![1.0, 2.0]])).is_err());
    }

    #[test]
    fn csv_layout() {
        let d = dump(vec![vec![0.5, -1.0], vec![2.0, 0.0]]);
        let csv = d.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "state,seen,e0,e1");
        assert_eq!(lines[1], "0,1,5e-1,-1e0");
        assert_eq!(lines[2].split(',').count(), 4);
    }

    #[test]
    fn csv_round_trip() {
        let d = dump(vec![vec![0.1, -1.0 / 3.0], vec![2.0e-300, 7.5]]);
        assert_eq!(EmbeddingDump::from_csv(&d.to_csv()).unwrap(), d);
        assert!(EmbeddingDump::from_csv("state,seen,e0\n0,2,1.0\n").is_err());
        assert!(EmbeddingDump::from_csv("state,seen,e0\n0,1\n").is_err());
        assert!(EmbeddingDump::from_csv("").is_err());
        let p = projection_csv(&[(0, 1.0, -0.5)]);
        assert_eq!(p, "state,x,y\n0,1e0,-5e-1\n");
    }
}
