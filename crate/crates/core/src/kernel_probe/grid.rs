//! Small seeded grid search over `C` and `γ` with k-fold cross-validation.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{predict_class, predict_value, resolve_gamma, train_svc, train_svr, GammaMode, TrainConfig};
use crate::linalg::Matrix;
use crate::{rng, Error, Result};

pub const GRID_C: [f64; 3] = [0.1, 1.0, 10.0];
/// Multipliers applied to the `scale` kernel width.
pub const GRID_GAMMA_FACTORS: [f64; 3] = [0.1, 1.0, 10.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeTask {
    Svc,
    Svr,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub c: f64,
    pub gamma: f64,
    /// Mean held-out accuracy (SVC) or negative mean squared error (SVR).
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub best: GridPoint,
    pub points: Vec<GridPoint>,
    pub folds: usize,
}

/// Evaluates every `(C, γ)` of the fixed grid with `folds`-fold CV and
/// returns the best (first wins on ties). `targets` are ±1 labels for
/// [`ProbeTask::Svc`] and real values for [`ProbeTask::Svr`].
pub fn grid_search(x: &Matrix, targets: &[f64], task: ProbeTask, base: &TrainConfig, folds: usize, seed: u64) -> Result<GridSearch> {
    let n = x.rows();
    if targets.len() != n {
        return Err(Error::LengthMismatch { left: n, right: targets.len() });
    }
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument("folds must lie in [2, n]".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let fold_of: Vec<usize> = {
        let mut f = alloc::vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            f[i] = pos % folds;
        }
        f
    };
    let scale = resolve_gamma(x, GammaMode::Scale)?.gamma;

    let mut points = Vec::new();
    for &c in &GRID_C {
        for &factor in &GRID_GAMMA_FACTORS {
            let gamma = scale * factor;
            let cfg = TrainConfig {
                c,
                gamma: GammaMode::Explicit(gamma),
                ..base.clone()
            };
            let mut total = 0.0;
            for k in 0..folds {
                let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != k).collect();
                let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == k).collect();
                let xt = x.select_rows(&train);
                let tt: Vec<f64> = train.iter().map(|&i| targets[i]).collect();
                total += match task {
                    ProbeTask::Svc => {
                        let model = match train_svc(&xt, &tt, &cfg) {
                            Ok(m) => m.with_classes("-1", "+1"),
                            // a fold with one class cannot be scored
                            Err(Error::SingleClass) => continue,
                            Err(e) => return Err(e),
                        };
                        let mut hits = 0usize;
                        for &i in &test {
                            let (label, _) = predict_class(&model, x.row(i))?;
                            let predicted = if label == "+1" { 1.0 } else { -1.0 };
                            hits += usize::from(predicted == targets[i]);
                        }
                        hits as f64 / test.len() as f64
                    }
                    ProbeTask::Svr => {
                        let model = train_svr(&xt, &tt, &cfg)?;
                        let mut se = 0.0;
                        for &i in &test {
                            let e = predict_value(&model, x.row(i))? - targets[i];
                            se += e * e;
                        }
                        -se / test.len() as f64
                    }
                };
            }
            points.push(GridPoint {
                c,
                gamma,
                score: total / folds as f64,
            });
        }
    }
    let best = points
        .iter()
        .copied()
        .fold(None::<GridPoint>, |acc, p| match acc {
            Some(b) if b.score >= p.score => Some(b),
            _ => Some(p),
        })
        .expect("grid is non-empty");
    Ok(GridSearch { best, points, folds })
}
