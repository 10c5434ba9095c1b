//! Small per-site networks: a one-hidden-layer perceptron and a two-layer
//! convolutional baseline, both ending in two logits.

use ndarray::{Array2, Array4, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::nn::{relu, relu_backward, Adam, AdamConfig, Conv2d, Dense, Param, Parameterized};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "kebab-case")]
pub enum NetArch {
    Mlp { inputs: usize, hidden: usize },
    Cnn { patch_px: usize },
}

pub const CNN_CHANNELS: [usize; 2] = [8, 16];
pub const CNN_HIDDEN: usize = 32;

#[derive(Debug, Clone)]
pub struct SiteNet {
    pub arch: NetArch,
    convs: Vec<Conv2d<f32>>,
    dense: Vec<Dense<f32>>,
    acts: Vec<Array4<f32>>,
    hidden_act: Option<Array2<f32>>,
}

fn conv_out(n: usize) -> usize {
    (n + 2 - 3) / 2 + 1
}

impl SiteNet {
    pub fn new(arch: NetArch, rng_seed: u64) -> Self {
        let mut rng = seed::rng(rng_seed);
        let (convs, dense) = match arch {
            NetArch::Mlp { inputs, hidden } => (
                Vec::new(),
                vec![
                    Dense::new(inputs, hidden, &mut rng),
                    Dense::new(hidden, 2, &mut rng),
                ],
            ),
            NetArch::Cnn { patch_px } => {
                let s = conv_out(conv_out(patch_px));
                let c1 = Conv2d::new(1, CNN_CHANNELS[0], 3, 2, 1, &mut rng);
                let c2 = Conv2d::new(CNN_CHANNELS[0], CNN_CHANNELS[1], 3, 2, 1, &mut rng);
                let d1 = Dense::new(CNN_CHANNELS[1] * s * s, CNN_HIDDEN, &mut rng);
                let d2 = Dense::new(CNN_HIDDEN, 2, &mut rng);
                (vec![c1, c2], vec![d1, d2])
            }
        };
        Self {
            arch,
            convs,
            dense,
            acts: Vec::new(),
            hidden_act: None,
        }
    }

    pub fn input_len(&self) -> usize {
        match self.arch {
            NetArch::Mlp { inputs, .. } => inputs,
            NetArch::Cnn { patch_px } => patch_px * patch_px,
        }
    }

    fn features(&self, x: &Array2<f32>) -> Array2<f32> {
        match self.arch {
            NetArch::Mlp { .. } => x.clone(),
            NetArch::Cnn { patch_px } => {
                let n = x.nrows();
                let mut h = x
                    .clone()
                    .into_shape_with_order((n, 1, patch_px, patch_px))
                    .unwrap();
                for conv in &self.convs {
                    h = relu(&conv.infer(&h));
                }
                let flat = h.len() / n;
                h.into_shape_with_order((n, flat)).unwrap()
            }
        }
    }

    /// Two logits per row.
    pub fn infer(&self, x: &Array2<f32>) -> Array2<f32> {
        let f = self.features(x);
        let h = relu(&self.dense[0].infer(&f));
        self.dense[1].infer(&h)
    }

    pub fn forward(&mut self, x: &Array2<f32>) -> Array2<f32> {
        let f = match self.arch {
            NetArch::Mlp { .. } => x.clone(),
            NetArch::Cnn { patch_px } => {
                let n = x.nrows();
                let mut h = x
                    .clone()
                    .into_shape_with_order((n, 1, patch_px, patch_px))
                    .unwrap();
                self.acts.clear();
                for conv in &mut self.convs {
                    h = relu(&conv.forward(&h));
                    self.acts.push(h.clone());
                }
                let flat = h.len() / n;
                h.into_shape_with_order((n, flat)).unwrap()
            }
        };
        let h = relu(&self.dense[0].forward(&f));
        self.hidden_act = Some(h.clone());
        self.dense[1].forward(&h)
    }

    pub fn backward(&mut self, grad: &Array2<f32>) {
        let h = self.hidden_act.take().expect("backward without forward");
        let g = self.dense[1].backward(grad);
        let g = relu_backward(&h, &g);
        let g = self.dense[0].backward(&g);
        if !self.convs.is_empty() {
            let last = self.acts.last().unwrap();
            let mut g = g.into_shape_with_order(last.raw_dim()).unwrap();
            for i in (0..self.convs.len()).rev() {
                g = relu_backward(&self.acts[i], &g);
                g = self.convs[i].backward(&g);
            }
        }
    }
}

impl Parameterized<f32> for SiteNet {
    fn params(&self) -> Vec<&Param<f32>> {
        let mut v: Vec<&Param<f32>> = self.convs.iter().flat_map(|c| c.params()).collect();
        v.extend(self.dense.iter().flat_map(|d| d.params()));
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param<f32>> {
        let mut v: Vec<&mut Param<f32>> =
            self.convs.iter_mut().flat_map(|c| c.params_mut()).collect();
        v.extend(self.dense.iter_mut().flat_map(|d| d.params_mut()));
        v
    }
}

/// Per-feature affine standardisation fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        Self {
            mean,
            scale: var.into_iter().map(|v| 1.0 / v.sqrt().max(1e-6)).collect(),
        }
    }

    /// Shared scalar statistics over all features, which keeps the
    /// spatial structure that convolutions rely on.
    pub fn fit_global(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let all: Vec<f64> = rows.iter().flatten().copied().collect();
        let n = all.len().max(1) as f64;
        let m = all.iter().sum::<f64>() / n;
        let v = all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        Self {
            mean: vec![m; d],
            scale: vec![1.0 / v.sqrt().max(1e-6); d],
        }
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Array2<f32> {
        let d = self.mean.len();
        Array2::from_shape_fn((rows.len(), d), |(i, j)| {
            ((rows[i][j] - self.mean[j]) * self.scale[j]) as f32
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetTrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for NetTrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 32,
            max_epochs: 100,
            patience: 5,
            seed: 0,
        }
    }
}

impl NetTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::config("classifier.lr", "must be positive"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::config(
                "classifier.batch_size",
                "batch size and epochs must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetTrainStats {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub final_train_loss: f64,
}

fn softmax_ce(logits: &Array2<f32>, labels: &[u8]) -> (f64, Array2<f32>) {
    let n = logits.nrows() as f64;
    let mut grad = Array2::<f32>::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for (i, row) in logits.axis_iter(Axis(0)).enumerate() {
        let (a, b) = (row[0] as f64, row[1] as f64);
        let m = a.max(b);
        let lse = m + ((a - m).exp() + (b - m).exp()).ln();
        let y = labels[i] as usize;
        loss -= [a, b][y] - lse;
        for k in 0..2 {
            let p = ([a, b][k] - lse).exp();
            grad[[i, k]] = ((p - f64::from(k == y)) / n) as f32;
        }
    }
    (loss / n, grad)
}

pub fn accuracy(net: &SiteNet, x: &Array2<f32>, labels: &[u8]) -> f64 {
    let logits = net.infer(x);
    let correct = logits
        .axis_iter(Axis(0))
        .zip(labels)
        .filter(|(r, &l)| u8::from(r[1] > r[0]) == l)
        .count();
    correct as f64 / labels.len().max(1) as f64
}

/// Cross-entropy training with Adam, keeping the weights with the best
/// validation accuracy.
pub fn train_net(
    net: &mut SiteNet,
    x: &Array2<f32>,
    y: &[u8],
    val_x: &Array2<f32>,
    val_y: &[u8],
    cfg: &NetTrainConfig,
) -> Result<NetTrainStats> {
    cfg.validate()?;
    if y.is_empty() {
        return Err(Error::EmptySplit("classifier train".into()));
    }
    if val_y.is_empty() {
        return Err(Error::EmptySplit("classifier val".into()));
    }
    let mut adam = Adam::new(AdamConfig::default());
    let mut best = (accuracy(net, val_x, val_y), 0usize, net.flat_values());
    let mut since = 0;
    let mut last_loss = f64::NAN;
    let mut epochs_run = 0;
    let mut order: Vec<usize> = (0..y.len()).collect();
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut seed::rng(seed::derive(cfg.seed, epoch as u64)));
        let mut total = 0.0;
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let bx = x.select(Axis(0), batch);
            let by: Vec<u8> = batch.iter().map(|&i| y[i]).collect();
            net.zero_grad();
            let logits = net.forward(&bx);
            let (loss, g) = softmax_ce(&logits, &by);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            total += loss * batch.len() as f64;
            net.backward(&g);
            adam.step(net.params_mut(), cfg.lr);
        }
        last_loss = total / y.len() as f64;
        epochs_run = epoch + 1;
        let acc = accuracy(net, val_x, val_y);
        if acc > best.0 {
            best = (acc, epoch + 1, net.flat_values());
            since = 0;
        } else {
            since += 1;
            if since >= cfg.patience {
                break;
            }
        }
    }
    net.load_flat(&best.2).expect("same architecture");
    Ok(NetTrainStats {
        epochs_run,
        best_epoch: best.1,
        best_val_accuracy: best.0,
        final_train_loss: last_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_parameter_count_for_nine_by_nine() {
        let net = SiteNet::new(
            NetArch::Mlp {
                inputs: 81,
                hidden: 64,
            },
            0,
        );
        assert_eq!(net.num_params(), (81 * 64 + 64) + (64 * 2 + 2));
        assert_eq!(net.num_params(), 5378);
        let small = SiteNet::new(
            NetArch::Mlp {
                inputs: 82,
                hidden: 16,
            },
            0,
        );
        assert!(small.num_params() < net.num_params());
    }

    #[test]
    fn cnn_shapes_and_count() {
        let net = SiteNet::new(NetArch::Cnn { patch_px: 7 }, 0);
        let x = Array2::<f32>::zeros((3, 49));
        assert_eq!(net.infer(&x).dim(), (3, 2));
        // 7 -> 4 -> 2 spatial
        let want = (8 * 9 + 8) + (16 * 8 * 9 + 16) + (16 * 4 * 32 + 32) + (32 * 2 + 2);
        assert_eq!(net.num_params(), want);
    }

    fn separable(n: usize, d: usize) -> (Array2<f32>, Vec<u8>) {
        let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let x = Array2::from_shape_fn((n, d), |(i, j)| {
            let s = if y[i] == 1 { 1.0 } else { -1.0 };
            s * (1.0 + ((i * 7 + j * 3) % 5) as f32 * 0.1)
        });
        (x, y)
    }

    #[test]
    fn fnn_fits_separable_data() {
        let (x, y) = separable(200, 9);
        let mut net = SiteNet::new(
            NetArch::Mlp {
                inputs: 9,
                hidden: 64,
            },
            1,
        );
        train_net(&mut net, &x, &y, &x, &y, &NetTrainConfig::default()).unwrap();
        assert_eq!(accuracy(&net, &x, &y), 1.0);
    }

    #[test]
    fn cnn_fits_separable_data_and_is_deterministic() {
        let (x, y) = separable(120, 25);
        let mut a = SiteNet::new(NetArch::Cnn { patch_px: 5 }, 2);
        let mut b = SiteNet::new(NetArch::Cnn { patch_px: 5 }, 2);
        let cfg = NetTrainConfig {
            max_epochs: 20,
            ..NetTrainConfig::default()
        };
        train_net(&mut a, &x, &y, &x, &y, &cfg).unwrap();
        train_net(&mut b, &x, &y, &x, &y, &cfg).unwrap();
        assert_eq!(accuracy(&a, &x, &y), 1.0);
        assert_eq!(a.flat_values(), b.flat_values());
    }

    #[test]
    fn cnn_backward_matches_finite_difference() {
        let mut net = SiteNet::new(NetArch::Cnn { patch_px: 5 }, 3);
        let (x, y) = separable(4, 25);
        net.zero_grad();
        let (_, g) = softmax_ce(&net.forward(&x), &y);
        net.backward(&g);
        let analytic: Vec<f32> = net.params().iter().flat_map(|p| p.grad.clone()).collect();
        let base = net.flat_values();
        for &i in &[0usize, 40, 100, base.len() - 1] {
            let eps = 1e-2f32;
            let mut v = base.clone();
            v[i] += eps;
            net.load_flat(&v).unwrap();
            let up = softmax_ce(&net.infer(&x), &y).0;
            v[i] -= 2.0 * eps;
            net.load_flat(&v).unwrap();
            let down = softmax_ce(&net.infer(&x), &y).0;
            net.load_flat(&base).unwrap();
            let num = (up - down) / (2.0 * eps as f64);
            assert!(
                (num - analytic[i] as f64).abs() < 2e-3 + 0.05 * num.abs(),
                "{i}: {num} vs {}",
                analytic[i]
            );
        }
    }
}
