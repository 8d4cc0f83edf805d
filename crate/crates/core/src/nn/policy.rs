//! Tanh-squashed Gaussian policy head.
//!
//! The backbone emits `(mu, raw_log_std)` per observation. With
//! `u = mu + sigma * xi`, the action is `scale * tanh(u) + offset`, and the log
//! density includes the change-of-variables terms for both the tanh squash and
//! the affine rescaling.

use ndarray::{Array2, ArrayView2};

use super::dense::{DenseNet, ForwardCache};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Numerical guard in the squash correction and the inverse squash.
pub const EPS_NUM: f64 = 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPolicyHead {
    pub net: DenseNet,
    pub log_std_min: f64,
    pub log_std_max: f64,
    pub scale: f64,
    pub offset: f64,
}

/// Per-sample quantities of a batched reparameterized draw, kept for the
/// reverse pass.
#[derive(Clone, Debug)]
pub struct PolicyBatch {
    cache: ForwardCache,
    pub xi: Vec<f64>,
    pub sigma: Vec<f64>,
    /// 1 where the log-std clamp is inactive.
    clamp_open: Vec<bool>,
    /// Pre-scale action `tanh(u)`, in (-1, 1).
    pub squashed: Vec<f64>,
    /// Final action in environment units.
    pub action: Vec<f64>,
    pub log_prob: Vec<f64>,
}

fn squash_log_prob(xi: f64, log_std: f64, y: f64, scale: f64) -> f64 {
    -0.5 * xi * xi - log_std - HALF_LN_2PI - (1.0 - y * y + EPS_NUM).ln() - scale.ln()
}

impl GaussianPolicyHead {
    /// Backbone `obs_len -> hidden... -> 2` with a down-scaled final layer.
    pub fn init(obs_len: usize, hidden: &[usize], scale: f64, offset: f64, rng: &mut Rng) -> Self {
        let mut sizes = vec![obs_len];
        sizes.extend_from_slice(hidden);
        sizes.push(2);
        Self::from_net(DenseNet::init(&sizes, 0.01, rng), scale, offset)
    }

    pub fn from_net(net: DenseNet, scale: f64, offset: f64) -> Self {
        Self {
            net,
            log_std_min: LOG_STD_MIN,
            log_std_max: LOG_STD_MAX,
            scale,
            offset,
        }
    }

    fn head(&self, mu: f64, raw_log_std: f64) -> (f64, f64, bool) {
        let open = raw_log_std > self.log_std_min && raw_log_std < self.log_std_max;
        let log_std = raw_log_std.clamp(self.log_std_min, self.log_std_max);
        (mu, log_std, open)
    }

    /// Mean and clamped log-std for one observation.
    pub fn distribution(&self, obs: &[f64]) -> Result<(f64, f64)> {
        let out = self.net.forward(obs)?;
        let (mu, log_std, _) = self.head(out[0], out[1]);
        Ok((mu, log_std))
    }

    /// Reparameterized draw for one observation with explicit noise `xi`.
    pub fn sample_squashed(&self, obs: &[f64], xi: f64) -> Result<(f64, f64)> {
        let (mu, log_std) = self.distribution(obs)?;
        let u = mu + log_std.exp() * xi;
        let y = u.tanh();
        let action = self.scale * y + self.offset;
        Ok((action, squash_log_prob(xi, log_std, y, self.scale)))
    }

    /// Deterministic action: the squashed mean.
    pub fn mean_action(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.sample_squashed(obs, 0.0)?.0)
    }

    pub fn sample(&self, obs: &[f64], rng: &mut Rng) -> Result<(f64, f64)> {
        use rand::Rng as _;
        let xi: f64 = rng.sample(rand_distr::StandardNormal);
        self.sample_squashed(obs, xi)
    }

    /// Log density of an environment-unit action. Actions at or beyond the
    /// interval edge are nudged inward by [`EPS_NUM`] before inversion.
    pub fn log_prob(&self, obs: &[f64], action: f64) -> Result<f64> {
        if !action.is_finite() {
            return Err(Error::NonFinite("action"));
        }
        let (mu, log_std) = self.distribution(obs)?;
        let y = ((action - self.offset) / self.scale).clamp(-1.0 + EPS_NUM, 1.0 - EPS_NUM);
        let u = y.atanh();
        let xi = (u - mu) / log_std.exp();
        Ok(squash_log_prob(xi, log_std, y, self.scale))
    }

    /// Batched draw; `xi` holds one standard-normal value per row of `obs`.
    pub fn sample_batch(&self, obs: ArrayView2<'_, f64>, xi: &[f64]) -> Result<PolicyBatch> {
        if xi.len() != obs.nrows() {
            return Err(Error::Shape {
                expected: obs.nrows(),
                actual: xi.len(),
            });
        }
        let (out, cache) = self.net.forward_batch(obs)?;
        let n = xi.len();
        let mut batch = PolicyBatch {
            cache,
            xi: xi.to_vec(),
            sigma: Vec::with_capacity(n),
            clamp_open: Vec::with_capacity(n),
            squashed: Vec::with_capacity(n),
            action: Vec::with_capacity(n),
            log_prob: Vec::with_capacity(n),
        };
        for (row, &x) in out.outer_iter().zip(xi) {
            let (mu, log_std, open) = self.head(row[0], row[1]);
            let sigma = log_std.exp();
            let y = (mu + sigma * x).tanh();
            batch.sigma.push(sigma);
            batch.clamp_open.push(open);
            batch.squashed.push(y);
            batch.action.push(self.scale * y + self.offset);
            batch.log_prob.push(squash_log_prob(x, log_std, y, self.scale));
        }
        Ok(batch)
    }

    /// Parameter gradient of `sum_i d_squashed[i] * tanh(u_i) + d_log_prob[i] * log_prob_i`
    /// along the reparameterized path (noise held fixed).
    pub fn backward_batch(&self, batch: &PolicyBatch, d_squashed: &[f64], d_log_prob: &[f64]) -> Result<Vec<f64>> {
        let n = batch.xi.len();
        if d_squashed.len() != n || d_log_prob.len() != n {
            return Err(Error::Shape {
                expected: n,
                actual: d_squashed.len().min(d_log_prob.len()),
            });
        }
        let mut upstream = Array2::zeros((n, 2));
        for i in 0..n {
            let y = batch.squashed[i];
            let one_minus = 1.0 - y * y;
            // d log_prob / du through -ln(1 - tanh(u)^2 + eps)
            let dlogp_du = 2.0 * y * one_minus / (one_minus + EPS_NUM);
            let d_u = d_squashed[i] * one_minus + d_log_prob[i] * dlogp_du;
            upstream[[i, 0]] = d_u;
            if batch.clamp_open[i] {
                upstream[[i, 1]] = d_u * batch.sigma[i] * batch.xi[i] - d_log_prob[i];
            }
        }
        let mut grads = vec![0.0; self.net.params().len()];
        self.net.param_gradient(&batch.cache, upstream.view(), &mut grads)?;
        Ok(grads)
    }
}
