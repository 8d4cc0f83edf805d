//! Augmented-Lagrangian actor objective and dual-variable updates.
//!
//! For a batch of states with reparameterized actions `a = a_theta(s, xi)`:
//!
//! ```text
//! L = E[min Q] + alpha * (-H - E[log pi]) + lambda * (J_c - E[min Q_c])
//!     - (rho / 2) * max(0, E[min Q_c] - J_c)^2
//! ```
//!
//! The quadratic term is one-sided so that staying under budget is never
//! penalized. `rho` defaults to the multiplier step size `lambda_lr`.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::critic::{with_action, CriticEnsemble};
use crate::error::{Error, Result};
use crate::nn::{GaussianPolicyHead, PolicyBatch};

/// Direction convention for the multiplier updates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualSign {
    /// Ascent on constraint residuals: alpha grows on an entropy deficit,
    /// lambda grows on a cost excess.
    #[default]
    Residual,
    /// Literal gradient ascent on `L` in both multipliers.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangeState {
    pub alpha: f64,
    pub lambda: f64,
    pub alpha_lr: f64,
    pub lambda_lr: f64,
    /// Quadratic penalty weight; `None` couples it to `lambda_lr`.
    pub penalty: Option<f64>,
    pub entropy_target: f64,
    pub cost_budget: f64,
    pub sign: DualSign,
    /// When false, lambda stays frozen at its current value and the quadratic
    /// penalty is dropped (plain SAC on whatever reward is stored).
    pub constrained: bool,
}

impl LagrangeState {
    pub fn new(alpha_lr: f64, lambda_lr: f64, entropy_target: f64, cost_budget: f64) -> Self {
        Self {
            alpha: 0.0,
            lambda: 0.0,
            alpha_lr,
            lambda_lr,
            penalty: None,
            entropy_target,
            cost_budget,
            sign: DualSign::Residual,
            constrained: true,
        }
    }

    pub fn penalty_weight(&self) -> f64 {
        if self.constrained {
            self.penalty.unwrap_or(self.lambda_lr)
        } else {
            0.0
        }
    }

    /// Projected multiplier step from batch statistics.
    pub fn dual_update(&mut self, mean_log_prob: f64, mean_cost_q: f64) {
        let (alpha_dir, lambda_dir) = match self.sign {
            DualSign::Residual => (self.entropy_target + mean_log_prob, mean_cost_q - self.cost_budget),
            DualSign::Literal => (-self.entropy_target - mean_log_prob, self.cost_budget - mean_cost_q),
        };
        self.alpha = (self.alpha + self.alpha_lr * alpha_dir).max(0.0);
        if self.constrained {
            self.lambda = (self.lambda + self.lambda_lr * lambda_dir).max(0.0);
        }
    }
}

/// Actor-side evaluation of a batch: sampled actions, critic minima and their
/// action derivatives.
#[derive(Clone, Debug)]
pub struct ActorPass {
    pub policy: PolicyBatch,
    pub q: Vec<f64>,
    pub cost_q: Vec<f64>,
    dq: Vec<f64>,
    dcost_q: Vec<f64>,
}

impl ActorPass {
    pub fn new(
        policy: &GaussianPolicyHead,
        critics: &CriticEnsemble,
        obs: ArrayView2<'_, f64>,
        xi: &[f64],
    ) -> Result<Self> {
        let batch = policy.sample_batch(obs, xi)?;
        let x = with_action(obs, &batch.squashed);
        let (q, dq) = critics.reward.online_min_action_grad(x.view())?;
        let (cost_q, dcost_q) = critics.cost.online_min_action_grad(x.view())?;
        Ok(Self {
            policy: batch,
            q,
            cost_q,
            dq,
            dcost_q,
        })
    }

    /// Forward-only pass: enough for [`ActorPass::value`] and the dual
    /// statistics, but not for [`ActorPass::gradient`].
    pub fn statistics(
        policy: &GaussianPolicyHead,
        critics: &CriticEnsemble,
        obs: ArrayView2<'_, f64>,
        xi: &[f64],
    ) -> Result<Self> {
        let batch = policy.sample_batch(obs, xi)?;
        let x = with_action(obs, &batch.squashed);
        let q = critics.reward.online_min(x.view())?.values;
        let cost_q = critics.cost.online_min(x.view())?.values;
        Ok(Self {
            dq: Vec::new(),
            dcost_q: Vec::new(),
            policy: batch,
            q,
            cost_q,
        })
    }

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn mean_q(&self) -> f64 {
        Self::mean(&self.q)
    }

    pub fn mean_cost_q(&self) -> f64 {
        Self::mean(&self.cost_q)
    }

    pub fn mean_log_prob(&self) -> f64 {
        Self::mean(&self.policy.log_prob)
    }

    /// Batch estimate of the Lagrangian.
    pub fn value(&self, lag: &LagrangeState) -> f64 {
        let qc = self.mean_cost_q();
        let excess = (qc - lag.cost_budget).max(0.0);
        self.mean_q()
            + lag.alpha * (-lag.entropy_target - self.mean_log_prob())
            + if lag.constrained {
                lag.lambda * (lag.cost_budget - qc)
            } else {
                0.0
            }
            - 0.5 * lag.penalty_weight() * excess * excess
    }

    /// Gradient of [`ActorPass::value`] with respect to the policy parameters.
    pub fn gradient(&self, policy: &GaussianPolicyHead, lag: &LagrangeState) -> Result<Vec<f64>> {
        if self.dq.len() != self.q.len() {
            return Err(Error::Runtime("actor pass was built without action gradients".into()));
        }
        let n = self.q.len() as f64;
        let excess = (self.mean_cost_q() - lag.cost_budget).max(0.0);
        let lambda = if lag.constrained { lag.lambda } else { 0.0 };
        let d_cost_q = (-lambda - lag.penalty_weight() * excess) / n;
        let d_q = 1.0 / n;
        let d_log_prob = vec![-lag.alpha / n; self.q.len()];
        let d_squashed: Vec<f64> = self
            .dq
            .iter()
            .zip(&self.dcost_q)
            .map(|(gq, gc)| d_q * gq + d_cost_q * gc)
            .collect();
        policy.backward_batch(&self.policy, &d_squashed, &d_log_prob)
    }
}

/// Lagrangian value of `policy` on `obs` with fixed noise `xi`.
pub fn lagrangian_value(
    policy: &GaussianPolicyHead,
    critics: &CriticEnsemble,
    lag: &LagrangeState,
    obs: ArrayView2<'_, f64>,
    xi: &[f64],
) -> Result<f64> {
    Ok(ActorPass::new(policy, critics, obs, xi)?.value(lag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alsac::critic::CriticPair;
    use crate::nn::DenseNet;
    use ndarray::Array2;

    fn constant(inputs: usize, c: f64) -> DenseNet {
        let mut p = vec![0.0; inputs + 1];
        p[inputs] = c;
        DenseNet::from_params(&[inputs, 1], p).unwrap()
    }

    fn constant_policy(obs_len: usize, mu: f64, log_std: f64) -> GaussianPolicyHead {
        let mut net = DenseNet::zeros(&[obs_len, 2]);
        let n = net.params().len();
        net.params_mut()[n - 2] = mu;
        net.params_mut()[n - 1] = log_std;
        GaussianPolicyHead::from_net(net, 6.0, 0.0)
    }

    fn ensemble(q: (f64, f64), qc: (f64, f64)) -> CriticEnsemble {
        CriticEnsemble {
            reward: CriticPair::from_nets(constant(3, q.0), constant(3, q.1)),
            cost: CriticPair::from_nets(constant(3, qc.0), constant(3, qc.1)),
        }
    }

    #[test]
    fn zero_multipliers_reduce_to_mean_q() {
        let policy = constant_policy(2, 0.1, -1.0);
        let critics = ensemble((3.0, 2.5), (9.0, 8.0));
        let mut lag = LagrangeState::new(1e-5, 0.0, -1.0, 0.024);
        lag.penalty = Some(0.0);
        let obs = Array2::from_elem((2, 2), 0.5);
        let v = lagrangian_value(&policy, &critics, &lag, obs.view(), &[0.3, -0.3]).unwrap();
        assert_eq!(v, 2.5);
    }

    #[test]
    fn closed_form_two_state_batch() {
        let policy = constant_policy(2, 0.0, 0.0);
        let critics = ensemble((1.0, 4.0), (0.5, 0.7));
        let mut lag = LagrangeState::new(1e-5, 0.2, -1.0, 0.1);
        lag.alpha = 0.3;
        lag.lambda = 2.0;
        let obs = Array2::from_elem((2, 2), 0.0);
        let xi = [0.5, -1.0];
        let v = lagrangian_value(&policy, &critics, &lag, obs.view(), &xi).unwrap();

        let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        let logp = |x: f64| -> f64 {
            let y = x.tanh();
            -0.5 * x * x - half_ln_2pi - (1.0 - y * y + 1e-6).ln() - 6f64.ln()
        };
        let mean_logp = 0.5 * (logp(0.5) + logp(-1.0));
        let expected = 1.0 + 0.3 * (1.0 - mean_logp) + 2.0 * (0.1 - 0.5) - 0.5 * 0.2 * 0.4 * 0.4;
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
    }

    #[test]
    fn entropy_term_vanishes_at_target() {
        let policy = constant_policy(2, 0.0, 0.0);
        let critics = ensemble((0.0, 0.0), (0.0, 0.0));
        let obs = Array2::from_elem((1, 2), 0.0);
        let pass = ActorPass::new(&policy, &critics, obs.view(), &[0.4]).unwrap();
        let mut lag = LagrangeState::new(1e-5, 1e-5, -pass.mean_log_prob(), 0.0);
        lag.alpha = 5.0;
        assert!(pass.value(&lag).abs() < 1e-15);
    }

    #[test]
    fn lambda_is_unchanged_at_budget() {
        let mut lag = LagrangeState::new(1e-5, 1e-5, -1.0, 0.024);
        lag.lambda = 0.7;
        lag.dual_update(0.0, 0.024);
        assert_eq!(lag.lambda, 0.7);
    }

    #[test]
    fn lambda_projection_at_zero() {
        let mut lag = LagrangeState::new(1e-5, 1e-2, -1.0, 0.5);
        lag.dual_update(0.0, 0.1);
        assert_eq!(lag.lambda, 0.0);
    }

    #[test]
    fn alpha_rises_under_entropy_deficit() {
        let mut lag = LagrangeState::new(1e-2, 1e-5, -1.0, 0.0);
        let mut prev = lag.alpha;
        for _ in 0..10 {
            // entropy = -mean log pi = -3 < target -1
            lag.dual_update(3.0, 0.0);
            assert!(lag.alpha > prev);
            prev = lag.alpha;
        }
        for _ in 0..1000 {
            lag.dual_update(-5.0, 0.0);
        }
        assert_eq!(lag.alpha, 0.0);
    }

    #[test]
    fn literal_sign_flips_directions() {
        let mut lag = LagrangeState::new(1e-2, 1e-2, -1.0, 0.0);
        lag.sign = DualSign::Literal;
        lag.lambda = 1.0;
        lag.dual_update(3.0, 2.0);
        assert!(lag.lambda < 1.0);
        assert_eq!(lag.alpha, 0.0);
    }

    #[test]
    fn frozen_lambda() {
        let mut lag = LagrangeState::new(1e-2, 1e-2, -1.0, 0.0);
        lag.constrained = false;
        lag.dual_update(0.0, 100.0);
        assert_eq!(lag.lambda, 0.0);
        assert_eq!(lag.penalty_weight(), 0.0);
    }
}
