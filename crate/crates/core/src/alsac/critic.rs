//! Twin critics with soft-updated target copies.

use ndarray::{Array2, ArrayView2};

use super::buffer::Batch;
use crate::error::{Error, Result};
use crate::nn::{soft_update, Adam, DenseNet, GaussianPolicyHead};
use crate::rng::Rng;

/// Appends a normalized-action column to observation rows.
pub fn with_action(obs: ArrayView2<'_, f64>, actions: &[f64]) -> Array2<f64> {
    let (n, d) = obs.dim();
    let mut x = Array2::zeros((n, d + 1));
    x.slice_mut(ndarray::s![.., ..d]).assign(&obs);
    for (i, a) in actions.iter().enumerate() {
        x[[i, d]] = *a;
    }
    x
}

/// Mean squared error of `net` against fixed `targets` and its parameter
/// gradient.
pub fn mse_gradient(net: &DenseNet, input: ArrayView2<'_, f64>, targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = targets.len();
    let (out, cache) = net.forward_batch(input)?;
    let mut upstream = Array2::zeros((n, 1));
    let mut loss = 0.0;
    for i in 0..n {
        let r = out[[i, 0]] - targets[i];
        loss += r * r;
        upstream[[i, 0]] = 2.0 * r / n as f64;
    }
    loss /= n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("critic loss"));
    }
    let mut grads = vec![0.0; net.params().len()];
    net.param_gradient(&cache, upstream.view(), &mut grads)?;
    Ok((loss, grads))
}

/// One Adam step on the critic MSE. Returns the pre-step loss.
pub fn mse_step(
    net: &mut DenseNet,
    adam: &mut Adam,
    input: ArrayView2<'_, f64>,
    targets: &[f64],
    lr: f64,
) -> Result<f64> {
    let (loss, grads) = mse_gradient(net, input, targets)?;
    adam.step(net.params_mut(), &grads, lr)?;
    Ok(loss)
}

/// Two online critics, their targets and optimizer states.
#[derive(Clone, Debug)]
pub struct CriticPair {
    pub online: [DenseNet; 2],
    pub target: [DenseNet; 2],
    pub adam: [Adam; 2],
}

/// Minimum over the pair, with the per-row index of the selected critic.
#[derive(Clone, Debug)]
pub struct MinEval {
    pub values: Vec<f64>,
    pub which: Vec<usize>,
}

fn elementwise_min(a: &Array2<f64>, b: &Array2<f64>) -> MinEval {
    let (values, which) = a
        .column(0)
        .iter()
        .zip(b.column(0).iter())
        .map(|(&x, &y)| if y < x { (y, 1) } else { (x, 0) })
        .unzip();
    MinEval { values, which }
}

impl CriticPair {
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Self {
        let a = DenseNet::init(sizes, 1.0, rng);
        let b = DenseNet::init(sizes, 1.0, rng);
        Self::from_nets(a, b)
    }

    pub fn from_nets(a: DenseNet, b: DenseNet) -> Self {
        let adam = [Adam::new(a.params().len()), Adam::new(b.params().len())];
        Self {
            target: [a.clone(), b.clone()],
            online: [a, b],
            adam,
        }
    }

    pub fn target_min(&self, input: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let (a, _) = self.target[0].forward_batch(input)?;
        let (b, _) = self.target[1].forward_batch(input)?;
        Ok(elementwise_min(&a, &b).values)
    }

    pub fn online_min(&self, input: ArrayView2<'_, f64>) -> Result<MinEval> {
        let (a, _) = self.online[0].forward_batch(input)?;
        let (b, _) = self.online[1].forward_batch(input)?;
        Ok(elementwise_min(&a, &b))
    }

    /// Online minimum and its derivative with respect to the last input column
    /// (the action).
    pub fn online_min_action_grad(&self, input: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let (a, cache_a) = self.online[0].forward_batch(input)?;
        let (b, cache_b) = self.online[1].forward_batch(input)?;
        let min = elementwise_min(&a, &b);
        let n = min.values.len();
        let mut up_a = Array2::zeros((n, 1));
        let mut up_b = Array2::zeros((n, 1));
        for (i, &w) in min.which.iter().enumerate() {
            if w == 0 {
                up_a[[i, 0]] = 1.0;
            } else {
                up_b[[i, 0]] = 1.0;
            }
        }
        let ga = self.online[0].backward(&cache_a, up_a.view(), None)?;
        let gb = self.online[1].backward(&cache_b, up_b.view(), None)?;
        let last = input.ncols() - 1;
        let grad = (0..n).map(|i| ga[[i, last]] + gb[[i, last]]).collect();
        Ok((min.values, grad))
    }

    /// One MSE step per online critic; returns the mean pre-step loss.
    pub fn update(&mut self, input: ArrayView2<'_, f64>, targets: &[f64], lr: f64) -> Result<f64> {
        let [n0, n1] = &mut self.online;
        let [a0, a1] = &mut self.adam;
        let l0 = mse_step(n0, a0, input, targets, lr)?;
        let l1 = mse_step(n1, a1, input, targets, lr)?;
        Ok(0.5 * (l0 + l1))
    }

    pub fn soft_update(&mut self, eta: f64) -> Result<()> {
        for (t, o) in self.target.iter_mut().zip(&self.online) {
            soft_update(t.params_mut(), o.params(), eta)?;
        }
        Ok(())
    }
}

/// Reward and cost critic pairs.
#[derive(Clone, Debug)]
pub struct CriticEnsemble {
    pub reward: CriticPair,
    pub cost: CriticPair,
}

/// Next-state actions drawn from the current policy for bootstrapping.
#[derive(Clone, Debug)]
pub struct NextActions {
    /// Normalized actions in (-1, 1).
    pub squashed: Vec<f64>,
    pub log_prob: Vec<f64>,
}

pub fn next_actions(policy: &GaussianPolicyHead, batch: &Batch, xi: &[f64]) -> Result<NextActions> {
    let s = policy.sample_batch(batch.next_obs.view(), xi)?;
    Ok(NextActions {
        squashed: s.squashed,
        log_prob: s.log_prob,
    })
}

/// Soft Bellman target for the reward critics:
/// `R + (1 - done) * gamma * (min target Q(s', a') - alpha * log pi(a'|s'))`.
pub fn critic_target(
    batch: &Batch,
    critics: &CriticPair,
    next: &NextActions,
    gamma: f64,
    alpha: f64,
) -> Result<Vec<f64>> {
    let x = with_action(batch.next_obs.view(), &next.squashed);
    let q = critics.target_min(x.view())?;
    Ok((0..batch.len())
        .map(|i| {
            if batch.dones[i] {
                batch.rewards[i]
            } else {
                batch.rewards[i] + gamma * (q[i] - alpha * next.log_prob[i])
            }
        })
        .collect())
}

/// Cost target `R^c + (1 - done) * gamma * min target Q_c(s', a')`, without an
/// entropy term.
pub fn cost_critic_target(
    batch: &Batch,
    cost_critics: &CriticPair,
    next: &NextActions,
    gamma: f64,
) -> Result<Vec<f64>> {
    let x = with_action(batch.next_obs.view(), &next.squashed);
    let q = cost_critics.target_min(x.view())?;
    Ok((0..batch.len())
        .map(|i| {
            if batch.dones[i] {
                batch.costs[i]
            } else {
                batch.costs[i] + gamma * q[i]
            }
        })
        .collect())
}
