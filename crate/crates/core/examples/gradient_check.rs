//! Compares the analytic gradient of a small dense network with central
//! differences, and integrates the squashed Gaussian density numerically.
//!
//! cargo run --example gradient_check

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;

use ev_alsac::nn::{DenseNet, GaussianPolicyHead};
use ev_alsac::rng::{stream, Stream};

fn main() -> ev_alsac::Result<()> {
    let mut rng = stream(11, Stream::Policy);
    let sizes = [3, 8, 8, 2];
    let net = DenseNet::init(&sizes, 1.0, &mut rng);
    let x = Array2::from_shape_fn((4, 3), |_| rng.sample::<f64, _>(StandardNormal));
    let w = Array2::from_shape_fn((4, 2), |_| rng.sample::<f64, _>(StandardNormal));

    // objective sum(w * net(x)); its output gradient is w
    let objective = |params: &[f64]| -> f64 {
        let probe = DenseNet::from_params(&sizes, params.to_vec()).unwrap();
        (probe.forward_batch(x.view()).unwrap().0 * &w).sum()
    };
    let (_, cache) = net.forward_batch(x.view())?;
    let mut analytic = vec![0.0; net.params().len()];
    net.param_gradient(&cache, w.view(), &mut analytic)?;

    let h = 1e-5;
    let mut p = net.params().to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let x0 = p[i];
        p[i] = x0 + h;
        let up = objective(&p);
        p[i] = x0 - h;
        let down = objective(&p);
        p[i] = x0;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max((numeric - analytic[i]).abs() / numeric.abs().max(1e-8));
    }
    println!("{} parameters, worst elementwise relative error {worst:.2e}", p.len());

    for (mu, sigma) in [(0.0, 0.3), (0.8, 0.1), (-1.5, 1.0)] {
        let mut head_net = DenseNet::zeros(&[1, 2]);
        head_net.params_mut()[2] = mu;
        head_net.params_mut()[3] = f64::ln(sigma);
        let head = GaussianPolicyHead::from_net(head_net, 6.0, 0.0);
        let n = 20_000;
        let width = 2.0 * head.scale / n as f64;
        let mass: f64 = (0..n)
            .map(|i| {
                let a = head.offset - head.scale + (i as f64 + 0.5) * width;
                head.log_prob(&[0.0], a).unwrap().exp() * width
            })
            .sum();
        println!("mu {mu:+.1} sigma {sigma:.1}: density mass {mass:.6}");
    }
    Ok(())
}
