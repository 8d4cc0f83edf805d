//! Small dense networks with exact reverse-mode gradients, Adam, a squashed
//! Gaussian policy head and target-network blending.

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod policy;

pub use adam::Adam;
pub use dense::{DenseNet, ForwardCache};
pub use policy::{GaussianPolicyHead, PolicyBatch};

use crate::error::{Error, Result};

/// `target <- eta * online + (1 - eta) * target`.
pub fn soft_update(target: &mut [f64], online: &[f64], eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidConfig(format!("soft-update rate {eta} outside [0, 1]")));
    }
    if target.len() != online.len() {
        return Err(Error::Shape {
            expected: target.len(),
            actual: online.len(),
        });
    }
    for (t, o) in target.iter_mut().zip(online) {
        *t = eta * o + (1.0 - eta) * *t;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_update_boundaries() {
        let online = [2.0, -4.0];
        let mut t = [0.0, 1.0];
        soft_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t, [0.0, 1.0]);
        soft_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(t, online);
        let mut t = [0.0];
        soft_update(&mut t, &[2.0], 0.5).unwrap();
        assert_eq!(t, [1.0]);
        assert!(soft_update(&mut t, &[2.0], 1.5).is_err());
        assert!(soft_update(&mut t, &[2.0], -0.1).is_err());
    }
}
