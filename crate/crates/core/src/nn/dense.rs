use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Feed-forward network with ReLU hidden layers and a linear output layer.
///
/// Parameters live in one flat array; each layer stores its weight matrix
/// (row-major, `n_out x n_in`) followed by its bias vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Layer inputs recorded by a batched forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    acts: Vec<Array2<f64>>,
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl DenseNet {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "network needs an input and an output layer");
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        }
    }

    /// Uniform `[-1/sqrt(n_in), 1/sqrt(n_in)]` init; the last layer is further
    /// multiplied by `output_scale`.
    pub fn init(sizes: &[usize], output_scale: f64, rng: &mut Rng) -> Self {
        let mut net = Self::zeros(sizes);
        let last = sizes.len() - 2;
        let mut offset = 0;
        for (l, w) in sizes.windows(2).enumerate() {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let scale = if l == last { output_scale } else { 1.0 };
            let n = (w[0] + 1) * w[1];
            for p in &mut net.params[offset..offset + n] {
                *p = scale * rng.random_range(-bound..=bound);
            }
            offset += n;
        }
        net
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        let expected = param_count(sizes);
        if params.len() != expected {
            return Err(Error::Shape {
                expected,
                actual: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().expect("non-empty sizes")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer(&self, l: usize, offset: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w =
            ArrayView2::from_shape((n_out, n_in), &self.params[offset..offset + n_in * n_out]).expect("layer shape");
        let b = ArrayView1::from(&self.params[offset + n_in * n_out..offset + (n_in + 1) * n_out]);
        (w, b)
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.sizes.len() - 1);
        let mut o = 0;
        for w in self.sizes.windows(2) {
            offsets.push(o);
            o += (w[0] + 1) * w[1];
        }
        offsets
    }

    /// Single-input forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_len() {
            return Err(Error::Shape {
                expected: self.input_len(),
                actual: input.len(),
            });
        }
        let mut x = input.to_vec();
        let layers = self.sizes.len() - 1;
        for (l, offset) in self.layer_offsets().into_iter().enumerate() {
            let (w, b) = self.layer(l, offset);
            let mut z: Vec<f64> = w
                .outer_iter()
                .zip(b.iter())
                .map(|(row, bias)| bias + row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            if l + 1 < layers {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            x = z;
        }
        Ok(x)
    }

    /// Batched forward pass; rows of `input` are samples.
    pub fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache)> {
        if input.ncols() != self.input_len() {
            return Err(Error::Shape {
                expected: self.input_len(),
                actual: input.ncols(),
            });
        }
        let batch = input.nrows();
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers);
        let mut x = input.to_owned();
        for (l, offset) in self.layer_offsets().into_iter().enumerate() {
            let (w, b) = self.layer(l, offset);
            let mut z = Array2::zeros((batch, self.sizes[l + 1]));
            z += &b;
            general_mat_mul(1.0, &x, &w.t(), 1.0, &mut z);
            if l + 1 < layers {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(x);
            x = z;
        }
        Ok((x, ForwardCache { acts }))
    }

    /// Reverse pass for `sum(upstream * output)`.
    ///
    /// Returns the gradient with respect to the input rows and, when
    /// `param_grads` is given, overwrites it with the parameter gradient
    /// (summed over the batch).
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<'_, f64>,
        param_grads: Option<&mut [f64]>,
    ) -> Result<Array2<f64>> {
        self.reverse(cache, upstream, param_grads, true)
    }

    /// Parameter gradient only; skips the input-gradient product of the first
    /// layer.
    pub fn param_gradient(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<'_, f64>,
        param_grads: &mut [f64],
    ) -> Result<()> {
        self.reverse(cache, upstream, Some(param_grads), false).map(|_| ())
    }

    fn reverse(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<'_, f64>,
        mut param_grads: Option<&mut [f64]>,
        input_grad: bool,
    ) -> Result<Array2<f64>> {
        if upstream.ncols() != self.output_len() {
            return Err(Error::Shape {
                expected: self.output_len(),
                actual: upstream.ncols(),
            });
        }
        if let Some(g) = param_grads.as_deref() {
            if g.len() != self.params.len() {
                return Err(Error::Shape {
                    expected: self.params.len(),
                    actual: g.len(),
                });
            }
        }
        let offsets = self.layer_offsets();
        let mut dz = upstream.to_owned();
        for l in (0..self.sizes.len() - 1).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let a_prev = &cache.acts[l];
            if a_prev.nrows() != dz.nrows() {
                return Err(Error::Shape {
                    expected: a_prev.nrows(),
                    actual: dz.nrows(),
                });
            }
            if let Some(g) = param_grads.as_deref_mut() {
                let o = offsets[l];
                let (gw, gb) = g[o..o + (n_in + 1) * n_out].split_at_mut(n_in * n_out);
                let mut gw = ArrayViewMut2::from_shape((n_out, n_in), gw).expect("grad shape");
                general_mat_mul(1.0, &dz.t(), a_prev, 0.0, &mut gw);
                ArrayViewMut1::from(gb).assign(&dz.sum_axis(Axis(0)));
            }
            if l == 0 && !input_grad {
                break;
            }
            let (w, _) = self.layer(l, offsets[l]);
            let mut da = dz.dot(&w);
            if l > 0 {
                ndarray::Zip::from(&mut da).and(a_prev).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
            }
            dz = da;
        }
        Ok(dz)
    }

    /// Convenience single-sample gradient: `(param_grads, input_grads)` of
    /// `upstream . net(input)`.
    pub fn gradient(&self, input: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row");
        let (_, cache) = self.forward_batch(x)?;
        let up = ArrayView2::from_shape((1, upstream.len()), upstream).expect("row");
        let mut grads = vec![0.0; self.params.len()];
        let dx = self.backward(&cache, up, Some(&mut grads))?;
        Ok((grads, dx.into_raw_vec_and_offset().0))
    }
}
