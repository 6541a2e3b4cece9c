use rand::Rng;

use crate::scalar::Scalar;
use crate::{Error, Result};

/// Dense feed-forward network with leaky-ReLU hidden layers and a linear
/// output head. Parameters live in one flat buffer, layer by layer, each
/// layer storing its row-major `out × in` weight matrix followed by its biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    leak: T,
    params: Vec<T>,
}

/// One regression sample: only output `action` is fitted toward `target`.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a, T> {
    pub input: &'a [T],
    pub action: usize,
    pub target: T,
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    s
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn zeros(sizes: &[usize], leak: T) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid architecture {sizes:?}")));
        }
        let n = sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Ok(Self { sizes: sizes.to_vec(), leak, params: vec![T::zero(); n] })
    }

    /// He-style uniform initialization, `U(±sqrt(6 / fan_in))`, zero biases.
    pub fn he_uniform<R: Rng + ?Sized>(sizes: &[usize], leak: T, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, leak)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = T::lit(rng.gen_range(-bound..bound));
            }
            offset += fan_out * (fan_in + 1);
        }
        Ok(net)
    }

    /// Rebuilds a network from a flat parameter buffer.
    pub fn from_params(sizes: &[usize], leak: T, params: Vec<T>) -> Result<Self> {
        let mut net = Self::zeros(sizes, leak)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!("expected {} parameters, got {}", net.params.len(), params.len())));
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn leak(&self) -> T {
        self.leak
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.sizes.windows(2).map(move |w| {
            let o = offset;
            offset += w[1] * (w[0] + 1);
            (o, w[0], w[1])
        })
    }

    #[inline]
    fn activate(&self, z: T) -> T {
        if z > T::zero() {
            z
        } else {
            self.leak * z
        }
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.input_len() {
            return Err(Error::Shape(format!("input length {} != {}", input.len(), self.input_len())));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        self.check_input(input)?;
        let n_layers = self.sizes.len() - 1;
        let mut x = input.to_vec();
        for (l, (o, n_in, n_out)) in self.layers().enumerate() {
            let (w, b) = self.params[o..o + n_out * (n_in + 1)].split_at(n_out * n_in);
            let last = l + 1 == n_layers;
            x = (0..n_out)
                .map(|r| {
                    let z = b[r] + dot(&w[r * n_in..(r + 1) * n_in], &x);
                    if last {
                        z
                    } else {
                        self.activate(z)
                    }
                })
                .collect();
        }
        Ok(x)
    }

    /// Index of the largest output; ties go to the lowest index.
    pub fn argmax(&self, input: &[T]) -> Result<usize> {
        Ok(argmax(&self.forward(input)?))
    }

    /// Mean squared error over the batch and its gradient.
    pub fn loss_and_gradient(&self, batch: &[Sample<'_, T>]) -> Result<(T, Vec<T>)> {
        let out = self.weighted_loss_and_gradient(batch, None)?;
        Ok((out.loss, out.grad))
    }

    /// `mean_j w_j (y_j − Q(s_j, a_j))²` and its gradient with respect to all
    /// parameters; only the selected output of each sample receives error.
    pub fn weighted_loss_and_gradient(&self, batch: &[Sample<'_, T>], weights: Option<&[T]>) -> Result<LossOutput<T>> {
        if batch.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        if weights.is_some_and(|w| w.len() != batch.len()) {
            return Err(Error::Shape("weights length differs from batch".into()));
        }
        let layers: Vec<_> = self.layers().collect();
        let n_layers = layers.len();
        let inv_n = T::one() / T::lit(batch.len() as f64);
        let mut grad = vec![T::zero(); self.params.len()];
        let mut loss = T::zero();
        let mut residuals = Vec::with_capacity(batch.len());

        // activations[l] is the input to layer l; pre[l] its pre-activation output.
        let mut acts: Vec<Vec<T>> = self.sizes.iter().map(|&s| vec![T::zero(); s]).collect();
        let mut pre: Vec<Vec<T>> = self.sizes[1..].iter().map(|&s| vec![T::zero(); s]).collect();
        let max_width = *self.sizes.iter().max().unwrap();
        let mut delta = vec![T::zero(); max_width];
        let mut delta_prev = vec![T::zero(); max_width];

        for (j, s) in batch.iter().enumerate() {
            self.check_input(s.input)?;
            if s.action >= self.output_len() {
                return Err(Error::Shape(format!("action {} out of range", s.action)));
            }
            acts[0].copy_from_slice(s.input);
            for (l, &(o, n_in, n_out)) in layers.iter().enumerate() {
                let (w, b) = self.params[o..o + n_out * (n_in + 1)].split_at(n_out * n_in);
                let (lo, hi) = acts.split_at_mut(l + 1);
                let x = &lo[l];
                for r in 0..n_out {
                    let z = b[r] + dot(&w[r * n_in..(r + 1) * n_in], x);
                    pre[l][r] = z;
                    hi[0][r] = if l + 1 == n_layers { z } else { self.activate(z) };
                }
            }
            let q = acts[n_layers][s.action];
            let w_j = weights.map_or(T::one(), |w| w[j]);
            let resid = s.target - q;
            residuals.push(resid);
            loss += w_j * resid * resid;

            let out = self.output_len();
            delta[..out].iter_mut().for_each(|d| *d = T::zero());
            delta[s.action] = -T::lit(2.0) * w_j * resid * inv_n;

            for l in (0..n_layers).rev() {
                let (o, n_in, n_out) = layers[l];
                let x = &acts[l];
                let (gw, gb) = grad[o..o + n_out * (n_in + 1)].split_at_mut(n_out * n_in);
                let w = &self.params[o..o + n_out * n_in];
                if l > 0 {
                    delta_prev[..n_in].iter_mut().for_each(|d| *d = T::zero());
                }
                for r in 0..n_out {
                    let d = delta[r];
                    if d == T::zero() {
                        continue;
                    }
                    gb[r] += d;
                    axpy(d, x, &mut gw[r * n_in..(r + 1) * n_in]);
                    if l > 0 {
                        axpy(d, &w[r * n_in..(r + 1) * n_in], &mut delta_prev[..n_in]);
                    }
                }
                if l > 0 {
                    for (k, dp) in delta_prev[..n_in].iter().enumerate() {
                        let slope = if pre[l - 1][k] > T::zero() { T::one() } else { self.leak };
                        delta[k] = *dp * slope;
                    }
                }
            }
        }
        Ok(LossOutput { loss: loss * inv_n, grad, residuals })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<T> {
    pub loss: T,
    pub grad: Vec<T>,
    /// `y_j − Q(s_j, a_j)` before the update, per sample.
    pub residuals: Vec<T>,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
