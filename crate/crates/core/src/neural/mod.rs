//! Dense feed-forward networks.
//!
//! Parameters are generic over [`Scalar`] so the same forward/backward code
//! runs in f32 for training and in f64 for finite-difference checks. Weight
//! matrices are `fan_out x fan_in`, row-major; a batch is `batch x dim`,
//! row-major.

mod io;
mod train;

use std::fmt::Debug;

use rand::Rng;

use crate::{Error, Result};

pub use io::{load_model, model_from_bytes, model_to_bytes, save_model, MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use train::{
    loss_cross_entropy, loss_mse, train, train_step, train_with_validation, EpochRecord, Gradients, Loss, Optimizer, OptimizerState,
    Samples, TrainConfig, TrainLog, CE_CLAMP,
};

/// Floating-point type usable for network parameters.
pub trait Scalar: num_traits::Float + num_traits::FromPrimitive + Default + Debug + Send + Sync + 'static {
    /// `C = alpha * A B + beta * C` with explicit row/column strides.
    ///
    /// # Safety
    ///
    /// The pointers and strides must describe valid `m x k`, `k x n` and
    /// `m x n` matrices, and `c` must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn from_f64_lossy(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("finite conversion")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Row-major `C (m x n) = A' B' + beta C`, where `A'` is `A` (m x k) or the
/// transpose of a stored k x m matrix, and likewise for `B'`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Scalar>(trans_a: bool, trans_b: bool, m: usize, k: usize, n: usize, a: &[T], b: &[T], beta: T, c: &mut [T]) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe { T::gemm_raw(m, k, n, T::one(), a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Linear,
    Tanh,
    Sigmoid,
    Softmax,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Tanh => 1,
            Activation::Sigmoid => 2,
            Activation::Softmax => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Activation> {
        [Activation::Linear, Activation::Tanh, Activation::Sigmoid, Activation::Softmax].into_iter().find(|a| a.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
        }
    }

    /// In place over one batch of pre-activations with `width` columns.
    fn apply<T: Scalar>(self, z: &mut [T], width: usize) {
        match self {
            Activation::Linear => {}
            Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Sigmoid => z.iter_mut().for_each(|v| *v = T::one() / (T::one() + (-*v).exp())),
            Activation::Softmax => {
                for row in z.chunks_exact_mut(width) {
                    let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
                    let mut sum = T::zero();
                    for v in row.iter_mut() {
                        *v = (*v - max).exp();
                        sum = sum + *v;
                    }
                    row.iter_mut().for_each(|v| *v = *v / sum);
                }
            }
        }
    }

    /// Turn `grad` (dL/d activation) into dL/d pre-activation, given the
    /// activation outputs `a`.
    fn backward<T: Scalar>(self, a: &[T], grad: &mut [T], width: usize) {
        match self {
            Activation::Linear => {}
            Activation::Tanh => grad.iter_mut().zip(a).for_each(|(g, &a)| *g = *g * (T::one() - a * a)),
            Activation::Sigmoid => grad.iter_mut().zip(a).for_each(|(g, &a)| *g = *g * a * (T::one() - a)),
            Activation::Softmax => {
                for (g, a) in grad.chunks_exact_mut(width).zip(a.chunks_exact(width)) {
                    let dot = g.iter().zip(a).fold(T::zero(), |s, (&g, &a)| s + g * a);
                    g.iter_mut().zip(a).for_each(|(g, &a)| *g = a * (*g - dot));
                }
            }
        }
    }
}

/// Layer widths (input first) and per-layer activations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub layer_dims: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(layer_dims: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        let spec = MlpSpec { layer_dims, activations };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::Usage("network needs at least an input and an output layer".into()));
        }
        if self.activations.len() != self.layer_dims.len() - 1 {
            return Err(Error::Usage(format!("{} activations for {} layers", self.activations.len(), self.layer_dims.len() - 1)));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::Usage("layer widths must be positive".into()));
        }
        let last = self.activations.len() - 1;
        if self.activations[..last].contains(&Activation::Softmax) {
            return Err(Error::Usage("softmax is only allowed on the output layer".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub activation: Activation,
    /// `fan_out x fan_in`, row-major.
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T = f32> {
    pub spec: MlpSpec,
    pub layers: Vec<DenseLayer<T>>,
}

impl<T: Scalar> MlpModel<T> {
    /// Uniform ±sqrt(6/(fan_in+fan_out)) weights, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_dims
            .windows(2)
            .zip(&spec.activations)
            .map(|(d, &activation)| {
                let (fan_in, fan_out) = (d[0], d[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = (0..fan_in * fan_out).map(|_| T::from_f64_lossy(rng.random_range(-limit..limit))).collect();
                DenseLayer { fan_in, fan_out, activation, weights, biases: vec![T::zero(); fan_out] }
            })
            .collect();
        Ok(MlpModel { spec, layers })
    }

    /// All-zero parameters.
    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_dims
            .windows(2)
            .zip(&spec.activations)
            .map(|(d, &activation)| DenseLayer {
                fan_in: d[0],
                fan_out: d[1],
                activation,
                weights: vec![T::zero(); d[0] * d[1]],
                biases: vec![T::zero(); d[1]],
            })
            .collect();
        Ok(MlpModel { spec, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        self.forward_batch(input, 1)
    }

    /// Forward a `batch x input_dim` block; returns `batch x output_dim`.
    pub fn forward_batch(&self, inputs: &[T], batch: usize) -> Result<Vec<T>> {
        self.check_inputs(inputs, batch)?;
        let mut x = inputs.to_vec();
        for layer in &self.layers {
            x = layer.forward(&x, batch);
        }
        Ok(x)
    }

    /// Activations of every layer, input included.
    pub(crate) fn forward_trace(&self, inputs: &[T], batch: usize) -> Vec<Vec<T>> {
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(inputs.to_vec());
        for layer in &self.layers {
            let next = layer.forward(trace.last().unwrap(), batch);
            trace.push(next);
        }
        trace
    }

    fn check_inputs(&self, inputs: &[T], batch: usize) -> Result<()> {
        if batch == 0 || inputs.len() != batch * self.input_dim() {
            return Err(Error::Usage(format!("expected {batch} x {} inputs, got {} values", self.input_dim(), inputs.len())));
        }
        Ok(())
    }
}

impl<T: Scalar> DenseLayer<T> {
    fn forward(&self, x: &[T], batch: usize) -> Vec<T> {
        let mut z: Vec<T> = Vec::with_capacity(batch * self.fan_out);
        for _ in 0..batch {
            z.extend_from_slice(&self.biases);
        }
        gemm(false, true, batch, self.fan_in, self.fan_out, x, &self.weights, T::one(), &mut z);
        self.activation.apply(&mut z, self.fan_out);
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spec_validation() {
        use Activation::*;
        assert!(MlpSpec::new(vec![2, 3], vec![Tanh]).is_ok());
        assert!(MlpSpec::new(vec![2], vec![]).is_err());
        assert!(MlpSpec::new(vec![2, 3], vec![Tanh, Tanh]).is_err());
        assert!(MlpSpec::new(vec![2, 3, 4], vec![Softmax, Linear]).is_err());
        assert!(MlpSpec::new(vec![2, 0, 4], vec![Tanh, Linear]).is_err());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let spec = MlpSpec::new(vec![4, 3, 2], vec![Activation::Tanh, Activation::Linear]).unwrap();
        let m = MlpModel::<f32>::zeros(spec).unwrap();
        assert_eq!(m.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn softmax_of_zero_is_uniform() {
        let spec = MlpSpec::new(vec![3, 5], vec![Activation::Softmax]).unwrap();
        let m = MlpModel::<f64>::zeros(spec).unwrap();
        let out = m.forward(&[0.3, 0.1, -4.0]).unwrap();
        for v in out {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn single_tanh_unit() {
        let spec = MlpSpec::new(vec![1, 1], vec![Activation::Tanh]).unwrap();
        let mut m = MlpModel::<f64>::zeros(spec).unwrap();
        m.layers[0].weights[0] = 2.0;
        m.layers[0].biases[0] = 1.0;
        let out = m.forward(&[0.5]).unwrap();
        assert!((out[0] - 2f64.tanh()).abs() < 1e-15);
        assert!((out[0] - 0.96403).abs() < 1e-5);
    }

    #[test]
    fn softmax_outputs_are_a_distribution() {
        let spec = MlpSpec::new(vec![6, 8, 5], vec![Activation::Sigmoid, Activation::Softmax]).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let m = MlpModel::<f32>::init(spec, &mut r).unwrap();
        for scale in [1e-3f32, 1.0, 1e3, 1e6] {
            let x: Vec<f32> = (0..6).map(|i| scale * (i as f32 - 2.5)).collect();
            let p = m.forward(&x).unwrap();
            let sum: f32 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn batch_forward_matches_single() {
        let spec = MlpSpec::new(vec![3, 7, 4], vec![Activation::Tanh, Activation::Linear]).unwrap();
        let m = MlpModel::<f64>::init(spec, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let xs: Vec<f64> = (0..15).map(|i| (i as f64).sin()).collect();
        let batched = m.forward_batch(&xs, 5).unwrap();
        for (i, x) in xs.chunks(3).enumerate() {
            let one = m.forward(x).unwrap();
            for (a, b) in one.iter().zip(&batched[i * 4..i * 4 + 4]) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_usage_error() {
        let spec = MlpSpec::new(vec![3, 2], vec![Activation::Linear]).unwrap();
        let m = MlpModel::<f32>::zeros(spec).unwrap();
        assert!(matches!(m.forward(&[1.0, 2.0]), Err(Error::Usage(_))));
        assert!(m.forward_batch(&[], 0).is_err());
    }

    #[test]
    fn init_respects_glorot_bound() {
        let spec = MlpSpec::new(vec![22, 512, 128], vec![Activation::Tanh, Activation::Tanh]).unwrap();
        let m = MlpModel::<f32>::init(spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for l in &m.layers {
            let lim = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt() as f32;
            assert!(l.weights.iter().all(|w| w.abs() <= lim));
            assert!(l.biases.iter().all(|&b| b == 0.0));
        }
        assert_eq!(m.parameter_count(), 22 * 512 + 512 + 512 * 128 + 128);
    }

    #[test]
    fn gemm_transposes() {
        // A = [[1,2],[3,4]], B = [[5,6],[7,8]]
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [5.0f64, 6.0, 7.0, 8.0];
        let mut c = [0.0f64; 4];
        gemm(false, false, 2, 2, 2, &a, &b, 0.0, &mut c);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        gemm(true, false, 2, 2, 2, &a, &b, 0.0, &mut c);
        assert_eq!(c, [26.0, 30.0, 38.0, 44.0]);
        gemm(false, true, 2, 2, 2, &a, &b, 0.0, &mut c);
        assert_eq!(c, [17.0, 23.0, 39.0, 53.0]);
    }
}
