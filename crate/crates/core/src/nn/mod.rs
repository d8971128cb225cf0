//! Minimal CPU neural-network engine: single-image (batch of one) CHW
//! tensors, layers with hand-written backward passes, Adam, and a binary
//! parameter archive.
//!
//! Layers keep the activations they need for the backward pass inside
//! themselves, so training is single-writer. `Module::forward` never
//! touches that cache and can run concurrently on a shared model.

mod adam;
mod archive;
mod init;
mod layers;
mod loss;
mod ops;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use archive::{Checkpoint, NamedTensor, CHECKPOINT_VERSION};
pub use init::Init;
pub use layers::{
    Activation, ActivationKind, Conv2d, ConvTranspose2d, Dropout, InstanceNorm, MaxPool2d,
    Sequential,
};
pub use loss::{bce_with_logits, l1_loss, softmax_cross_entropy};
pub use ops::{col2im, gemm, im2col};
pub use tensor::Tensor;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Random source threaded through training-mode forward passes (dropout).
pub type NnRng = ChaCha8Rng;

/// Scalar type the engine computes in. `f32` for training and inference,
/// `f64` for finite-difference gradient checks.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + 'static
{
    /// `c = alpha * a * b + beta * c` over strided row/column layouts.
    ///
    /// # Safety
    /// Every index reachable through the given dimensions and strides must
    /// be in bounds of the pointed-to buffers, and `c` must not alias `a` or `b`.
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

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
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

impl Real for f64 {
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

/// A trainable tensor with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param<T: Real> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<T>,
    pub grad: Vec<T>,
    /// Whether weight decay applies (false for biases and norm shifts).
    pub decay: bool,
}

impl<T: Real> Param<T> {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, value: Vec<T>, decay: bool) -> Self {
        assert_eq!(shape.iter().product::<usize>(), value.len(), "param shape/data mismatch");
        let grad = vec![T::zero(); value.len()];
        Self {
            name: name.into(),
            shape,
            value,
            grad,
            decay,
        }
    }

    pub fn zeros(name: impl Into<String>, shape: Vec<usize>, decay: bool) -> Self {
        let len = shape.iter().product();
        Self::new(name, shape, vec![T::zero(); len], decay)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }
}

/// A differentiable building block.
pub trait Module<T: Real>: Send + Sync {
    /// Inference pass. Dropout is disabled and no state is recorded.
    fn forward(&self, x: &Tensor<T>) -> Tensor<T>;

    /// Training pass: records what `backward` needs.
    fn forward_train(&mut self, x: &Tensor<T>, rng: &mut NnRng) -> Tensor<T>;

    /// Propagates `grad` (d loss / d output of the last `forward_train`),
    /// accumulating parameter gradients, and returns d loss / d input.
    fn backward(&mut self, grad: &Tensor<T>) -> Tensor<T>;

    fn visit_params(&self, _f: &mut dyn FnMut(&Param<T>)) {}

    fn visit_params_mut(&mut self, _f: &mut dyn FnMut(&mut Param<T>)) {}
}

pub fn zero_grad<T: Real, M: Module<T> + ?Sized>(module: &mut M) {
    module.visit_params_mut(&mut |p| p.zero_grad());
}

pub fn param_count<T: Real, M: Module<T> + ?Sized>(module: &M) -> usize {
    let mut n = 0;
    module.visit_params(&mut |p| n += p.len());
    n
}

/// Snapshot of all parameters, for checkpoints.
pub fn export_params<T: Real, M: Module<T> + ?Sized>(module: &M) -> Vec<NamedTensor> {
    let mut out = Vec::new();
    module.visit_params(&mut |p| {
        out.push(NamedTensor {
            name: p.name.clone(),
            shape: p.shape.clone(),
            data: p.value.iter().map(|v| v.as_f64() as f32).collect(),
        })
    });
    out
}

/// Loads parameters by name. Every parameter of `module` must be present
/// with a matching shape; extra tensors are ignored.
pub fn import_params<T: Real, M: Module<T> + ?Sized>(
    module: &mut M,
    tensors: &[NamedTensor],
) -> Result<()> {
    import_matching(module, tensors, |_| true)
}

/// Like [`import_params`] but only for parameters accepted by `select`.
pub fn import_matching<T: Real, M: Module<T> + ?Sized>(
    module: &mut M,
    tensors: &[NamedTensor],
    select: impl Fn(&str) -> bool,
) -> Result<()> {
    let mut failure = None;
    module.visit_params_mut(&mut |p| {
        if failure.is_some() || !select(&p.name) {
            return;
        }
        match tensors.iter().find(|t| t.name == p.name) {
            None => failure = Some(format!("missing tensor for layer `{}`", p.name)),
            Some(t) if t.shape != p.shape => {
                failure = Some(format!(
                    "shape mismatch for layer `{}`: expected {:?}, found {:?}",
                    p.name, p.shape, t.shape
                ))
            }
            Some(t) => {
                for (dst, src) in p.value.iter_mut().zip(&t.data) {
                    *dst = T::of(*src as f64);
                }
            }
        }
    });
    match failure {
        Some(msg) => Err(Error::Config(msg)),
        None => Ok(()),
    }
}

/// True when every parameter value and gradient is finite.
pub fn all_finite<T: Real, M: Module<T> + ?Sized>(module: &M) -> bool {
    let mut ok = true;
    module.visit_params(&mut |p| {
        ok &= p.value.iter().chain(&p.grad).all(|v| v.is_finite());
    });
    ok
}
