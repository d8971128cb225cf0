use super::layers::sigmoid;
use super::{Real, Tensor};

/// Mean per-pixel softmax cross-entropy of `C`-channel logits against
/// integer labels (row-major, one per pixel). Returns the loss and its
/// gradient with respect to the logits.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor<T>, labels: &[u8]) -> (T, Tensor<T>) {
    let (c, h, w) = logits.shape();
    let n = h * w;
    assert_eq!(labels.len(), n, "label count must equal pixel count");
    let data = logits.data();
    let inv_n = T::one() / T::of(n as f64);
    let mut grad = vec![T::zero(); c * n];
    let mut total = T::zero();
    for p in 0..n {
        let label = labels[p] as usize;
        assert!(label < c, "label {label} out of range for {c} classes");
        let max = (0..c).map(|k| data[k * n + p]).fold(T::neg_infinity(), T::max);
        let sum: T = (0..c).map(|k| (data[k * n + p] - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - data[label * n + p];
        for k in 0..c {
            let prob = (data[k * n + p] - log_z).exp();
            let onehot = if k == label { T::one() } else { T::zero() };
            grad[k * n + p] = (prob - onehot) * inv_n;
        }
    }
    (total * inv_n, Tensor::from_vec(c, h, w, grad))
}

/// Mean binary cross-entropy of sigmoid(`logits`) against a constant target.
pub fn bce_with_logits<T: Real>(logits: &Tensor<T>, target: f64) -> (T, Tensor<T>) {
    let t = T::of(target);
    let inv_n = T::one() / T::of(logits.len() as f64);
    let loss = logits
        .data()
        .iter()
        .map(|&z| z.max(T::zero()) - z * t + (T::one() + (-z.abs()).exp()).ln())
        .sum::<T>()
        * inv_n;
    let grad = logits.map(|z| (sigmoid(z) - t) * inv_n);
    (loss, grad)
}

/// Mean absolute error and its (sub)gradient with respect to `pred`.
pub fn l1_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> (T, Tensor<T>) {
    assert_eq!(pred.shape(), target.shape(), "l1_loss shape mismatch");
    let inv_n = T::one() / T::of(pred.len() as f64);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let d = p - t;
        loss += d.abs();
        grad.push(if d > T::zero() {
            inv_n
        } else if d < T::zero() {
            -inv_n
        } else {
            T::zero()
        });
    }
    let (c, h, w) = pred.shape();
    (loss * inv_n, Tensor::from_vec(c, h, w, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln2() {
        let logits = Tensor::<f64>::zeros(2, 3, 3);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 1, 1, 0, 0, 1, 0, 1, 1]);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let logits = Tensor::<f64>::from_fn(2, 2, 3, |c, y, x| ((c + 2 * y + 5 * x) as f64).sin());
        let labels = [1, 0, 1, 1, 0, 0];
        let (_, grad) = softmax_cross_entropy(&logits, &labels);
        for i in 0..logits.len() {
            let mut p = logits.clone();
            p.data_mut()[i] += 1e-6;
            let mut m = logits.clone();
            m.data_mut()[i] -= 1e-6;
            let fd = (softmax_cross_entropy(&p, &labels).0 - softmax_cross_entropy(&m, &labels).0) / 2e-6;
            assert!((fd - grad.data()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        let z = Tensor::<f64>::from_fn(1, 2, 2, |_, y, x| (y as f64 - x as f64) * 3.0 + 0.5);
        for target in [0.0, 1.0] {
            let (_, grad) = bce_with_logits(&z, target);
            for i in 0..z.len() {
                let mut p = z.clone();
                p.data_mut()[i] += 1e-6;
                let mut m = z.clone();
                m.data_mut()[i] -= 1e-6;
                let fd = (bce_with_logits(&p, target).0 - bce_with_logits(&m, target).0) / 2e-6;
                assert!((fd - grad.data()[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn l1_of_identical_tensors_is_zero() {
        let a = Tensor::<f32>::filled(1, 2, 2, 0.3);
        let (loss, grad) = l1_loss(&a, &a);
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }
}
