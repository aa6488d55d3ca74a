use super::tensor::Tensor;

/// Weighted mean squared error over a batch of scalar predictions.
///
/// Returns the loss `Σ wᵢ (pᵢ − tᵢ)² / n` and its gradient with respect to
/// the predictions. Unit weights give the plain mean squared error.
pub fn weighted_mse(pred: &Tensor, target: &[f64], weights: Option<&[f64]>) -> (f64, Tensor) {
    let n = pred.len();
    assert_eq!(n, target.len(), "prediction/target length mismatch");
    if let Some(w) = weights {
        assert_eq!(n, w.len(), "weight length mismatch");
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(n);
    for (i, (&p, &t)) in pred.data().iter().zip(target).enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let d = p - t;
        loss += w * d * d;
        grad.push(2.0 * w * d / n as f64);
    }
    let grad = Tensor::new(pred.shape(), grad).expect("same shape");
    (loss / n as f64, grad)
}

pub fn mse(pred: &Tensor, target: &[f64]) -> (f64, Tensor) {
    weighted_mse(pred, target, None)
}
