//! Logistic loss on raw scores.

/// First and second derivatives of the loss per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientState {
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl GradientState {
    pub fn len(&self) -> usize {
        self.grad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grad.is_empty()
    }
}

pub fn sigmoid(raw: f64) -> f64 {
    if raw >= 0.0 {
        1.0 / (1.0 + (-raw).exp())
    } else {
        let e = raw.exp();
        e / (1.0 + e)
    }
}

/// Negative log-likelihood of `label` in {0, 1} at raw score `raw`.
pub fn logistic_loss(label: f64, raw: f64) -> f64 {
    // log(1 + e^raw) - y * raw, evaluated without overflow
    let softplus = if raw > 0.0 {
        raw + (-raw).exp().ln_1p()
    } else {
        raw.exp().ln_1p()
    };
    softplus - label * raw
}

pub fn mean_log_loss(labels: &[f64], raw: &[f64]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    labels
        .iter()
        .zip(raw)
        .map(|(&y, &f)| logistic_loss(y, f))
        .sum::<f64>()
        / labels.len() as f64
}

/// g = p - y, h = p (1 - p) with p = sigmoid(raw).
pub fn compute_gradients(labels: &[f64], raw: &[f64]) -> GradientState {
    assert_eq!(labels.len(), raw.len(), "labels and predictions must align");
    let (grad, hess) = labels
        .iter()
        .zip(raw)
        .map(|(&y, &f)| {
            let p = sigmoid(f);
            (p - y, p * (1.0 - p))
        })
        .unzip();
    GradientState { grad, hess }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn at_zero() {
        let s = compute_gradients(&[1.0, 0.0], &[0.0, 0.0]);
        assert_eq!(s.grad, [-0.5, 0.5]);
        assert_eq!(s.hess, [0.25, 0.25]);
    }

    #[test]
    fn saturation() {
        let s = compute_gradients(&[1.0], &[40.0]);
        assert!(s.grad[0].abs() < 1e-15 && s.hess[0] < 1e-15);
        assert!(logistic_loss(1.0, 800.0).is_finite());
        assert!(logistic_loss(0.0, -800.0).is_finite());
        assert!((logistic_loss(0.0, 800.0) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn sigmoid_symmetry() {
        for x in [-30.0, -1.5, 0.0, 0.3, 12.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
    }
}
