pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BceOutput {
    pub loss: f64,
    /// dloss/dp at the (possibly clamped) prediction.
    pub grad: f64,
    /// Set when `pred` was outside `[1e-12, 1 - 1e-12]` and got clamped.
    pub clamped: bool,
}

/// `-[w_pos * y * ln p + (1 - y) * ln(1 - p)]`.
pub fn weighted_bce(pred: f64, label: u8, w_pos: f64) -> BceOutput {
    let p = pred.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let clamped = p != pred;
    let y = f64::from(label.min(1));
    BceOutput {
        loss: -(w_pos * y * p.ln() + (1.0 - y) * (1.0 - p).ln()),
        grad: -w_pos * y / p + (1.0 - y) / (1.0 - p),
        clamped,
    }
}

/// Gradient with respect to the logit `z` where `p = sigmoid(z)`.
pub fn weighted_bce_logit_grad(p: f64, label: u8, w_pos: f64) -> f64 {
    let y = f64::from(label.min(1));
    -w_pos * y * (1.0 - p) + (1.0 - y) * p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::relative_error;
    use crate::neural::sigmoid;

    #[test]
    fn closed_forms() {
        let ln2 = std::f64::consts::LN_2;
        assert!((weighted_bce(0.5, 1, 5.0).loss - 5.0 * ln2).abs() < 1e-12);
        assert!((weighted_bce(0.5, 0, 5.0).loss - ln2).abs() < 1e-12);
        assert!(weighted_bce(1.0 - 1e-15, 1, 5.0).loss < 1e-10);
    }

    #[test]
    fn clamps_and_flags() {
        let out = weighted_bce(0.0, 1, 1.0);
        assert!(out.clamped && out.loss.is_finite());
        assert!(weighted_bce(1.0, 0, 1.0).clamped);
        assert!(!weighted_bce(0.3, 0, 1.0).clamped);
    }

    #[test]
    fn gradient_matches_differences() {
        let eps = 1e-6;
        let (mut an, mut nu) = (Vec::new(), Vec::new());
        for &p in &[0.01, 0.2, 0.5, 0.77, 0.99] {
            for y in [0u8, 1] {
                an.push(weighted_bce(p, y, 5.0).grad);
                nu.push((weighted_bce(p + eps, y, 5.0).loss - weighted_bce(p - eps, y, 5.0).loss) / (2.0 * eps));
                let z = (p / (1.0 - p)).ln();
                an.push(weighted_bce_logit_grad(p, y, 5.0));
                let f = |z: f64| weighted_bce(sigmoid(z), y, 5.0).loss;
                nu.push((f(z + eps) - f(z - eps)) / (2.0 * eps));
            }
        }
        assert!(relative_error(&an, &nu) < 1e-6);
    }
}
