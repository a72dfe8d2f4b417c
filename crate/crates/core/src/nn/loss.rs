/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on `sigmoid(logit)`: `softplus(logit) - label * logit`.
/// Returns the loss and its derivative with respect to the logit.
pub fn bce_loss(logit: f64, label: bool) -> (f64, f64) {
    // softplus(x) - x == softplus(-x), without the cancellation
    if label {
        (softplus(-logit), sigmoid(logit) - 1.0)
    } else {
        (softplus(logit), sigmoid(logit))
    }
}
