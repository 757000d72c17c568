//! Pairwise logistic loss pieces. With one control per case the sampled
//! partial likelihood of a pair is sigma(delta), delta = f(case) - f(control).

/// log(1 + e^z) without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Negative log-likelihood of one pair, `softplus(-delta)`.
#[inline]
pub fn pair_nll(delta: f64) -> f64 {
    softplus(-delta)
}

/// d pair_nll / d delta = -sigma(-delta)
#[inline]
pub fn pair_nll_grad(delta: f64) -> f64 {
    -sigmoid(-delta)
}
