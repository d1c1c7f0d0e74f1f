//! The special functions behind the entropy inequalities.
//!
//! `F(x) = 2x artanh(x)` converts a drift or return-probability quantity into an
//! entropy lower bound. `G(x) = 1 - sqrt(1-x^2)` and the composition `FG_inv = F o G^{-1}`
//! turn a spectral-radius deficit `1 - rho` into the same scale. `A_carne` is the
//! large-deviation rate of the simple walk on the integers, and `A_ledr` the excess
//! of `F` over four times `G`.

use crate::{Error, Result};

/// Inverse hyperbolic tangent, stable for |x| near 1.
pub fn artanh(x: f64) -> f64 {
    0.5 * (2.0 * x / (1.0 - x)).ln_1p()
}

/// F(x) = 2x artanh(x) on (-1, 1). Even, F(0) = 0, F(x) > x^2 away from 0.
pub fn f(x: f64) -> Result<f64> {
    if !(x > -1.0 && x < 1.0) {
        return Err(Error::Domain(format!("F defined on (-1,1), got {x}")));
    }
    Ok(2.0 * x * artanh(x))
}

/// G(x) = 1 - sqrt(1-x^2) on [-1, 1], evaluated without cancellation near 0.
pub fn g(x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("G defined on [-1,1], got {x}")));
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    Ok(x * x / (1.0 + s))
}

/// FG_inv(x) = F(G^{-1}(x)) on [0, 1).
///
/// Closed form: with y = sqrt(x(2-x)), FG_inv(x) = y log((1+y)/(1-y)); the identity
/// 1 - y^2 = (1-x)^2 lets the log be taken as log((1+y)/(1-x)) squared, avoiding
/// cancellation as y -> 1. Below x = 1e-3 the Taylor series is used.
pub fn fg_inv(x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain(format!("FG_inv defined on [0,1), got {x}")));
    }
    if x < 1e-3 {
        return Ok(fg_inv_series(x));
    }
    let y = (x * (2.0 - x)).sqrt();
    Ok(2.0 * y * (y.ln_1p() - (-x).ln_1p()))
}

/// Taylor coefficients of FG_inv: c1 = 4 and (2n-1) c_n = (n-2) c_{n-1} + 2.
pub fn fg_inv_coeffs(count: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(count);
    for n in 1..=count {
        if n == 1 {
            c.push(4.0);
        } else {
            let prev = c[n - 2];
            c.push(((n as f64 - 2.0) * prev + 2.0) / (2.0 * n as f64 - 1.0));
        }
    }
    c
}

/// Series evaluation of FG_inv, truncated adaptively. Valid on [0, 1); terms
/// decay like (2/n) x^n so convergence is geometric for x < 1.
pub fn fg_inv_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut c = 4.0;
    let mut xn = x;
    for n in 1..=600usize {
        if n > 1 {
            c = ((n as f64 - 2.0) * c + 2.0) / (2.0 * n as f64 - 1.0);
            xn *= x;
        }
        let term = c * xn;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// A_carne(x) = (1+x) log(1+x) + (1-x) log(1-x) on [0, 1]; A(1) = 2 log 2.
pub fn a_carne(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("A_carne defined on [0,1], got {x}")));
    }
    let hi = (1.0 + x) * x.ln_1p();
    let lo = if x == 1.0 { 0.0 } else { (1.0 - x) * (-x).ln_1p() };
    Ok(hi + lo)
}

/// A_ledr(x) = 2x artanh(x) + 4 sqrt(1-x^2) - 4 on [0, 1); equals F(x) - 4 G(x).
pub fn a_ledr(x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain(format!("A_ledr defined on [0,1), got {x}")));
    }
    Ok(2.0 * x * artanh(x) + 4.0 * (1.0 - x * x).sqrt() - 4.0)
}

/// Evaluate a special function by name; names match the report vocabulary.
pub fn eval_special(name: &str, x: f64) -> Result<f64> {
    match name {
        "F" => f(x),
        "G" => g(x),
        "FG_inv" => fg_inv(x),
        "A_carne" => a_carne(x),
        "A_ledr" => a_ledr(x),
        _ => Err(Error::Domain(format!("unknown special function {name}"))),
    }
}
