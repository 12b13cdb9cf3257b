//! The real dilogarithm `Li₂(z) = Σ zⁿ/n²` for `z ≤ 1`.

use std::f64::consts::PI;

use crate::error::{McfError, Result};

const PI2_6: f64 = PI * PI / 6.0;

/// Power series, accurate for `|z| ≤ 1/2`.
pub fn li2_series(z: f64) -> f64 {
    let mut term = z;
    let mut total = 0.0f64;
    let mut n = 1.0f64;
    while term.abs() > 1e-18 * total.abs().max(1e-300) || n < 2.0 {
        total += term / (n * n);
        term *= z;
        n += 1.0;
        if n > 10_000.0 {
            break;
        }
    }
    total
}

/// `Li₂(z)` for real `z ≤ 1`, by the series on `|z| ≤ 1/2` and the
/// reflection and Landen identities elsewhere.
pub fn li2(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(McfError::NonFinite("dilogarithm argument"));
    }
    if z > 1.0 {
        return Err(McfError::Domain(format!(
            "real dilogarithm needs z <= 1, got {z}"
        )));
    }
    Ok(li2_unchecked(z))
}

fn li2_unchecked(z: f64) -> f64 {
    if z == 1.0 {
        PI2_6
    } else if z.abs() <= 0.5 {
        li2_series(z)
    } else if z > 0.5 {
        // Li₂(z) + Li₂(1−z) = π²/6 − ln z ln(1−z)
        PI2_6 - z.ln() * (1.0 - z).ln() - li2_series(1.0 - z)
    } else {
        // Landen: Li₂(z) = −Li₂(z/(z−1)) − ½ ln²(1−z), with z/(z−1) ∈ (1/3, 1)
        let w = (1.0 - z).ln();
        -li2_unchecked(z / (z - 1.0)) - 0.5 * w * w
    }
}

/// Left-hand side of
/// `−π²/24 + ½ ln 3 ln 2 − ½ Li₂(2/3) + (3/2) Li₂(1/3) − Li₂(−1/3) = π²/24`.
pub fn brun_dilog_expression() -> f64 {
    -PI * PI / 24.0 + 0.5 * 3f64.ln() * 2f64.ln() - 0.5 * li2_unchecked(2.0 / 3.0)
        + 1.5 * li2_unchecked(1.0 / 3.0)
        - li2_unchecked(-1.0 / 3.0)
}

/// `|LHS − π²/24|` for the identity above.
pub fn dilog_identity_check() -> f64 {
    (brun_dilog_expression() - PI * PI / 24.0).abs()
}
