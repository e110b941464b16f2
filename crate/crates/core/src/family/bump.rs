//! Smooth radial cut-off: identically 1 on `[0, 2]`, 0 on `[3, inf)`,
//! strictly decreasing in between.

use crate::error::{invalid, Result};

/// Radius below which the profile is exactly 1.
pub const FLAT_RADIUS: f64 = 2.0;
/// Radius beyond which the profile is exactly 0.
pub const SUPPORT_RADIUS: f64 = 3.0;
/// Radius of the chart image ball.
pub const CHART_RADIUS: f64 = 4.0;

/// `beta(r) = g(3 - r) / (g(3 - r) + g(r - 2))` with `g(x) = exp(-1/x)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct BumpProfile;

impl BumpProfile {
    #[inline]
    pub fn eval(r: f64) -> f64 {
        if r <= FLAT_RADIUS {
            1.0
        } else if r >= SUPPORT_RADIUS {
            0.0
        } else {
            // g(3-r) / (g(3-r) + g(r-2)) = 1 / (1 + exp(1/(3-r) - 1/(r-2)))
            1.0 / (1.0 + exponent(r).exp())
        }
    }

    #[inline]
    pub fn deriv(r: f64) -> f64 {
        Self::eval_with_deriv(r).1
    }

    /// `(beta(r), beta'(r))` sharing one exponential.
    #[inline]
    pub fn eval_with_deriv(r: f64) -> (f64, f64) {
        if r <= FLAT_RADIUS {
            (1.0, 0.0)
        } else if r >= SUPPORT_RADIUS {
            (0.0, 0.0)
        } else {
            let xa = SUPPORT_RADIUS - r;
            let xb = r - FLAT_RADIUS;
            let eu = exponent(r).exp();
            let b = 1.0 / (1.0 + eu);
            // 1 - b without cancellation
            let omb = 1.0 / (1.0 + 1.0 / eu);
            let du = 1.0 / (xa * xa) + 1.0 / (xb * xb);
            (b, -b * omb * du)
        }
    }
}

#[inline]
fn exponent(r: f64) -> f64 {
    1.0 / (SUPPORT_RADIUS - r) - 1.0 / (r - FLAT_RADIUS)
}

/// Checked profile value for `r >= 0`.
pub fn bump_eval(r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(BumpProfile::eval(r))
}

/// Checked analytic derivative for `r >= 0`.
pub fn bump_deriv(r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(BumpProfile::deriv(r))
}

fn check_radius(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("bump radius must be finite and >= 0, got {r}")))
    }
}
