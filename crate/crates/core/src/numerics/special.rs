//! Error function and its inverse.

use crate::error::{Error, Result};

const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Error function, accurate to about one ulp over the whole real line.
#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function `1 - erf(x)` without cancellation for large x.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse error function on (-1, 1).
///
/// Starts from Giles' single-precision rational approximation and polishes
/// with Halley steps on `erf(x) - y`. Near |y| = 1 the residual is taken on
/// `erfc` to keep relative accuracy in the tail.
pub fn erfinv(y: f64) -> Result<f64> {
    if !y.is_finite() || y.abs() >= 1.0 {
        return Err(Error::Domain(format!("erfinv undefined at {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let mut x = giles_initial(y);
    let tail = y.abs() > 0.5;
    for _ in 0..4 {
        let r = if tail {
            // erf(x) - y = (1 - y) - erfc(x) for y > 0, mirrored for y < 0.
            let s = y.signum();
            s * ((1.0 - y.abs()) - erfc(x.abs()))
        } else {
            erf(x) - y
        };
        let slope = TWO_OVER_SQRT_PI * (-x * x).exp();
        if slope == 0.0 {
            break;
        }
        let step = r / slope;
        // Halley: erf'' / erf' = -2x.
        let dx = step / (1.0 + x * step);
        x -= dx;
        if dx.abs() <= 1e-17 * x.abs().max(1e-300) {
            break;
        }
    }
    Ok(x)
}

fn giles_initial(y: f64) -> f64 {
    let mut w = -((1.0 - y) * (1.0 + y)).ln();
    let p = if w < 5.0 {
        w -= 2.5;
        let mut p = 2.810_226_36e-08;
        p = 3.432_739_39e-07 + p * w;
        p = -3.523_387_7e-06 + p * w;
        p = -4.391_506_54e-06 + p * w;
        p = 0.000_218_580_87 + p * w;
        p = -0.001_253_725_03 + p * w;
        p = -0.004_177_681_64 + p * w;
        p = 0.246_640_727 + p * w;
        1.501_409_41 + p * w
    } else {
        w = w.sqrt() - 3.0;
        let mut p = -0.000_200_214_257;
        p = 0.000_100_950_558 + p * w;
        p = 0.001_349_343_22 + p * w;
        p = -0.003_673_428_44 + p * w;
        p = 0.005_739_507_73 + p * w;
        p = -0.007_622_461_3 + p * w;
        p = 0.009_438_870_47 + p * w;
        p = 1.001_674_06 + p * w;
        2.832_976_82 + p * w
    };
    p * y
}
