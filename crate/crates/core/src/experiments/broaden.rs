//! Gaussian smoothing of scan curves (quasistatic tilt noise applied after
//! the fact).

use crate::error::{Error, Result};
use crate::units;

/// Kernel half-width in standard deviations.
const KERNEL_CUT: f64 = 6.0;

/// Convolve `(x, y)` with a unit-area Gaussian of standard deviation
/// `width_mphi0` (x in rad). A non-uniform grid is first resampled linearly
/// onto a uniform one with the same number of points; the returned curve is
/// on that uniform grid. Near the edges the truncated kernel is
/// renormalised.
pub fn gaussian_broaden(x: &[f64], y: &[f64], width_mphi0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(width_mphi0 > 0.0 && width_mphi0.is_finite()) {
        return Err(Error::InvalidInput(format!("broadening width must be positive, got {width_mphi0}")));
    }
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidInput("broadening needs at least two (x, y) samples of equal length".into()));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("broadening grid must be strictly increasing".into()));
    }
    let n = x.len();
    let h = (x[n - 1] - x[0]) / (n - 1) as f64;
    let uniform = x.iter().enumerate().all(|(i, &xi)| (xi - (x[0] + h * i as f64)).abs() <= 1e-9 * h);
    let (xs, ys) = if uniform {
        (x.to_vec(), y.to_vec())
    } else {
        let xs: Vec<f64> = (0..n).map(|i| x[0] + h * i as f64).collect();
        let ys = xs.iter().map(|&t| interpolate(x, y, t)).collect();
        (xs, ys)
    };

    let sigma = units::mphi0_to_rad(width_mphi0) / h;
    let reach = (KERNEL_CUT * sigma).ceil() as usize;
    let kernel: Vec<f64> = (0..=reach).map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp()).collect();
    let out = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(reach);
            let hi = (i + reach).min(n - 1);
            let (mut acc, mut norm) = (0.0, 0.0);
            for (j, yj) in ys.iter().enumerate().take(hi + 1).skip(lo) {
                let w = kernel[i.abs_diff(j)];
                acc += w * yj;
                norm += w;
            }
            acc / norm
        })
        .collect();
    Ok((xs, out))
}

/// Piecewise-linear interpolation on an increasing grid, clamped at the ends.
pub fn interpolate(x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len();
    if t <= x[0] {
        return y[0];
    }
    if t >= x[n - 1] {
        return y[n - 1];
    }
    let k = x.partition_point(|&v| v <= t).clamp(1, n - 1);
    let f = (t - x[k - 1]) / (x[k] - x[k - 1]);
    y[k - 1] + f * (y[k] - y[k - 1])
}
