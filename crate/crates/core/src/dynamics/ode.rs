//! Dormand–Prince 5(4) embedded Runge–Kutta step on complex state vectors.

use crate::error::Result;
use crate::linalg::C64;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

/// One trial step of size `h` from `(t, y)`. Returns the fifth-order
/// solution and the scaled RMS error estimate (accept when ≤ 1).
pub fn dopri5_step<F>(f: &mut F, t: f64, y: &[C64], h: f64, tol: Tolerances) -> Result<(Vec<C64>, f64)>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
{
    let n = y.len();
    let mut k = vec![vec![C64::new(0.0, 0.0); n]; 7];
    let mut stage = vec![C64::new(0.0, 0.0); n];
    for s in 0..7 {
        stage.copy_from_slice(y);
        for (j, &a) in A[s].iter().enumerate() {
            if a != 0.0 {
                let w = h * a;
                for (st, kj) in stage.iter_mut().zip(&k[j]) {
                    *st += kj * w;
                }
            }
        }
        let (before, rest) = k.split_at_mut(s);
        let _ = before;
        f(t + C[s] * h, &stage, &mut rest[0])?;
    }
    // the last stage point is the 5th-order solution (FSAL)
    let y_new = stage;
    let mut acc = 0.0;
    for i in 0..n {
        let mut e = C64::new(0.0, 0.0);
        for s in 0..7 {
            if E[s] != 0.0 {
                e += k[s][i] * E[s];
            }
        }
        let sc = tol.abs + tol.rel * y[i].norm().max(y_new[i].norm());
        acc += (e * h).norm_sqr() / (sc * sc);
    }
    Ok((y_new, (acc / n.max(1) as f64).sqrt()))
}

/// Standard step-size update factor for a fifth-order method.
pub fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_phase() {
        // y' = −iωy
        let w = 3.0;
        let mut f = |_t: f64, y: &[C64], dy: &mut [C64]| {
            dy[0] = C64::new(0.0, -w) * y[0];
            Ok(())
        };
        let tol = Tolerances { rel: 1e-10, abs: 1e-12 };
        let (mut t, mut y, mut h): (f64, _, f64) = (0.0, vec![C64::new(1.0, 0.0)], 0.01);
        while t < 2.0 {
            let h_try = h.min(2.0 - t);
            let (yn, err) = dopri5_step(&mut f, t, &y, h_try, tol).unwrap();
            if err <= 1.0 {
                t += h_try;
                y = yn;
            }
            h = h_try * step_factor(err);
        }
        let exact = C64::from_polar(1.0, -w * 2.0);
        assert!((y[0] - exact).norm() < 1e-8);
    }
}
