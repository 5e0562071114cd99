//! Adaptive Dormand–Prince 5(4) integration for small autonomous systems.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Debug, Clone)]
pub struct OdeRun<const N: usize> {
    /// States at `t0 + i * interval` (and at the stopping time).
    pub outputs: Vec<(f64, [f64; N])>,
    /// True if `keep_going` stopped the integration.
    pub stopped: bool,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights (equal to the last row of `A`).
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, landing exactly on every
/// multiple of `interval`. `keep_going` is consulted after each accepted step.
pub fn integrate<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    interval: f64,
    tol: Tolerance,
    mut keep_going: impl FnMut(&[f64; N]) -> bool,
) -> Result<OdeRun<N>, OdeError> {
    let mut outputs = vec![(t0, y0)];
    let mut t = t0;
    let mut y = y0;
    let mut h = (interval * 0.1).min(1e-2).max(1e-12);
    let mut next_index = 1usize;
    let mut k = [[0.0; N]; 7];
    k[0] = f(t, &y);
    while t < t_end {
        let t_out = (t0 + next_index as f64 * interval).min(t_end);
        let clipped = t + h >= t_out;
        let step = if clipped { t_out - t } else { h };
        if step < 1e-14 * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow { t });
        }
        for s in 1..7 {
            let mut ys = y;
            for i in 0..N {
                ys[i] += step * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            k[s] = f(t + C[s] * step, &ys);
        }
        let mut y5 = y;
        let mut err: f64 = 0.0;
        for i in 0..N {
            let d5: f64 = (0..7).map(|s| B5[s] * k[s][i]).sum();
            let d4: f64 = (0..7).map(|s| B4[s] * k[s][i]).sum();
            y5[i] += step * d5;
            let scale = tol.atol + tol.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((step * (d5 - d4)).abs() / scale);
        }
        if !y5.iter().all(|x| x.is_finite()) || !err.is_finite() {
            if step < 1e-12 {
                return Err(OdeError::NonFinite { t });
            }
            h = step * 0.1;
            continue;
        }
        if err <= 1.0 {
            t = if clipped { t_out } else { t + step };
            y = y5;
            // First-same-as-last: the last stage is f at the new point.
            k[0] = k[6];
            if clipped {
                outputs.push((t, y));
                next_index += 1;
            }
            if !keep_going(&y) {
                if !clipped {
                    outputs.push((t, y));
                }
                return Ok(OdeRun {
                    outputs,
                    stopped: true,
                });
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        // Only grow from a full step; a clipped step says nothing about h.
        if err > 1.0 || !clipped {
            h = step * factor;
        }
    }
    Ok(OdeRun {
        outputs,
        stopped: false,
    })
}
