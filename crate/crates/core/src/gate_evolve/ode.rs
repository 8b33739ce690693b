//! Adaptive Dormand–Prince 5(4) integration of complex linear systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Step-size controller settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl Dopri5 {
    pub fn new(tol: f64) -> Self {
        Dopri5 {
            rtol: tol,
            atol: tol,
            max_steps: 5_000_000,
        }
    }

    /// Integrate `y' = f(t, y)` from `t0` through every time in `stops`
    /// (ascending, all `>= t0`), calling `observe` with the state at each.
    /// Steps are clipped so that every stop is hit exactly.
    pub fn solve<F, O>(&self, mut f: F, t0: f64, y: &mut [Complex64], stops: &[f64], mut observe: O) -> Result<Stats>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
        O: FnMut(f64, &[Complex64]),
    {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(crate::error::invalid("tolerances must be positive"));
        }
        if stops.windows(2).any(|w| w[1] < w[0]) || stops.first().is_some_and(|&s| s < t0) {
            return Err(crate::error::invalid("stop times must be ascending and after t0"));
        }
        let n = y.len();
        let mut k: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); n]; 7];
        let mut tmp = vec![Complex64::default(); n];
        let mut y_new = vec![Complex64::default(); n];
        let mut stats = Stats::default();

        let mut t = t0;
        f(t, y, &mut k[0]);
        stats.evaluations += 1;
        let mut h = {
            let ny = norm(y).max(1e-10);
            let nf = norm(&k[0]).max(1e-10);
            let span = stops.last().map_or(0.0, |&s| s - t0);
            (0.01 * ny / nf).min(span.max(f64::MIN_POSITIVE))
        };

        for &stop in stops {
            while t < stop {
                if stats.accepted + stats.rejected >= self.max_steps {
                    return Err(Error::Integration {
                        time: t,
                        reason: "step budget exhausted".into(),
                    });
                }
                let clipped = h >= stop - t;
                let step = if clipped { stop - t } else { h };
                if step <= f64::EPSILON * t.abs().max(1e-30) {
                    return Err(Error::Integration {
                        time: t,
                        reason: "step size underflow".into(),
                    });
                }

                let rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
                for (s, row) in rows.iter().enumerate() {
                    for i in 0..n {
                        let mut acc = Complex64::default();
                        for (j, &a) in row.iter().enumerate() {
                            acc += k[j][i] * a;
                        }
                        tmp[i] = y[i] + acc * step;
                    }
                    f(t + C[s] * step, &tmp, &mut k[s + 1]);
                }
                for i in 0..n {
                    let mut acc = Complex64::default();
                    for (j, &b) in B.iter().enumerate() {
                        acc += k[j][i] * b;
                    }
                    y_new[i] = y[i] + acc * step;
                }
                let (head, tail) = k.split_at_mut(6);
                f(t + step, &y_new, &mut tail[0]);
                stats.evaluations += 6;

                let mut err = 0.0;
                for i in 0..n {
                    let mut acc = tail[0][i] * E[6];
                    for (j, &e) in E[..6].iter().enumerate() {
                        acc += head[j][i] * e;
                    }
                    let scale = self.atol + self.rtol * y[i].norm().max(y_new[i].norm());
                    let r = (acc * step).norm() / scale;
                    err += r * r;
                }
                let err = (err / n.max(1) as f64).sqrt();

                if err <= 1.0 {
                    t = if clipped { stop } else { t + step };
                    y.copy_from_slice(&y_new);
                    k.swap(0, 6);
                    stats.accepted += 1;
                    let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if !clipped || grow < 1.0 {
                        h = step * grow;
                    }
                } else {
                    stats.rejected += 1;
                    h = step * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                }
            }
            observe(t, y);
        }
        Ok(stats)
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
