//! Dormand–Prince 5(4) with continuous extension of order four.
//!
//! The integrator works on real state vectors. Callers split the time axis
//! into pieces on which the right-hand side is smooth and call
//! [`Dopri5::integrate_piece`] once per piece; no stage is ever evaluated
//! outside the closed piece.

use crate::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const MAX_STEPS: usize = 1_000_000;

/// Counters accumulated over all pieces.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest scaled local error estimate among accepted steps.
    pub max_error_estimate: f64,
}

/// One accepted step with its interpolation coefficients.
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub t: f64,
    pub h: f64,
    rcont: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t_end(&self) -> f64 {
        self.t + self.h
    }

    /// True if `s` lies in the closed step interval.
    pub fn covers(&self, s: f64) -> bool {
        let (lo, hi) = if self.h >= 0.0 {
            (self.t, self.t + self.h)
        } else {
            (self.t + self.h, self.t)
        };
        lo <= s && s <= hi
    }

    pub fn interpolate(&self, s: f64, out: &mut [f64]) {
        let theta = if self.h == 0.0 { 0.0 } else { (s - self.t) / self.h };
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
    }

    /// State at the end of the step.
    pub fn end_state(&self) -> Vec<f64> {
        self.rcont[0].iter().zip(&self.rcont[1]).map(|(a, b)| a + b).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    /// Step size carried over between pieces.
    h_prev: Option<f64>,
    pub stats: IntegratorStats,
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Dopri5 {
            rtol,
            atol,
            h_prev: None,
            stats: IntegratorStats::default(),
        }
    }

    fn error_norm(&self, y0: &[f64], y1: &[f64], err: &[f64]) -> f64 {
        let n = y0.len().max(1);
        let s: f64 = (0..y0.len())
            .map(|i| {
                let sc = self.atol + self.rtol * y0[i].abs().max(y1[i].abs());
                (err[i] / sc).powi(2)
            })
            .sum();
        (s / n as f64).sqrt()
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction) and
    /// returns the final state. `y` is updated in place and every accepted
    /// step is passed to `sink`.
    pub fn integrate_piece<F, S>(
        &mut self,
        mut f: F,
        t0: f64,
        t1: f64,
        y: &mut Vec<f64>,
        mut sink: S,
    ) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
        S: FnMut(DenseStep),
    {
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        let n = y.len();
        let mut k = vec![vec![0.0; n]; 7];
        let mut tmp = vec![0.0; n];
        let mut y1 = vec![0.0; n];
        let mut err = vec![0.0; n];

        let mut t = t0;
        f(t, y, &mut k[0])?;
        self.stats.rhs_evals += 1;

        let mut h = match self.h_prev {
            Some(h) => h.abs().min(span.abs()),
            None => self.initial_step(y, &k[0], span.abs()),
        } * dir;
        let mut last_rejected = false;
        let mut steps = 0usize;

        loop {
            let remaining = t1 - t;
            if remaining * dir <= 0.0 {
                break;
            }
            let h_nat = h;
            if h.abs() >= remaining.abs() * (1.0 - 1e-12) {
                h = remaining;
            }
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: "maximum number of steps exceeded".into(),
                });
            }
            if h.abs() <= 1e-14 * t.abs().max(1.0) && h != remaining {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }

            let stage = |kk: &[Vec<f64>], coeffs: &[f64], out: &mut [f64]| {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, c) in coeffs.iter().enumerate() {
                        acc += c * kk[j][i];
                    }
                    out[i] = y[i] + h * acc;
                }
            };

            stage(&k, &[A21], &mut tmp);
            f(t + C2 * h, &tmp, &mut k[1])?;
            stage(&k, &[A31, A32], &mut tmp);
            f(t + C3 * h, &tmp, &mut k[2])?;
            stage(&k, &[A41, A42, A43], &mut tmp);
            f(t + C4 * h, &tmp, &mut k[3])?;
            stage(&k, &[A51, A52, A53, A54], &mut tmp);
            f(t + C5 * h, &tmp, &mut k[4])?;
            stage(&k, &[A61, A62, A63, A64, A65], &mut tmp);
            let t_new = if h == remaining { t1 } else { t + h };
            f(t_new, &tmp, &mut k[5])?;
            stage(&k, &[A71, 0.0, A73, A74, A75, A76], &mut y1);
            f(t_new, &y1, &mut k[6])?;
            self.stats.rhs_evals += 6;

            for i in 0..n {
                err[i] = h
                    * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                        + E7 * k[6][i]);
            }
            let e = self.error_norm(y, &y1, &err);
            if !e.is_finite() {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: "non-finite state".into(),
                });
            }
            let fac = if e == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * e.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };

            if e <= 1.0 {
                self.stats.accepted += 1;
                self.stats.max_error_estimate = self.stats.max_error_estimate.max(e);
                let r1 = y.clone();
                let r2: Vec<f64> = (0..n).map(|i| y1[i] - y[i]).collect();
                let r3: Vec<f64> = (0..n).map(|i| h * k[0][i] - r2[i]).collect();
                let r4: Vec<f64> = (0..n).map(|i| r2[i] - h * k[6][i] - r3[i]).collect();
                let r5: Vec<f64> = (0..n)
                    .map(|i| {
                        h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i]
                            + D6 * k[5][i]
                            + D7 * k[6][i])
                    })
                    .collect();
                sink(DenseStep {
                    t,
                    h: t_new - t,
                    rcont: [r1, r2, r3, r4, r5],
                });
                y.copy_from_slice(&y1);
                k.swap(0, 6);
                let grown = if last_rejected { h.abs().min(h.abs() * fac) } else { h.abs() * fac };
                self.h_prev = Some(if h == remaining { grown.max(h_nat.abs()) } else { grown });
                t = t_new;
                h = grown * dir;
                last_rejected = false;
            } else {
                self.stats.rejected += 1;
                h *= fac.min(1.0);
                last_rejected = true;
            }
        }
        Ok(())
    }

    fn initial_step(&self, y: &[f64], f0: &[f64], span: f64) -> f64 {
        let sc: Vec<f64> = y.iter().map(|v| self.atol + self.rtol * v.abs()).collect();
        let d0 = rms(y, &sc);
        let d1 = rms(f0, &sc);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span).max(1e-10 * span)
    }
}

fn rms(v: &[f64], sc: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().zip(sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut rk = Dopri5::new(1e-10, 1e-12);
        let mut y = vec![1.0];
        let mut steps = Vec::new();
        rk.integrate_piece(
            |_, y, dy| {
                dy[0] = -y[0];
                Ok(())
            },
            0.0,
            3.0,
            &mut y,
            |s| steps.push(s),
        )
        .unwrap();
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-9);
        let mut out = [0.0];
        for s in &steps {
            let mid = s.t + 0.37 * s.h;
            s.interpolate(mid, &mut out);
            assert!((out[0] - (-mid).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn backward_harmonic_oscillator() {
        let mut rk = Dopri5::new(1e-10, 1e-12);
        let mut y = vec![0.0, 1.0];
        rk.integrate_piece(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            -2.0,
            &mut y,
            |_| {},
        )
        .unwrap();
        assert!((y[0] - (-2.0f64).sin()).abs() < 1e-9);
        assert!((y[1] - (-2.0f64).cos()).abs() < 1e-9);
    }
}
