use serde::Serialize;

use crate::linalg::{adjugate_inverse, condition_number, identity, spectral_norm};
use crate::matfun::{MatrixFunction, PiecewiseMatrixFunction};
use crate::{CMat, Error, Interval, Result, Tolerances};

use super::rk::{DenseStep, Dopri5, IntegratorStats};
use super::{eval_in_piece, pack_mat, piece_bounds, unpack_mat};

/// Consistency measurements taken at every accepted step end.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FlowDiagnostics {
    /// `max ‖X(t) X(t)⁻¹ − I‖₂` with the companion-integrated inverse.
    pub max_inverse_residual: f64,
    /// Largest relative gap between the companion inverse and the adjugate
    /// formula `det(X)⁻¹ adj(X)`.
    pub max_adjugate_gap: f64,
    pub max_condition: f64,
    pub nodes_checked: usize,
    pub stats: IntegratorStats,
}

/// Fundamental solution `X` of `X' = A X`, `X(t0) = I`, together with its
/// inverse `Y = X⁻¹` obtained from `Y' = −Y A`.
///
/// Implements [`MatrixFunction`] for `X`; the breakpoints are those of `A`,
/// where `X` stays continuous and only its derivative jumps.
#[derive(Clone, Debug)]
pub struct FundamentalSolution {
    anchor: f64,
    span: Interval,
    n: usize,
    a: PiecewiseMatrixFunction,
    forward: Vec<DenseStep>,
    backward: Vec<DenseStep>,
    breakpoints: Vec<f64>,
    rtol: f64,
    diagnostics: FlowDiagnostics,
}

impl FundamentalSolution {
    pub fn compute(a: &PiecewiseMatrixFunction, t0: f64, span: Interval, tol: &Tolerances) -> Result<Self> {
        let domain = a.domain();
        if !domain.contains_interval(&span) {
            return Err(Error::OutOfDomain {
                t: if domain.contains(span.start) { span.end } else { span.start },
                start: domain.start,
                end: domain.end,
            });
        }
        span.check(t0)?;
        let n = a.shape().0;
        let bps: Vec<f64> = a.breakpoints().into_iter().filter(|t| span.is_interior(*t)).collect();
        let mut rk = Dopri5::new(tol.rtol, tol.atol);

        let run = |end: f64, rk: &mut Dopri5| -> Result<Vec<DenseStep>> {
            let mut steps = Vec::new();
            let mut y = vec![0.0; 4 * n * n];
            pack_mat(&identity(n), &mut y[..2 * n * n]);
            pack_mat(&identity(n), &mut y[2 * n * n..]);
            let bounds = piece_bounds(t0, end, &bps);
            for w in bounds.windows(2) {
                let (p0, p1) = (w[0], w[1]);
                rk.integrate_piece(
                    |t, s, ds| {
                        let at = eval_in_piece(a, t, p0, p1)?;
                        let x = unpack_mat(&s[..2 * n * n], n, n);
                        let yi = unpack_mat(&s[2 * n * n..], n, n);
                        pack_mat(&(&at * x), &mut ds[..2 * n * n]);
                        pack_mat(&(-(yi * &at)), &mut ds[2 * n * n..]);
                        Ok(())
                    },
                    p0,
                    p1,
                    &mut y,
                    |st| steps.push(st),
                )?;
            }
            Ok(steps)
        };

        let forward = if span.end > t0 { run(span.end, &mut rk)? } else { Vec::new() };
        let backward = if span.start < t0 { run(span.start, &mut rk)? } else { Vec::new() };

        let mut fs = FundamentalSolution {
            anchor: t0,
            span,
            n,
            a: a.clone(),
            forward,
            backward,
            breakpoints: bps,
            rtol: tol.rtol.max(tol.atol),
            diagnostics: FlowDiagnostics::default(),
        };
        fs.diagnostics.stats = rk.stats;
        fs.validate(tol)?;
        Ok(fs)
    }

    fn validate(&mut self, tol: &Tolerances) -> Result<()> {
        let ends: Vec<f64> = self
            .forward
            .iter()
            .chain(&self.backward)
            .map(|s| s.t_end())
            .collect();
        let id = identity(self.n);
        for t in ends {
            let (x, y) = self.pair(t);
            let cond = condition_number(&x);
            if !(cond <= 1.0 / tol.inv) {
                return Err(Error::SingularityDetected { t, cond });
            }
            let res = spectral_norm(&(&x * &y - &id));
            let adj = adjugate_inverse(&x).ok_or(Error::SingularityDetected {
                t,
                cond: f64::INFINITY,
            })?;
            let gap = spectral_norm(&(&adj - &y)) / spectral_norm(&y).max(f64::MIN_POSITIVE);
            let d = &mut self.diagnostics;
            d.max_inverse_residual = d.max_inverse_residual.max(res);
            d.max_adjugate_gap = d.max_adjugate_gap.max(gap);
            d.max_condition = d.max_condition.max(cond);
            d.nodes_checked += 1;
            if res > tol.inv {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: format!("‖X X⁻¹ − I‖ = {res:e} exceeds {:e}", tol.inv),
                });
            }
        }
        Ok(())
    }

    fn step_for(&self, t: f64) -> Option<&DenseStep> {
        if t >= self.anchor {
            let k = self.forward.partition_point(|s| s.t_end() < t);
            self.forward.get(k.min(self.forward.len().saturating_sub(1)))
        } else {
            let k = self.backward.partition_point(|s| s.t_end() > t);
            self.backward.get(k.min(self.backward.len().saturating_sub(1)))
        }
    }

    /// `(X(t), X(t)⁻¹)` without domain checks.
    fn pair(&self, t: f64) -> (CMat, CMat) {
        let n = self.n;
        match self.step_for(t) {
            Some(step) if t != self.anchor => {
                let mut buf = vec![0.0; 4 * n * n];
                step.interpolate(t, &mut buf);
                (unpack_mat(&buf[..2 * n * n], n, n), unpack_mat(&buf[2 * n * n..], n, n))
            }
            _ => (identity(n), identity(n)),
        }
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn diagnostics(&self) -> &FlowDiagnostics {
        &self.diagnostics
    }

    /// Times of all accepted step ends, sorted.
    pub fn step_nodes(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .forward
            .iter()
            .chain(&self.backward)
            .map(|s| s.t_end())
            .chain(std::iter::once(self.anchor))
            .collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        v
    }

    /// `X(t)⁻¹` from the companion integration.
    pub fn inverse(&self, t: f64) -> Result<CMat> {
        self.span.check(t)?;
        Ok(self.pair(t).1)
    }

    /// State transition `X(t) X(s)⁻¹` from `s` to `t`.
    pub fn transition(&self, t: f64, s: f64) -> Result<CMat> {
        Ok(self.eval(t)? * self.inverse(s)?)
    }
}

impl MatrixFunction for FundamentalSolution {
    fn shape(&self) -> (usize, usize) {
        (self.n, self.n)
    }

    fn domain(&self) -> Interval {
        self.span
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }

    fn eval(&self, t: f64) -> Result<CMat> {
        self.span.check(t)?;
        Ok(self.pair(t).0)
    }

    fn left_limit(&self, t: f64) -> Result<CMat> {
        self.eval(t)
    }

    fn right_limit(&self, t: f64) -> Result<CMat> {
        self.eval(t)
    }

    fn left_derivative(&self, t: f64) -> Result<CMat> {
        Ok(self.a.left_limit(t)? * self.eval(t)?)
    }

    fn right_derivative(&self, t: f64) -> Result<CMat> {
        Ok(self.a.right_limit(t)? * self.eval(t)?)
    }

    fn accuracy(&self) -> f64 {
        (100.0 * self.rtol).max(self.diagnostics.max_inverse_residual).max(f64::EPSILON)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real, max_abs};
    use crate::matfun::Segment;

    fn scalar_flow() -> PiecewiseMatrixFunction {
        PiecewiseMatrixFunction::new(
            vec![
                Segment::expressions(-1.0, 0.0, 1, 1, &["0"]).unwrap(),
                Segment::expressions(0.0, 5.0, 1, 1, &["-2*t/(1 + t^2)"]).unwrap(),
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn scalar_flow_matches_closed_form() {
        let a = scalar_flow();
        let fs = FundamentalSolution::compute(&a, 0.0, a.domain(), &Tolerances::default()).unwrap();
        for k in 0..=60 {
            let t = -1.0 + 6.0 * k as f64 / 60.0;
            let exact = if t <= 0.0 { 1.0 } else { 1.0 / (1.0 + t * t) };
            let x = fs.eval(t).unwrap()[(0, 0)];
            assert!((x.re - exact).abs() <= 1e-7 * exact, "t = {t}: {x} vs {exact}");
            assert!(x.im.abs() < 1e-14);
        }
        assert_eq!(fs.eval(0.0).unwrap(), identity(1));
    }

    #[test]
    fn zero_generator_gives_identity() {
        let a = PiecewiseMatrixFunction::constant(&CMat::zeros(3, 3), Interval::new(0.0, 2.0).unwrap());
        let fs = FundamentalSolution::compute(&a, 1.0, a.domain(), &Tolerances::default()).unwrap();
        for t in [0.0, 0.5, 1.0, 2.0] {
            assert!((fs.eval(t).unwrap() - identity(3)).norm() < 1e-15);
        }
    }

    #[test]
    fn rotation_generator() {
        let a = PiecewiseMatrixFunction::constant(
            &from_real(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            Interval::new(-3.0, 3.0).unwrap(),
        );
        let fs = FundamentalSolution::compute(&a, 0.0, a.domain(), &Tolerances::default()).unwrap();
        for t in [-3.0, -1.3, 0.7, 2.9, 3.0] {
            let x = fs.eval(t).unwrap();
            let exact = from_real(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
            assert!(max_abs(&(x - exact)) < 1e-8, "t = {t}");
        }
        assert!(fs.diagnostics().max_inverse_residual < 1e-8);
        assert!(fs.diagnostics().max_adjugate_gap < 1e-8);
    }

    #[test]
    fn cocycle_property() {
        let a = scalar_flow();
        let tol = Tolerances::default();
        let f0 = FundamentalSolution::compute(&a, 0.0, a.domain(), &tol).unwrap();
        let f1 = FundamentalSolution::compute(&a, 2.0, a.domain(), &tol).unwrap();
        for t in [-0.5, 1.0, 3.5] {
            let lhs = f0.eval(t).unwrap();
            let rhs = f1.eval(t).unwrap() * f0.eval(2.0).unwrap();
            assert!((lhs - rhs).norm() < 1e-8);
        }
    }
}
