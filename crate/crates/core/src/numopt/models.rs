//! Built-in parametric curve models with analytic Jacobians.

/// A scalar curve y = f(x; theta) that the weighted least-squares driver can fit.
///
/// Implementors with analytic gradients should override `jacobian_row`;
/// the default falls back to central finite differences.
pub trait CurveModel {
    /// Number of parameters.
    fn arity(&self) -> usize;

    fn value(&self, x: f64, params: &[f64]) -> f64;

    /// Writes df/d(theta_j) at `x` into `out[j]`.
    fn jacobian_row(&self, x: f64, params: &[f64], out: &mut [f64]) {
        let mut scratch = params.to_vec();
        for j in 0..self.arity() {
            let h = 1e-6 * params[j].abs().max(1e-8);
            scratch[j] = params[j] + h;
            let up = self.value(x, &scratch);
            scratch[j] = params[j] - h;
            let down = self.value(x, &scratch);
            scratch[j] = params[j];
            out[j] = (up - down) / (2.0 * h);
        }
    }
}

/// Straight line: f = slope * x + intercept. Parameters `[slope, intercept]`.
pub struct Line;

impl CurveModel for Line {
    fn arity(&self) -> usize {
        2
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * x + p[1]
    }

    fn jacobian_row(&self, x: f64, _p: &[f64], out: &mut [f64]) {
        out[0] = x;
        out[1] = 1.0;
    }
}

/// Decaying exponential: f = a * exp(-b * x). Parameters `[a, b]`.
pub struct DecayingExp;

impl CurveModel for DecayingExp {
    fn arity(&self) -> usize {
        2
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * (-p[1] * x).exp()
    }

    fn jacobian_row(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let e = (-p[1] * x).exp();
        out[0] = e;
        out[1] = -p[0] * x * e;
    }
}

/// Stretched exponential with background:
/// f = i0 * exp(-(x / tau0)^beta) + bg. Parameters `[i0, tau0, beta, bg]`.
///
/// Only x >= 0 is meaningful; the x = 0 limit of the beta derivative is 0.
pub struct StretchedExp;

impl CurveModel for StretchedExp {
    fn arity(&self) -> usize {
        4
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        let s = (x / p[1]).powf(p[2]);
        p[0] * (-s).exp() + p[3]
    }

    fn jacobian_row(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let (i0, tau0, beta) = (p[0], p[1], p[2]);
        let ratio = x / tau0;
        let s = ratio.powf(beta);
        let e = (-s).exp();
        out[0] = e;
        out[1] = i0 * e * s * beta / tau0;
        // s * ln(ratio) -> 0 as x -> 0+
        out[2] = if x > 0.0 {
            -i0 * e * s * ratio.ln()
        } else {
            0.0
        };
        out[3] = 1.0;
    }
}
