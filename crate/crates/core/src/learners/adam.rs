//! ADAM as a momentum system with a delayed first moment:
//!
//! ```text
//! w(k+1) = w(k) − η(k) m(k)
//! m(k+1) = β₁ m(k) + (β₁ − 1) g e(k)
//! ```
//!
//! Substituting `w(k) = w(k−1) − η(k−1) m(k−1)` into the error term gives a
//! linear system over `ξ(k) = [w(k−1); w(k); m(k−1); m(k)]`:
//!
//! ```text
//!        ┌ 0           I   0                 0     ┐        ┌ 0        ┐
//!        │ 0           I   0                −η(k)  │        │ 0        │
//! A(k) = │ 0           0   0                 I     │   B =  │ 0        │   u = g·y
//!        └ −(β₁−1)ggᵀ  0   (β₁−1)ggᵀη(k−1)   β₁I   ┘        └ (β₁−1)I  ┘
//! ```

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::statespace::{LmdStructure, StateSpaceStep};

use super::{check_finite, check_inputs, SampleStep, StepOutput};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdamMode {
    /// One scalar step `η(k) = μ / ((√mean(v) + ε)(1 − β₁ᵏ))` shared by all weights.
    Scalar,
    /// Per-weight step with the usual bias corrections,
    /// `ηᵢ = μ / ((√(vᵢ/(1−β₂ᵃ)) + ε)(1 − β₁ᵃ))` with `a` gradients accumulated.
    Elementwise,
}

/// Step size applied to `m(k)`.
#[derive(Clone, Debug, PartialEq)]
pub enum AdamEta {
    Scalar(f64),
    Diagonal(Vec<f64>),
}

impl AdamEta {
    pub fn zero(n: usize, mode: AdamMode) -> Self {
        match mode {
            AdamMode::Scalar => AdamEta::Scalar(0.0),
            AdamMode::Elementwise => AdamEta::Diagonal(vec![0.0; n]),
        }
    }

    fn at(&self, i: usize) -> f64 {
        match self {
            AdamEta::Scalar(e) => *e,
            AdamEta::Diagonal(d) => d[i],
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            AdamEta::Scalar(e) => vec![*e],
            AdamEta::Diagonal(d) => d.clone(),
        }
    }

    fn as_matrix(&self, n: usize) -> Matrix {
        match self {
            AdamEta::Scalar(e) => Matrix::scaled_identity(n, *e),
            AdamEta::Diagonal(d) => Matrix::diagonal(d),
        }
    }

    /// `η ⊙ v`
    fn apply(&self, v: &Vector) -> Vector {
        Vector::from((0..v.len()).map(|i| self.at(i) * v[i]).collect::<Vec<_>>())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    /// `m(k)`, the moment applied at the current step.
    pub m: Vector,
    /// Raw second-moment accumulator `v(k−1)`.
    pub v: Vector,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub mu: f64,
    pub mode: AdamMode,
    /// Number of updates applied so far.
    pub steps: u64,
    pub prev_eta: AdamEta,
    pub prev_m: Vector,
    pub prev_w: Vector,
}

impl AdamState {
    /// Fresh state for weights `w0`: zero moments, `w(k−1) = w(k₀)`.
    pub fn new(w0: &Vector, mu: f64, beta1: f64, beta2: f64, eps: f64, mode: AdamMode) -> Result<Self> {
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::domain("adam: beta1 and beta2 must lie in [0, 1)"));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::domain("adam: eps must be > 0"));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::domain("adam: mu must be > 0"));
        }
        if !w0.is_finite() {
            return Err(Error::domain("adam: non-finite initial weights"));
        }
        let n = w0.len();
        Ok(AdamState {
            m: Vector::zeros(n),
            v: Vector::zeros(n),
            beta1,
            beta2,
            eps,
            mu,
            mode,
            steps: 0,
            prev_eta: AdamEta::zero(n, mode),
            prev_m: Vector::zeros(n),
            prev_w: w0.clone(),
        })
    }

    /// Extended state `ξ(k) = [w(k−1); w(k); m(k−1); m(k)]`.
    pub fn extended_state(&self, w: &Vector) -> Vector {
        Vector::concat(&[&self.prev_w, w, &self.prev_m, &self.m])
    }

    /// `η(k)` for the next update. With no gradient accumulated yet `m(k) = 0`,
    /// so the step is zero whatever `η` is; zero keeps `A(k)` bounded.
    pub fn current_eta(&self) -> AdamEta {
        let n = self.m.len();
        let accumulated = self.steps;
        if accumulated == 0 {
            return AdamEta::zero(n, self.mode);
        }
        match self.mode {
            AdamMode::Scalar => {
                let t = (self.steps + 1) as i32;
                let mean_v = self.v.iter().sum::<f64>() / n as f64;
                let corr = 1.0 - self.beta1.powi(t);
                AdamEta::Scalar(self.mu / ((mean_v.sqrt() + self.eps) * corr))
            }
            AdamMode::Elementwise => {
                let a = accumulated.min(i32::MAX as u64) as i32;
                let c1 = 1.0 - self.beta1.powi(a);
                let c2 = 1.0 - self.beta2.powi(a);
                AdamEta::Diagonal(
                    self.v
                        .iter()
                        .map(|vi| self.mu / (((vi / c2).sqrt() + self.eps) * c1))
                        .collect(),
                )
            }
        }
    }
}

/// The extended local matrix of dynamics for given `η(k)` and `η(k−1)`.
pub fn adam_extended_lmd(g: &Vector, beta1: f64, eta: &AdamEta, prev_eta: &AdamEta) -> Result<Matrix> {
    let n = g.len();
    let ggt = Matrix::outer(g, g);
    let c = beta1 - 1.0;
    let mut a = Matrix::zeros(4 * n, 4 * n);
    let eye = Matrix::identity(n);
    a.set_block(0, n, &eye);
    a.set_block(n, n, &eye);
    a.set_block(n, 3 * n, &eta.as_matrix(n).scale(-1.0));
    a.set_block(2 * n, 3 * n, &eye);
    a.set_block(3 * n, 0, &ggt.scale(-c));
    a.set_block(3 * n, 2 * n, &ggt.matmul(&prev_eta.as_matrix(n))?.scale(c));
    a.set_block(3 * n, 3 * n, &Matrix::scaled_identity(n, beta1));
    Ok(a)
}

pub fn adam_step(w: &Vector, g: &Vector, y: f64, s: &AdamState, k: u64) -> Result<(StepOutput, AdamState)> {
    let eta = s.current_eta();
    adam_step_with_eta(w, g, y, s, eta, k)
}

/// One update with an explicitly supplied `η(k)`; the second moment is still
/// accumulated. Used for fixed step schedules.
pub fn adam_step_with_eta(
    w: &Vector,
    g: &Vector,
    y: f64,
    s: &AdamState,
    eta: AdamEta,
    k: u64,
) -> Result<(StepOutput, AdamState)> {
    check_inputs(w, g, y)?;
    let n = w.len();
    if s.m.len() != n {
        return Err(Error::Dimension {
            expected: s.m.len(),
            got: n,
        });
    }
    if let AdamEta::Diagonal(d) = &eta {
        if d.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: d.len(),
            });
        }
    }
    let e = y - w.dot(g);
    let w_next = w.sub(&eta.apply(&s.m));
    let m_next = s.m.scale(s.beta1).axpy((s.beta1 - 1.0) * e, g);
    let v_next = Vector::from(
        s.v.iter()
            .zip(g.iter())
            .map(|(vi, gi)| {
                let grad = -gi * e;
                s.beta2 * vi + (1.0 - s.beta2) * grad * grad
            })
            .collect::<Vec<_>>(),
    );
    check_finite(&w_next, k, "weights")?;
    check_finite(&m_next, k, "first moment")?;
    check_finite(&v_next, k, "second moment")?;

    let a = adam_extended_lmd(g, s.beta1, &eta, &s.prev_eta)?;
    let mut b = Matrix::zeros(4 * n, n);
    b.set_block(3 * n, 0, &Matrix::scaled_identity(n, s.beta1 - 1.0));
    let ss = StateSpaceStep::new(a, b, g.scale(y), true, LmdStructure::General).map_err(|_| Error::Divergence {
        step: k,
        reason: "non-finite extended local matrix of dynamics".into(),
    })?;

    let next = AdamState {
        m: m_next,
        v: v_next,
        steps: s.steps + 1,
        prev_eta: eta.clone(),
        prev_m: s.m.clone(),
        prev_w: w.clone(),
        ..s.clone()
    };
    let out = StepOutput {
        w_next,
        ss,
        sample: SampleStep {
            k,
            y,
            g: g.clone(),
            e,
            eta: eta.values(),
        },
    };
    Ok((out, next))
}
