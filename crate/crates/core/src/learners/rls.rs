//! Exponentially weighted recursive least squares.
//!
//! ```text
//! k      = P g / (μ + gᵀ P g)
//! w(k+1) = w(k) + k·e(k)          = (I − k gᵀ) w(k) + k·y(k)
//! P(k+1) = (P − k gᵀ P) / μ       (then symmetrised)
//! ```

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::statespace::{LmdStructure, StateSpaceStep};

use super::{check_finite, check_inputs, SampleStep, StepOutput};

#[derive(Clone, Debug, PartialEq)]
pub struct RlsState {
    /// Inverse correlation estimate `R⁻¹`.
    pub p: Matrix,
    /// Forgetting factor in `(0, 1]`.
    pub mu: f64,
    pub delta: f64,
}

impl RlsState {
    /// `P = δ·I`.
    pub fn new(dim: usize, mu: f64, delta: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::domain("rls: forgetting factor must be in (0, 1]"));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::domain("rls: delta must be > 0"));
        }
        Ok(RlsState {
            p: Matrix::scaled_identity(dim, delta),
            mu,
            delta,
        })
    }
}

pub fn rls_step(w: &Vector, g: &Vector, y: f64, s: &RlsState, k: u64) -> Result<(StepOutput, RlsState)> {
    check_inputs(w, g, y)?;
    let n = w.len();
    if s.p.rows() != n || s.p.cols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: s.p.rows(),
        });
    }
    let pg = s.p.mul_vec(g)?;
    let denom = s.mu + g.dot(&pg);
    let gain = pg.scale(1.0 / denom);
    let e = y - w.dot(g);
    let w_next = w.axpy(e, &gain);
    check_finite(&w_next, k, "weights")?;

    // gᵀP as a row; P is kept symmetric so this equals (P g)ᵀ up to rounding.
    let gt_p = s.p.tr_mul_vec(g)?;
    let p_next = s
        .p
        .sub(&Matrix::outer(&gain, &gt_p))?
        .scale(1.0 / s.mu)
        .symmetrized();
    if !p_next.is_finite() {
        return Err(Error::Divergence {
            step: k,
            reason: "rls: inverse correlation matrix became non-finite".into(),
        });
    }

    let a = Matrix::identity(n).sub(&Matrix::outer(&gain, g))?;
    let coupling = gain.dot(g);
    let ss = StateSpaceStep::new(
        a,
        Matrix::column(&gain),
        Vector::from(vec![y]),
        false,
        LmdStructure::RankOneUpdate { coupling },
    )
    .map_err(|_| Error::Divergence {
        step: k,
        reason: "non-finite local matrix of dynamics".into(),
    })?;

    let out = StepOutput {
        w_next,
        ss,
        sample: SampleStep {
            k,
            y,
            g: g.clone(),
            e,
            eta: gain.into_inner(),
        },
    };
    let next = RlsState {
        p: p_next,
        mu: s.mu,
        delta: s.delta,
    };
    Ok((out, next))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_features_only_forgets() {
        let s = RlsState::new(2, 0.5, 10.0).unwrap();
        let w = Vector::from(vec![0.1, 0.2]);
        let (out, next) = rls_step(&w, &Vector::zeros(2), 3.0, &s, 0).unwrap();
        assert_eq!(out.w_next, w);
        assert_eq!(next.p, Matrix::scaled_identity(2, 20.0));
    }

    #[test]
    fn scalar_recursion() {
        let s = RlsState::new(1, 1.0, 1.0).unwrap();
        let (out, next) = rls_step(&Vector::zeros(1), &Vector::from(vec![1.0]), 1.0, &s, 0).unwrap();
        assert_eq!(out.sample.eta, vec![0.5]);
        assert_eq!(out.w_next.as_slice(), &[0.5]);
        assert_eq!(next.p.as_slice(), &[0.5]);
    }

    #[test]
    fn reconstruction_and_symmetry() {
        let mut s = RlsState::new(3, 0.99, 1e6).unwrap();
        let mut w = Vector::zeros(3);
        for k in 0..50u64 {
            let t = k as f64;
            let g = Vector::from(vec![1.0, (0.3 * t).sin(), (0.7 * t).cos()]);
            let y = 0.5 - g[1] + 2.0 * g[2];
            let (out, next) = rls_step(&w, &g, y, &s, k).unwrap();
            let rec = out.ss.apply(&w).unwrap();
            let scale = out.w_next.norm().max(w.norm()).max(1e-300);
            assert!(rec.sub(&out.w_next).norm() / scale < 1e-10);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((next.p[(i, j)] - next.p[(j, i)]).abs() < 1e-9);
                }
            }
            w = out.w_next;
            s = next;
        }
        assert!((w[0] - 0.5).abs() < 1e-6 && (w[1] + 1.0).abs() < 1e-6 && (w[2] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn validation() {
        assert!(RlsState::new(2, 0.0, 1.0).is_err());
        assert!(RlsState::new(2, 1.1, 1.0).is_err());
        assert!(RlsState::new(2, 0.99, 0.0).is_err());
        let s = RlsState::new(2, 0.99, 1.0).unwrap();
        assert!(rls_step(&Vector::zeros(3), &Vector::zeros(3), 0.0, &s, 0).is_err());
    }
}
