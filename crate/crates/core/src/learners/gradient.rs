//! Plain and normalised gradient descent, single-sample and batch.
//!
//! Both produce the same decomposition
//! `w(k+1) = (I − η g gᵀ) w(k) + η·I · (y g)`; only `η` differs.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::statespace::{LmdStructure, StateSpaceStep};

use super::{check_finite, check_inputs, SampleStep, StepOutput};

/// Fixed learning rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GdState {
    pub mu: f64,
}

impl GdState {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::domain("gd: mu must be > 0"));
        }
        Ok(GdState { mu })
    }
}

/// `η(k) = μ / (‖g‖² + ε)`. The step contracts the active direction when `μ < 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NgdState {
    pub mu: f64,
    pub eps: f64,
}

impl NgdState {
    pub fn new(mu: f64, eps: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::domain("ngd: mu must be > 0"));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::domain("ngd: eps must be > 0"));
        }
        Ok(NgdState { mu, eps })
    }

    pub fn eta(&self, g_norm_sq: f64) -> f64 {
        self.mu / (g_norm_sq + self.eps)
    }
}

/// Rate rule for [`batch_gd_step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BatchRate {
    Fixed(GdState),
    Normalized(NgdState),
}

pub fn gd_step(w: &Vector, g: &Vector, y: f64, s: &GdState, k: u64) -> Result<StepOutput> {
    rank_one_step(w, g, y, s.mu, k)
}

/// Normalised GD. `eps` is taken as given so the `ε = 0` scalar case can be
/// evaluated; [`NgdState::new`] requires `ε > 0`.
pub fn ngd_step(w: &Vector, g: &Vector, y: f64, s: &NgdState, k: u64) -> Result<StepOutput> {
    let eta = s.eta(g.norm_sq());
    if !eta.is_finite() {
        return Err(Error::Divergence {
            step: k,
            reason: "ngd: non-finite learning rate".into(),
        });
    }
    rank_one_step(w, g, y, eta, k)
}

fn rank_one_step(w: &Vector, g: &Vector, y: f64, eta: f64, k: u64) -> Result<StepOutput> {
    check_inputs(w, g, y)?;
    let n = w.len();
    let e = y - w.dot(g);
    let w_next = w.axpy(eta * e, g);
    check_finite(&w_next, k, "weights")?;

    let a = Matrix::identity(n).sub(&Matrix::outer(g, g).scale(eta))?;
    let b = Matrix::scaled_identity(n, eta);
    let u = g.scale(y);
    let ss = StateSpaceStep::new(
        a,
        b,
        u,
        false,
        LmdStructure::RankOneUpdate {
            coupling: eta * g.norm_sq(),
        },
    )
    .map_err(|_| Error::Divergence {
        step: k,
        reason: "non-finite local matrix of dynamics".into(),
    })?;
    Ok(StepOutput {
        w_next,
        ss,
        sample: SampleStep {
            k,
            y,
            g: g.clone(),
            e,
            eta: vec![eta],
        },
    })
}

/// Summed-gradient step over a batch of feature rows `feats` (one row per sample).
pub fn batch_gd_step(w: &Vector, feats: &Matrix, ys: &Vector, rate: &BatchRate, k: u64) -> Result<(Vector, StateSpaceStep)> {
    let n = w.len();
    if feats.cols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: feats.cols(),
        });
    }
    if feats.rows() != ys.len() {
        return Err(Error::Dimension {
            expected: feats.rows(),
            got: ys.len(),
        });
    }
    if !w.is_finite() || !feats.is_finite() || !ys.is_finite() {
        return Err(Error::domain("batch_gd_step: non-finite input"));
    }
    let eta = match rate {
        BatchRate::Fixed(s) => s.mu,
        BatchRate::Normalized(s) => {
            let fro_sq: f64 = feats.as_slice().iter().map(|v| v * v).sum();
            s.eta(fro_sq)
        }
    };

    let residuals = ys.sub(&feats.mul_vec(w)?);
    let grad = feats.tr_mul_vec(&residuals)?;
    let w_next = w.axpy(eta, &grad);
    check_finite(&w_next, k, "weights")?;

    let gram = feats.transpose().matmul(feats)?;
    let a = Matrix::identity(n).sub(&gram.scale(eta))?;
    let u = feats.tr_mul_vec(ys)?;
    let structure = if feats.rows() == 1 {
        LmdStructure::RankOneUpdate {
            coupling: eta * feats.row(0).iter().map(|v| v * v).sum::<f64>(),
        }
    } else {
        LmdStructure::General
    };
    let ss = StateSpaceStep::new(a, Matrix::scaled_identity(n, eta), u, false, structure).map_err(|_| {
        Error::Divergence {
            step: k,
            reason: "non-finite local matrix of dynamics".into(),
        }
    })?;
    Ok((w_next, ss))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from(xs.to_vec())
    }

    #[test]
    fn zero_fixed_point() {
        let s = GdState::new(0.3).unwrap();
        let out = gd_step(&Vector::zeros(3), &v(&[1.0, -2.0, 0.5]), 0.0, &s, 0).unwrap();
        assert_eq!(out.w_next, Vector::zeros(3));
    }

    #[test]
    fn scalar_gd() {
        let s = GdState::new(1.0).unwrap();
        let out = gd_step(&v(&[0.0]), &v(&[1.0]), 1.0, &s, 0).unwrap();
        assert_eq!(out.w_next.as_slice(), &[1.0]);
        assert_eq!(out.ss.a.as_slice(), &[0.0]);
        assert_eq!(out.ss.u.as_slice(), &[1.0]);
    }

    #[test]
    fn two_dim_gd() {
        let s = GdState::new(0.5).unwrap();
        let w = v(&[1.0, 0.0]);
        let out = gd_step(&w, &v(&[1.0, 1.0]), 0.0, &s, 0).unwrap();
        assert_eq!(out.sample.e, -1.0);
        assert_eq!(out.w_next.as_slice(), &[0.5, -0.5]);
        assert_eq!(out.ss.apply(&w).unwrap().as_slice(), &[0.5, -0.5]);
    }

    #[test]
    fn ngd_zero_features() {
        let s = NgdState::new(1.0, 1e-3).unwrap();
        let w = v(&[0.3, -0.2]);
        let out = ngd_step(&w, &Vector::zeros(2), 5.0, &s, 0).unwrap();
        assert_eq!(out.sample.eta, vec![1000.0]);
        assert_eq!(out.w_next, w);
    }

    #[test]
    fn ngd_scalar_eps_zero() {
        let s = NgdState { mu: 1.0, eps: 0.0 };
        let out = ngd_step(&v(&[0.0]), &v(&[2.0]), 1.0, &s, 0).unwrap();
        assert_eq!(out.sample.eta, vec![0.25]);
        assert_eq!(out.ss.a.as_slice(), &[0.0]);
    }

    #[test]
    fn state_validation() {
        assert!(GdState::new(0.0).is_err());
        assert!(NgdState::new(1.0, 0.0).is_err());
        assert!(NgdState::new(-1.0, 1e-6).is_err());
    }

    #[test]
    fn divergence_is_typed() {
        let s = GdState::new(1e300).unwrap();
        let r = gd_step(&v(&[1e300]), &v(&[1e10]), 0.0, &s, 42);
        assert!(matches!(r, Err(Error::Divergence { step: 42, .. })));
    }

    #[test]
    fn batch_of_one_matches_single() {
        let w = v(&[0.2, -0.1, 0.4]);
        let g = v(&[1.0, 0.5, -2.0]);
        let feats = Matrix::from_rows(&[g.as_slice().to_vec()]).unwrap();
        let ys = v(&[0.7]);
        let gd = GdState::new(0.1).unwrap();
        let single = gd_step(&w, &g, 0.7, &gd, 0).unwrap();
        let (wb, ssb) = batch_gd_step(&w, &feats, &ys, &BatchRate::Fixed(gd), 0).unwrap();
        assert_eq!(wb, single.w_next);
        assert_eq!(ssb.a, single.ss.a);

        let ngd = NgdState::new(0.9, 1e-6).unwrap();
        let single = ngd_step(&w, &g, 0.7, &ngd, 0).unwrap();
        let (wb, _) = batch_gd_step(&w, &feats, &ys, &BatchRate::Normalized(ngd), 0).unwrap();
        for (a, b) in wb.iter().zip(single.w_next.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn duplicated_batch_half_rate() {
        let w = v(&[0.2, -0.1]);
        let g = vec![1.0, 0.5];
        let feats = Matrix::from_rows(&[g.clone(), g.clone()]).unwrap();
        let (wb, _) = batch_gd_step(&w, &feats, &v(&[0.3, 0.3]), &BatchRate::Fixed(GdState { mu: 0.05 }), 0).unwrap();
        let single = gd_step(&w, &Vector::from(g), 0.3, &GdState { mu: 0.1 }, 0).unwrap();
        for (a, b) in wb.iter().zip(single.w_next.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn batch_shape_errors() {
        let feats = Matrix::identity(2);
        let r = batch_gd_step(&Vector::zeros(3), &feats, &Vector::zeros(2), &BatchRate::Fixed(GdState { mu: 0.1 }), 0);
        assert!(r.is_err());
        let r = batch_gd_step(&Vector::zeros(2), &feats, &Vector::zeros(3), &BatchRate::Fixed(GdState { mu: 0.1 }), 0);
        assert!(r.is_err());
    }
}
