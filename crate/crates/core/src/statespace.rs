//! Time-variant state-space view of a single weight update:
//! `ξ(k+1) = A(k)·ξ(k) + B(k)·u(k)`.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Known spectral structure of the local matrix of dynamics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LmdStructure {
    /// `A = I − a bᵀ` with `bᵀa = coupling`. Covers GD, NGD (`a = ηg`, `b = g`)
    /// and RLS (`a = k`, `b = g`).
    RankOneUpdate { coupling: f64 },
    /// No closed form; the monitor estimates the spectrum numerically.
    General,
}

/// One step's `(A(k), B(k), u(k))` decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceStep {
    /// Local matrix of dynamics.
    pub a: Matrix,
    /// Input gain.
    pub b: Matrix,
    /// External input term.
    pub u: Vector,
    /// Set for the ADAM extended state `[w(k−1); w(k); m(k−1); m(k)]`.
    pub extended: bool,
    pub structure: LmdStructure,
}

impl StateSpaceStep {
    pub fn new(a: Matrix, b: Matrix, u: Vector, extended: bool, structure: LmdStructure) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension {
                expected: a.rows(),
                got: a.cols(),
            });
        }
        if b.rows() != a.rows() {
            return Err(Error::Dimension {
                expected: a.rows(),
                got: b.rows(),
            });
        }
        if b.cols() != u.len() {
            return Err(Error::Dimension {
                expected: b.cols(),
                got: u.len(),
            });
        }
        if !a.is_finite() || !b.is_finite() || !u.is_finite() {
            return Err(Error::domain("state-space step has non-finite entries"));
        }
        Ok(StateSpaceStep {
            a,
            b,
            u,
            extended,
            structure,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    /// `A·ξ + B·u`
    pub fn apply(&self, state: &Vector) -> Result<Vector> {
        Ok(self.a.mul_vec(state)?.add(&self.b.mul_vec(&self.u)?))
    }
}
