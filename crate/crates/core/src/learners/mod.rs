//! Incremental gradient learners.
//!
//! Every rule returns both the directly computed next weights and the
//! `(A(k), B(k), u(k))` decomposition of the same step, so the two routes can
//! be checked against each other and the decomposition handed to the monitor.

mod adam;
mod gradient;
mod rls;

pub use adam::{adam_extended_lmd, adam_step, adam_step_with_eta, AdamEta, AdamMode, AdamState};
pub use gradient::{batch_gd_step, gd_step, ngd_step, BatchRate, GdState, NgdState};
pub use rls::{rls_step, RlsState};

use crate::error::{Error, Result};
use crate::grammar::SpecParams;
use crate::linalg::Vector;
use crate::statespace::StateSpaceStep;

/// What happened at one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleStep {
    pub k: u64,
    pub y: f64,
    pub g: Vector,
    /// `y − wᵀg` with the weights before the update.
    pub e: f64,
    /// Effective step: scalar `η`, per-weight ADAM steps, or the RLS gain.
    pub eta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub w_next: Vector,
    pub ss: StateSpaceStep,
    pub sample: SampleStep,
}

pub(crate) fn check_inputs(w: &Vector, g: &Vector, y: f64) -> Result<()> {
    if w.len() != g.len() {
        return Err(Error::Dimension {
            expected: w.len(),
            got: g.len(),
        });
    }
    if !w.is_finite() || !g.is_finite() || !y.is_finite() {
        return Err(Error::domain("learner: non-finite input"));
    }
    Ok(())
}

pub(crate) fn check_finite(v: &Vector, k: u64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence {
            step: k,
            reason: format!("{what} became non-finite"),
        })
    }
}

/// Parsed learner spec, before it is bound to a weight dimension.
#[derive(Clone, Debug, PartialEq)]
pub enum LearnerSpec {
    Gd { mu: f64 },
    Ngd { mu: f64, eps: f64 },
    Rls { mu: f64, delta: f64 },
    Adam { mu: f64, beta1: f64, beta2: f64, eps: f64, mode: AdamMode },
}

impl LearnerSpec {
    /// `gd:mu=<f>` · `ngd:mu=<f>,eps=<f>` · `rls:mu=<f>,delta=<f>` ·
    /// `adam:mu=<f>,beta1=<f>,beta2=<f>,eps=<f>[,mode=<scalar|elementwise>]`
    pub fn parse(spec: &str) -> Result<Self> {
        let mut p = SpecParams::parse(spec)?;
        let parsed = match p.kind {
            "gd" => LearnerSpec::Gd { mu: p.required("mu")? },
            "ngd" => LearnerSpec::Ngd {
                mu: p.required("mu")?,
                eps: p.required("eps")?,
            },
            "rls" => LearnerSpec::Rls {
                mu: p.required("mu")?,
                delta: p.required("delta")?,
            },
            "adam" => {
                let mu = p.required("mu")?;
                let beta1 = p.required("beta1")?;
                let beta2 = p.required("beta2")?;
                let eps = p.required("eps")?;
                let mode = match p.raw("mode") {
                    None | Some("scalar") => AdamMode::Scalar,
                    Some("elementwise") => AdamMode::Elementwise,
                    Some(other) => return Err(p.error(format!("unknown adam mode `{other}`"))),
                };
                LearnerSpec::Adam {
                    mu,
                    beta1,
                    beta2,
                    eps,
                    mode,
                }
            }
            other => return Err(p.error(format!("unknown learner `{other}`"))),
        };
        p.finish()?;
        // validate parameter ranges up front
        parsed.build(&Vector::zeros(1))?;
        Ok(parsed)
    }

    pub fn build(&self, w0: &Vector) -> Result<Learner> {
        Ok(match *self {
            LearnerSpec::Gd { mu } => Learner::Gd(GdState::new(mu)?),
            LearnerSpec::Ngd { mu, eps } => Learner::Ngd(NgdState::new(mu, eps)?),
            LearnerSpec::Rls { mu, delta } => Learner::Rls(RlsState::new(w0.len(), mu, delta)?),
            LearnerSpec::Adam {
                mu,
                beta1,
                beta2,
                eps,
                mode,
            } => Learner::Adam(AdamState::new(w0, mu, beta1, beta2, eps, mode)?),
        })
    }
}

/// A learner together with its mutable state, for sample-by-sample loops.
#[derive(Clone, Debug, PartialEq)]
pub enum Learner {
    Gd(GdState),
    Ngd(NgdState),
    Rls(RlsState),
    Adam(AdamState),
}

impl Learner {
    pub fn step(&mut self, w: &Vector, g: &Vector, y: f64, k: u64) -> Result<StepOutput> {
        match self {
            Learner::Gd(s) => gd_step(w, g, y, s, k),
            Learner::Ngd(s) => ngd_step(w, g, y, s, k),
            Learner::Rls(s) => {
                let (out, next) = rls_step(w, g, y, s, k)?;
                *s = next;
                Ok(out)
            }
            Learner::Adam(s) => {
                let (out, next) = adam_step(w, g, y, s, k)?;
                *s = next;
                Ok(out)
            }
        }
    }

    /// The vector the step's state-space form acts on: `w` itself, or the
    /// extended ADAM state.
    pub fn state_vector(&self, w: &Vector) -> Vector {
        match self {
            Learner::Adam(s) => s.extended_state(w),
            _ => w.clone(),
        }
    }
}
