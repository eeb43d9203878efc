//! Real-time BIBS / ISS stability monitoring of a weight-update stream.
//!
//! The monitor consumes one [`StateSpaceStep`] per sample and tracks:
//!
//! * per-step indicators of the local matrix of dynamics `A(k)`: spectral
//!   radius, Frobenius norm, spectral norm;
//! * the norm of the product of the last `p` matrices (sliding window,
//!   newest on the left);
//! * running suprema `M_A = sup‖A(k)‖`, `M_B = sup‖B(k)‖`, `L_u = sup‖u(k)‖`;
//! * a certified BIBS bound on `‖ξ(k)‖` whenever a contraction factor below
//!   one is established;
//! * the ISS split `‖ξ(k+1)‖ ≤ β + γ` accumulated from per-step norms.
//!
//! Certified bound, two routes:
//!
//! * per-step: `M_A < 1` gives `‖ξ₀‖ + M_B L_u / (1 − M_A)`;
//! * windowed (evaluation stride 1 only): if every `p`-window product has
//!   norm `≤ q_w < 1`, split any product `A(k)…A(i+1)` into full windows from
//!   the newest end and an older remainder shorter than `p`. With `R` the
//!   supremum of the 2-norms of such remainders (bounded by their Frobenius
//!   norms, and by 1 for the empty one) this gives
//!   `R ‖ξ₀‖ + M_B L_u R p / (1 − q_w)`.
//!
//! When both routes apply the smaller bound is reported.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, spectral_norm_est, spectral_radius_est, spectral_radius_rank1_lmd, window_product, Matrix};
use crate::statespace::{LmdStructure, StateSpaceStep};

const SPECTRAL_TOL: f64 = 1e-12;
const SPECTRAL_MAX_ITER: usize = 1000;
/// Spectral norms are always logged up to this state dimension.
const SPEC_LOG_MAX_DIM: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    Frobenius,
    Spectral,
}

impl NormKind {
    pub fn of(self, m: &Matrix) -> Result<f64> {
        match self {
            NormKind::Frobenius => frobenius_norm(m),
            NormKind::Spectral => Ok(spectral_norm_est(m, SPECTRAL_TOL, SPECTRAL_MAX_ITER)?.value),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorConfig {
    pub window_p: usize,
    pub eval_stride: usize,
    pub norm_kind: NormKind,
    pub alarm_threshold: f64,
    pub history_cap: usize,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            window_p: 50,
            eval_stride: 1,
            norm_kind: NormKind::Frobenius,
            alarm_threshold: 1.0 + 0.05,
            history_cap: 100_000,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_p == 0 {
            return Err(Error::Usage("window_p must be >= 1".into()));
        }
        if self.eval_stride == 0 {
            return Err(Error::Usage("eval_stride must be >= 1".into()));
        }
        if !self.alarm_threshold.is_finite() || self.alarm_threshold < 1.0 {
            return Err(Error::Usage("alarm_threshold must be a finite value >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlarmReason {
    PerStepNorm,
    WindowProduct,
    Divergence,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub k: u64,
    /// `ρ(A(k))`: closed form for rank-one updates, Gelfand estimate otherwise.
    pub rho: f64,
    pub lmd_frob: f64,
    pub lmd_spec: Option<f64>,
    /// `‖A(k)‖` in the configured norm.
    pub lmd_norm: f64,
    pub window_norm: Option<f64>,
    pub running_ma: f64,
    pub running_mb: f64,
    pub running_lu: f64,
    pub bibs_bound: Option<f64>,
    pub alarm: bool,
    pub alarm_reason: Option<AlarmReason>,
    pub state_norm: f64,
}

/// `‖ξ(k+1)‖ ≤ beta_term + gamma_term`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IssBound {
    pub beta_term: f64,
    pub gamma_term: f64,
}

impl IssBound {
    pub fn total(&self) -> f64 {
        self.beta_term + self.gamma_term
    }
}

/// Norm of the window product.
pub fn window_condition(cfg: &MonitorConfig, window: &[Matrix]) -> Result<f64> {
    cfg.norm_kind.of(&window_product(window)?)
}

/// `w0 + M_B L_u / (1 − M_A)` if `M_A < 1`.
pub fn bibs_bound(w0_norm: f64, ma: f64, mb: f64, lu: f64) -> Option<f64> {
    if ma < 1.0 {
        let b = w0_norm + mb * lu / (1.0 - ma);
        b.is_finite().then_some(b)
    } else {
        None
    }
}

/// ISS split from per-step norm upper bounds:
/// `β = (∏ aⱼ)·w0`, `γ = u_sup · Σᵢ (∏_{j>i} aⱼ)·bᵢ`.
pub fn iss_bounds(w0_norm: f64, a_norms: &[f64], b_norms: &[f64], u_sup: f64) -> Result<IssBound> {
    if a_norms.is_empty() || a_norms.len() != b_norms.len() {
        return Err(Error::domain("iss_bounds: norm lists must be non-empty and of equal length"));
    }
    let beta_term = a_norms.iter().product::<f64>() * w0_norm;
    let mut gamma_sum = 0.0;
    for i in 0..a_norms.len() {
        let tail: f64 = a_norms[i + 1..].iter().product();
        gamma_sum += tail * b_norms[i];
    }
    Ok(IssBound {
        beta_term,
        gamma_term: u_sup * gamma_sum,
    })
}

/// Sequential stability monitor.
#[derive(Clone, Debug)]
pub struct Monitor {
    cfg: MonitorConfig,
    w0_norm: Option<f64>,
    next_k: u64,
    window: VecDeque<Matrix>,
    steps_since_full: usize,
    running_ma: f64,
    running_mb: f64,
    running_lu: f64,
    /// Largest window-product norm evaluated so far.
    window_sup: Option<f64>,
    /// Largest 2-norm bound of a product shorter than `p` (at least 1).
    remainder_sup: f64,
    rho_streak: usize,
    iss_a_product: f64,
    iss_gamma_sum: f64,
    history: VecDeque<StabilityReport>,
}

impl Monitor {
    pub fn new(cfg: MonitorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Monitor {
            window: VecDeque::with_capacity(cfg.window_p),
            cfg,
            w0_norm: None,
            next_k: 0,
            steps_since_full: 0,
            running_ma: 0.0,
            running_mb: 0.0,
            running_lu: 0.0,
            window_sup: None,
            remainder_sup: 1.0,
            rho_streak: 0,
            iss_a_product: 1.0,
            iss_gamma_sum: 0.0,
            history: VecDeque::new(),
        })
    }

    /// Sets `‖ξ(k₀)‖` and resets all running quantities.
    pub fn init(&mut self, w0_norm: f64) -> Result<()> {
        if !(w0_norm >= 0.0 && w0_norm.is_finite()) {
            return Err(Error::domain("initial state norm must be finite and >= 0"));
        }
        let cfg = self.cfg.clone();
        *self = Monitor::new(cfg)?;
        self.w0_norm = Some(w0_norm);
        Ok(())
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.cfg
    }

    pub fn history(&self) -> &VecDeque<StabilityReport> {
        &self.history
    }

    pub fn last(&self) -> Option<&StabilityReport> {
        self.history.back()
    }

    /// ISS bound on the state after the most recently observed step.
    pub fn iss_bound(&self) -> Option<IssBound> {
        let w0 = self.w0_norm?;
        (self.next_k > 0).then_some(IssBound {
            beta_term: self.iss_a_product * w0,
            gamma_term: self.running_lu * self.iss_gamma_sum,
        })
    }

    pub fn observe(&mut self, ss: &StateSpaceStep, state_norm: f64) -> Result<StabilityReport> {
        let w0 = self
            .w0_norm
            .ok_or_else(|| Error::Usage("monitor observed a step before init".into()))?;
        let a = &ss.a;
        let n = a.rows();
        if let Some(prev) = self.window.back() {
            if prev.rows() != n {
                return Err(Error::Dimension {
                    expected: prev.rows(),
                    got: n,
                });
            }
        }

        let lmd_frob = frobenius_norm(a)?;
        let lmd_spec = if n <= SPEC_LOG_MAX_DIM || self.cfg.norm_kind == NormKind::Spectral {
            Some(spectral_norm_est(a, SPECTRAL_TOL, SPECTRAL_MAX_ITER)?.value)
        } else {
            None
        };
        let lmd_norm = match self.cfg.norm_kind {
            NormKind::Frobenius => lmd_frob,
            NormKind::Spectral => lmd_spec.expect("spectral norm computed for spectral kind"),
        };
        let rho = match ss.structure {
            LmdStructure::RankOneUpdate { coupling } => spectral_radius_rank1_lmd(coupling, n),
            LmdStructure::General => spectral_radius_est(a)?,
        };
        let b_norm = self.cfg.norm_kind.of(&ss.b)?;
        let u_norm = ss.u.norm();

        self.running_ma = self.running_ma.max(lmd_norm);
        self.running_mb = self.running_mb.max(b_norm);
        self.running_lu = self.running_lu.max(u_norm);
        self.iss_a_product *= lmd_norm;
        self.iss_gamma_sum = lmd_norm * self.iss_gamma_sum + b_norm;

        self.window.push_back(a.clone());
        if self.window.len() > self.cfg.window_p {
            self.window.pop_front();
        }
        let full = self.window.len() == self.cfg.window_p;
        let evaluate = full && self.steps_since_full.is_multiple_of(self.cfg.eval_stride);
        if full {
            self.steps_since_full += 1;
        }

        let window_norm = if self.cfg.eval_stride == 1 {
            // every window is evaluated, so track the remainders too
            let mut product = self.window.back().expect("just pushed").clone();
            for (len, older) in (1..).zip(self.window.iter().rev().skip(1)) {
                if len < self.cfg.window_p {
                    self.remainder_sup = self.remainder_sup.max(frobenius_norm(&product)?);
                }
                product = product.matmul(older)?;
            }
            if full {
                Some(self.cfg.norm_kind.of(&product)?)
            } else {
                self.remainder_sup = self.remainder_sup.max(frobenius_norm(&product)?);
                None
            }
        } else if evaluate {
            let mats: Vec<Matrix> = self.window.iter().cloned().collect();
            Some(window_condition(&self.cfg, &mats)?)
        } else {
            None
        };
        if let Some(wn) = window_norm {
            self.window_sup = Some(self.window_sup.map_or(wn, |s| s.max(wn)));
        }

        if rho > self.cfg.alarm_threshold {
            self.rho_streak += 1;
        } else {
            self.rho_streak = 0;
        }
        let alarm_reason = if window_norm.is_some_and(|wn| wn > self.cfg.alarm_threshold) {
            Some(AlarmReason::WindowProduct)
        } else if self.rho_streak >= self.cfg.window_p {
            Some(AlarmReason::PerStepNorm)
        } else {
            None
        };

        let per_step = bibs_bound(w0, self.running_ma, self.running_mb, self.running_lu);
        let windowed = self.windowed_bound(w0);
        let bibs = match (per_step, windowed) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };

        let report = StabilityReport {
            k: self.next_k,
            rho,
            lmd_frob,
            lmd_spec,
            lmd_norm,
            window_norm,
            running_ma: self.running_ma,
            running_mb: self.running_mb,
            running_lu: self.running_lu,
            bibs_bound: bibs,
            alarm: alarm_reason.is_some(),
            alarm_reason,
            state_norm,
        };
        self.next_k += 1;
        self.push_history(report.clone());
        Ok(report)
    }

    /// Report for a step at which the learner signalled divergence.
    pub fn divergence(&mut self, k: u64, state_norm: f64) -> StabilityReport {
        let last = self.history.back();
        let report = StabilityReport {
            k,
            rho: last.map_or(0.0, |r| r.rho),
            lmd_frob: last.map_or(0.0, |r| r.lmd_frob),
            lmd_spec: last.and_then(|r| r.lmd_spec),
            lmd_norm: last.map_or(0.0, |r| r.lmd_norm),
            window_norm: None,
            running_ma: self.running_ma,
            running_mb: self.running_mb,
            running_lu: self.running_lu,
            bibs_bound: None,
            alarm: true,
            alarm_reason: Some(AlarmReason::Divergence),
            state_norm,
        };
        self.push_history(report.clone());
        report
    }

    fn windowed_bound(&self, w0: f64) -> Option<f64> {
        if self.cfg.eval_stride != 1 {
            return None;
        }
        let q = self.window_sup?;
        if q >= 1.0 {
            return None;
        }
        let r = self.remainder_sup;
        let p = self.cfg.window_p as f64;
        let b = r * w0 + self.running_mb * self.running_lu * r * p / (1.0 - q);
        b.is_finite().then_some(b)
    }

    fn push_history(&mut self, report: StabilityReport) {
        if self.cfg.history_cap == 0 {
            return;
        }
        if self.history.len() == self.cfg.history_cap {
            self.history.pop_front();
        }
        self.history.push_back(report);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;

    fn step(a: Matrix, b: Matrix, u: Vector, structure: LmdStructure) -> StateSpaceStep {
        StateSpaceStep::new(a, b, u, false, structure).unwrap()
    }

    fn spectral_cfg(p: usize) -> MonitorConfig {
        MonitorConfig {
            window_p: p,
            norm_kind: NormKind::Spectral,
            ..MonitorConfig::default()
        }
    }

    #[test]
    fn uninitialized_is_usage_error() {
        let mut m = Monitor::new(MonitorConfig::default()).unwrap();
        let ss = step(Matrix::identity(1), Matrix::identity(1), Vector::zeros(1), LmdStructure::General);
        assert!(matches!(m.observe(&ss, 0.0), Err(Error::Usage(_))));
    }

    #[test]
    fn config_validation() {
        for bad in [
            MonitorConfig { window_p: 0, ..Default::default() },
            MonitorConfig { eval_stride: 0, ..Default::default() },
            MonitorConfig { alarm_threshold: 0.9, ..Default::default() },
        ] {
            assert!(Monitor::new(bad).is_err());
        }
    }

    #[test]
    fn contracting_stream() {
        let mut m = Monitor::new(spectral_cfg(4)).unwrap();
        let w0 = 0.7;
        m.init(w0).unwrap();
        let ss = step(
            Matrix::scaled_identity(2, 0.5),
            Matrix::identity(2),
            Vector::from(vec![1.0, 0.0]),
            LmdStructure::General,
        );
        let mut last = None;
        for _ in 0..10 {
            last = Some(m.observe(&ss, 0.0).unwrap());
        }
        let r = last.unwrap();
        assert!((r.window_norm.unwrap() - 0.0625).abs() < 1e-12);
        assert!(!r.alarm);
        assert!((r.bibs_bound.unwrap() - (w0 + 2.0)).abs() < 1e-9);
        assert!((r.rho - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identity_stream() {
        let mut m = Monitor::new(MonitorConfig {
            alarm_threshold: 1.0 + 1e-9,
            ..spectral_cfg(5)
        })
        .unwrap();
        m.init(1.0).unwrap();
        let ss = step(Matrix::identity(3), Matrix::identity(3), Vector::zeros(3), LmdStructure::General);
        for _ in 0..20 {
            let r = m.observe(&ss, 1.0).unwrap();
            if let Some(wn) = r.window_norm {
                assert_eq!(wn, 1.0);
            }
            assert!(!r.alarm);
            assert!(r.bibs_bound.is_none());
        }
    }

    #[test]
    fn rank1_divergence_alarms_on_first_window() {
        let p = 6;
        let mut m = Monitor::new(spectral_cfg(p)).unwrap();
        m.init(0.0).unwrap();
        let g = Vector::from(vec![1.0, 1.0]);
        let eta = 2.5 / g.norm_sq();
        let a = Matrix::identity(2).sub(&Matrix::outer(&g, &g).scale(eta)).unwrap();
        let ss = step(
            a,
            Matrix::scaled_identity(2, eta),
            g.clone(),
            LmdStructure::RankOneUpdate { coupling: 2.5 },
        );
        for k in 0..p {
            let r = m.observe(&ss, 0.0).unwrap();
            assert_eq!(r.rho, 1.5);
            if k + 1 < p {
                assert!(!r.alarm);
            } else {
                assert!((r.window_norm.unwrap() - 1.5f64.powi(p as i32)).abs() < 1e-9);
                assert_eq!(r.alarm_reason, Some(AlarmReason::WindowProduct));
            }
        }
    }

    #[test]
    fn persistent_per_step_alarm_without_window() {
        // stride larger than the run: no window evaluation after the first
        let mut m = Monitor::new(MonitorConfig {
            window_p: 3,
            eval_stride: 1000,
            ..MonitorConfig::default()
        })
        .unwrap();
        m.init(0.0).unwrap();
        let a = Matrix::from_rows(&[vec![0.0, 2.0], vec![0.5, 0.0]]).unwrap();
        // ρ = 1, Frobenius > 1: no per-step alarm
        let ss = step(a, Matrix::identity(2), Vector::zeros(2), LmdStructure::General);
        let reports: Vec<_> = (0..6).map(|_| m.observe(&ss, 0.0).unwrap()).collect();
        assert!((reports[0].rho - 1.0).abs() < 1e-12);
        assert!(reports.iter().skip(3).all(|r| !r.alarm));

        let mut m = Monitor::new(MonitorConfig {
            window_p: 3,
            eval_stride: 1000,
            ..MonitorConfig::default()
        })
        .unwrap();
        m.init(0.0).unwrap();
        let ss = step(Matrix::scaled_identity(1, 1.2), Matrix::identity(1), Vector::zeros(1), LmdStructure::General);
        let reasons: Vec<_> = (0..5).map(|_| m.observe(&ss, 0.0).unwrap().alarm_reason).collect();
        // window (evaluated once, at k = 2) fires first; the streak keeps it on afterwards
        assert_eq!(reasons[0], None);
        assert_eq!(reasons[1], None);
        assert_eq!(reasons[2], Some(AlarmReason::WindowProduct));
        assert_eq!(reasons[3], Some(AlarmReason::PerStepNorm));
        assert_eq!(reasons[4], Some(AlarmReason::PerStepNorm));
    }

    #[test]
    fn bibs_bound_examples() {
        assert_eq!(bibs_bound(0.0, 0.5, 1.0, 1.0), Some(2.0));
        assert_eq!(bibs_bound(3.0, 0.0, 1.0, 1.0), Some(4.0));
        assert_eq!(bibs_bound(0.0, 1.0, 1.0, 1.0), None);
    }

    #[test]
    fn iss_bounds_examples() {
        let b = iss_bounds(1.0, &[0.5; 3], &[1.0; 3], 1.0).unwrap();
        assert!((b.beta_term - 0.125).abs() < 1e-15);
        assert!((b.gamma_term - 1.75).abs() < 1e-15);
        let b = iss_bounds(1.0, &[0.5; 3], &[1.0; 3], 0.0).unwrap();
        assert_eq!(b.gamma_term, 0.0);
        let b = iss_bounds(2.0, &[0.3], &[0.7], 5.0).unwrap();
        assert!((b.beta_term - 0.6).abs() < 1e-15);
        assert!((b.gamma_term - 3.5).abs() < 1e-15);
        assert!(iss_bounds(1.0, &[0.5], &[1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn incremental_iss_matches_batch_formula() {
        let mut m = Monitor::new(spectral_cfg(3)).unwrap();
        m.init(2.0).unwrap();
        let mut a_norms = Vec::new();
        let mut b_norms = Vec::new();
        let mut u_sup: f64 = 0.0;
        for k in 0..8 {
            let c = 0.3 + 0.1 * k as f64;
            let ss = step(
                Matrix::scaled_identity(2, c),
                Matrix::scaled_identity(2, 1.0 / (1.0 + k as f64)),
                Vector::from(vec![k as f64, 1.0]),
                LmdStructure::General,
            );
            m.observe(&ss, 0.0).unwrap();
            a_norms.push(c);
            b_norms.push(1.0 / (1.0 + k as f64));
            u_sup = u_sup.max(ss.u.norm());
            let batch = iss_bounds(2.0, &a_norms, &b_norms, u_sup).unwrap();
            let inc = m.iss_bound().unwrap();
            assert!((batch.total() - inc.total()).abs() <= 1e-12 * batch.total());
        }
    }

    #[test]
    fn window_condition_single_matrix_is_per_step_norm() {
        let a = Matrix::from_rows(&[vec![0.3, -1.2], vec![0.4, 0.9]]).unwrap();
        for kind in [NormKind::Frobenius, NormKind::Spectral] {
            let cfg = MonitorConfig {
                norm_kind: kind,
                ..Default::default()
            };
            assert_eq!(window_condition(&cfg, std::slice::from_ref(&a)).unwrap(), kind.of(&a).unwrap());
        }
        let cfg = MonitorConfig::default();
        let eye = Matrix::identity(1);
        assert_eq!(window_condition(&cfg, &[eye.clone(), eye]).unwrap(), 1.0);
    }

    #[test]
    fn history_is_capped() {
        let mut m = Monitor::new(MonitorConfig {
            history_cap: 3,
            window_p: 2,
            ..Default::default()
        })
        .unwrap();
        m.init(0.0).unwrap();
        let ss = step(Matrix::identity(1), Matrix::identity(1), Vector::zeros(1), LmdStructure::General);
        for _ in 0..7 {
            m.observe(&ss, 0.0).unwrap();
        }
        assert_eq!(m.history().len(), 3);
        assert_eq!(m.history().front().unwrap().k, 4);
    }

    #[test]
    fn dimension_change_rejected() {
        let mut m = Monitor::new(MonitorConfig::default()).unwrap();
        m.init(0.0).unwrap();
        let ss = step(Matrix::identity(2), Matrix::identity(2), Vector::zeros(2), LmdStructure::General);
        m.observe(&ss, 0.0).unwrap();
        let ss = step(Matrix::identity(3), Matrix::identity(3), Vector::zeros(3), LmdStructure::General);
        assert!(m.observe(&ss, 0.0).is_err());
    }
}
