//! The learn–monitor loop.
//!
//! Per sample: features → error → learner step → monitor observe → log line.
//! The monitor sees the decomposition of the step just taken, so the report
//! at index `k` describes the map from `ξ(k)` to `ξ(k+1)`.

use std::fs::File;
use std::io::{LineWriter, Write};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::architectures::{FeatureMap, IplnaModel};
use crate::error::{Error, Result};
use crate::learners::{Learner, LearnerSpec};
use crate::linalg::Vector;
use crate::monitor::{AlarmReason, Monitor, MonitorConfig, StabilityReport};

use super::data::{CsvSamples, Generator, Sample, SyntheticSpec};

/// Weight norm above which a run is aborted as diverged.
pub const DIVERGENCE_CAP: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Synthetic(SyntheticSpec),
}

impl DataSource {
    /// `synth:<spec>` or a CSV path.
    pub fn parse(arg: &str) -> Result<Self> {
        match arg.strip_prefix("synth:") {
            Some(spec) => Ok(DataSource::Synthetic(SyntheticSpec::parse(spec)?)),
            None => Ok(DataSource::Csv(PathBuf::from(arg))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum WeightInit {
    #[default]
    Zeros,
    /// Uniform on `[−0.1, 0.1]`, drawn from the run seed.
    SeededUniform,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub arch: FeatureMap,
    pub learner: LearnerSpec,
    pub monitor: MonitorConfig,
    pub data: DataSource,
    pub steps: u64,
    pub seed: u64,
    pub init: WeightInit,
}

impl ExperimentConfig {
    pub fn from_specs(arch: &str, learner: &str, data: &str, steps: u64, seed: u64, monitor: MonitorConfig) -> Result<Self> {
        let cfg = ExperimentConfig {
            arch: FeatureMap::parse(arch)?,
            learner: LearnerSpec::parse(learner)?,
            monitor,
            data: DataSource::parse(data)?,
            steps,
            seed,
            init: WeightInit::Zeros,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Usage("steps must be >= 1".into()));
        }
        self.monitor.validate()?;
        if let DataSource::Synthetic(spec) = &self.data {
            if spec.input_dim != self.arch.input_dim() {
                return Err(Error::Usage(format!(
                    "synthetic data has dim {} but the architecture expects {}",
                    spec.input_dim,
                    self.arch.input_dim()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Clean,
    Alarmed,
    Diverged,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Clean => 0,
            RunStatus::Alarmed => 2,
            RunStatus::Diverged => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub steps_run: u64,
    pub final_w_norm: f64,
    /// RMS of the a-priori error over the last 10% of steps.
    pub final_error_rms: f64,
    pub alarms_count: u64,
    pub first_alarm_k: Option<u64>,
    pub bibs_bound_final: Option<f64>,
    pub status: RunStatus,
    #[serde(skip)]
    pub final_weights: Vector,
}

/// One JSON line of the run log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogLine {
    pub k: u64,
    pub e: f64,
    pub w_norm: f64,
    pub rho: f64,
    pub frob: f64,
    pub spec: Option<f64>,
    pub window_norm: Option<f64>,
    #[serde(rename = "MA")]
    pub ma: f64,
    #[serde(rename = "MB")]
    pub mb: f64,
    #[serde(rename = "Lu")]
    pub lu: f64,
    pub bibs_bound: Option<f64>,
    pub alarm: bool,
    pub alarm_reason: Option<AlarmReason>,
}

impl LogLine {
    pub fn new(e: f64, w_norm: f64, r: &StabilityReport) -> Self {
        LogLine {
            k: r.k,
            e,
            w_norm,
            rho: r.rho,
            frob: r.lmd_frob,
            spec: r.lmd_spec,
            window_norm: r.window_norm,
            ma: r.running_ma,
            mb: r.running_mb,
            lu: r.running_lu,
            bibs_bound: r.bibs_bound,
            alarm: r.alarm,
            alarm_reason: r.alarm_reason,
        }
    }
}

/// Runs the experiment and writes the JSON-lines log to `output`.
pub fn run_experiment(cfg: &ExperimentConfig, output: &PathBuf) -> Result<Summary> {
    let file = File::create(output)?;
    run_with_writer(cfg, LineWriter::new(file))
}

fn samples(cfg: &ExperimentConfig) -> Result<Box<dyn Iterator<Item = Result<Sample>>>> {
    Ok(match &cfg.data {
        DataSource::Csv(path) => Box::new(CsvSamples::open(path)?),
        DataSource::Synthetic(spec) => Box::new(Generator::new(spec.clone(), cfg.seed)?),
    })
}

fn initial_weights(cfg: &ExperimentConfig) -> Vector {
    let n = cfg.arch.output_dim();
    match cfg.init {
        WeightInit::Zeros => Vector::zeros(n),
        WeightInit::SeededUniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            // separate stream from the synthetic data
            rng.set_stream(1);
            Vector::from((0..n).map(|_| rng.random_range(-0.1..=0.1)).collect::<Vec<f64>>())
        }
    }
}

pub fn run_with_writer<W: Write>(cfg: &ExperimentConfig, mut out: W) -> Result<Summary> {
    cfg.validate()?;
    let mut model = IplnaModel::with_weights(cfg.arch.clone(), initial_weights(cfg))?;
    let mut learner: Learner = cfg.learner.build(model.weights())?;
    let mut monitor = Monitor::new(cfg.monitor.clone())?;
    monitor.init(learner.state_vector(model.weights()).norm())?;

    let mut errors: Vec<f64> = Vec::new();
    let mut alarms_count = 0u64;
    let mut first_alarm_k = None;
    let mut status = RunStatus::Clean;
    let mut bibs_final = None;
    let mut steps_run = 0u64;

    let emit = |line: &LogLine, out: &mut W| -> Result<()> {
        serde_json::to_writer(&mut *out, line)?;
        out.write_all(b"\n")?;
        Ok(())
    };

    for (k, sample) in (0..cfg.steps).zip(samples(cfg)?) {
        let (x, y) = sample?;
        let g = model.map().features(&x)?;
        let e = y - model.weights().dot(&g);
        steps_run = k + 1;
        errors.push(e);

        let report = match learner.step(model.weights(), &g, y, k) {
            Ok(step) => {
                model.set_weights(step.w_next)?;
                let state_norm = learner.state_vector(model.weights()).norm();
                let mut report = monitor.observe(&step.ss, state_norm)?;
                if model.weights().norm() > DIVERGENCE_CAP {
                    report.alarm = true;
                    report.alarm_reason = Some(AlarmReason::Divergence);
                    status = RunStatus::Diverged;
                }
                report
            }
            Err(Error::Divergence { .. }) => {
                status = RunStatus::Diverged;
                monitor.divergence(k, f64::MAX)
            }
            Err(other) => return Err(other),
        };

        if report.alarm {
            alarms_count += 1;
            first_alarm_k.get_or_insert(k);
            if status == RunStatus::Clean {
                status = RunStatus::Alarmed;
            }
        }
        bibs_final = report.bibs_bound;
        let w_norm = model.weights().norm();
        emit(&LogLine::new(e, w_norm.min(f64::MAX), &report), &mut out)?;
        if status == RunStatus::Diverged {
            break;
        }
    }
    out.flush()?;

    let tail = ((steps_run as f64) * 0.1).ceil().max(1.0) as usize;
    let tail = &errors[errors.len().saturating_sub(tail)..];
    let final_error_rms = if tail.is_empty() {
        0.0
    } else {
        (tail.iter().map(|e| e * e).sum::<f64>() / tail.len() as f64).sqrt()
    };
    Ok(Summary {
        steps_run,
        final_w_norm: model.weights().norm(),
        final_error_rms,
        alarms_count,
        first_alarm_k,
        bibs_bound_final: bibs_final,
        status,
        final_weights: model.weights().clone(),
    })
}
