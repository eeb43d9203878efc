use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use iplna::harness::{run_experiment, write_csv, ExperimentConfig, Generator, SyntheticSpec, WeightInit};
use iplna::monitor::{MonitorConfig, NormKind};

#[derive(Parser)]
#[command(name = "iplna", version, about = "Train linear-in-parameter models with online stability monitoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Frob,
    Spec,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Zeros,
    Uniform,
}

#[derive(Subcommand)]
enum Command {
    /// Run a learner over a data stream and log the stability report per step.
    Run {
        /// e.g. `honu:order=2,dim=3` or `rvfl:dim=3,hidden=20,act=tanh,seed=7`
        #[arg(long)]
        arch: String,
        /// e.g. `ngd:mu=0.5,eps=1e-6`
        #[arg(long)]
        learner: String,
        /// CSV path or `synth:<spec>`
        #[arg(long)]
        data: String,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        window: usize,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, value_enum, default_value_t = NormArg::Frob)]
        norm: NormArg,
        /// Alarm threshold is `1 + margin`.
        #[arg(long, default_value_t = 0.05)]
        margin: f64,
        #[arg(long, value_enum, default_value_t = InitArg::Zeros)]
        init: InitArg,
        /// JSON-lines log destination.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic stream to CSV.
    Gen {
        #[arg(long)]
        synth: String,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cmd: Command) -> anyhow::Result<i32> {
    match cmd {
        Command::Run {
            arch,
            learner,
            data,
            steps,
            seed,
            window,
            stride,
            norm,
            margin,
            init,
            out,
        } => {
            let monitor = MonitorConfig {
                window_p: window,
                eval_stride: stride,
                norm_kind: match norm {
                    NormArg::Frob => NormKind::Frobenius,
                    NormArg::Spec => NormKind::Spectral,
                },
                alarm_threshold: 1.0 + margin,
                ..MonitorConfig::default()
            };
            let mut cfg = ExperimentConfig::from_specs(&arch, &learner, &data, steps, seed, monitor)?;
            cfg.init = match init {
                InitArg::Zeros => WeightInit::Zeros,
                InitArg::Uniform => WeightInit::SeededUniform,
            };
            let summary = run_experiment(&cfg, &out).with_context(|| format!("run failed, log at {}", out.display()))?;
            println!("{}", serde_json::to_string(&summary)?);
            Ok(summary.status.exit_code())
        }
        Command::Gen { synth, steps, seed, out } => {
            let spec = SyntheticSpec::parse(&synth)?;
            let dim = spec.input_dim;
            let samples = Generator::new(spec, seed)?
                .take(steps as usize)
                .collect::<Result<Vec<_>, _>>()?;
            let file = File::create(&out).with_context(|| format!("cannot create {}", out.display()))?;
            write_csv(BufWriter::new(file), dim, samples)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
