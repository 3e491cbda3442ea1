use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use metricgan::data::synth::synthesize_corpus;
use metricgan::data::{load_manifest, load_split, Split};
use metricgan::evalcli::{
    enhance_file, evaluate_testset, export_spectrograms, io_err, read_pipeline_wav, AppConfig, ConfigError, Enhancer,
    EvalError, ReportSnapshot, Role,
};
use metricgan::models::Checkpoint;
use metricgan::training::train;

#[derive(Parser)]
#[command(version, about = "Metric-driven adversarial speech enhancement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.w=0.3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<AppConfig, EvalError> {
        Ok(AppConfig::load(self.config.as_deref(), &self.overrides)?)
    }
}

#[derive(Args)]
struct ProcessArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the training split of `data.manifest`.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Directory for history.jsonl, checkpoints and the config snapshot.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run the generator of a checkpoint on a WAV file.
    Enhance(ProcessArgs),
    /// Run the de-generator of a checkpoint on a WAV file.
    Degrade(ProcessArgs),
    /// Score a checkpoint (or the unprocessed input) on the test split.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, required_unless_present = "passthrough")]
        checkpoint: Option<PathBuf>,
        /// Score the noisy inputs themselves.
        #[arg(long, conflicts_with = "checkpoint")]
        passthrough: bool,
        #[arg(long)]
        degenerator: bool,
        /// Also write the rows as CSV (STOI as a fraction).
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write a synthetic paired corpus described by the `synth` section.
    SynthData {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Export feature, mask and output spectrograms of one pair.
    ExportSpectrograms {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        noisy: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn manifest_path(config: &AppConfig) -> Result<&Path, EvalError> {
    config
        .data
        .manifest
        .as_deref()
        .ok_or_else(|| ConfigError::Invalid("data.manifest is not set".into()).into())
}

fn write(path: &Path, text: &str) -> Result<(), EvalError> {
    fs::write(path, text).map_err(io_err(path))
}

fn run(cli: Cli) -> Result<(), EvalError> {
    match cli.command {
        Command::Train { config, out } => {
            let config = config.load()?;
            let manifest = load_manifest(manifest_path(&config)?, config.data.layout)?;
            manifest.validate()?;
            let train_set = load_split(&manifest, Split::Train)?;
            fs::create_dir_all(&out).map_err(io_err(&out))?;
            write(&out.join("config.toml"), &config.to_toml_string())?;
            let outcome = train(config.train.clone(), &train_set, config.metrics.evaluator(), Some(&out))?;
            for p in &outcome.checkpoints {
                println!("{}", p.display());
            }
        }
        Command::Enhance(a) => enhance_file(&Checkpoint::load(&a.checkpoint)?, &a.input, &a.output, Role::Generator)?,
        Command::Degrade(a) => enhance_file(&Checkpoint::load(&a.checkpoint)?, &a.input, &a.output, Role::DeGenerator)?,
        Command::Evaluate {
            config,
            checkpoint,
            passthrough,
            degenerator,
            csv,
            json,
        } => {
            let config = config.load()?;
            let role = if degenerator { Role::DeGenerator } else { Role::Generator };
            let (enhancer, snapshot) = match (&checkpoint, passthrough) {
                (Some(path), false) => {
                    let ck = Checkpoint::load(path)?;
                    let train_config = serde_json::from_value(ck.config.clone())
                        .map_err(|e| ConfigError::Invalid(format!("checkpoint config: {e}")))?;
                    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                    (Enhancer::from_checkpoint(&ck, role)?, ReportSnapshot::from_config(&train_config, name, role))
                }
                _ => (Enhancer::Passthrough, ReportSnapshot::passthrough()),
            };
            let manifest = load_manifest(manifest_path(&config)?, config.data.layout)?;
            manifest.validate()?;
            let test_set = load_split(&manifest, Split::Test)?;
            let report = evaluate_testset(
                &enhancer,
                &test_set,
                &config.evaluate.metrics,
                &config.metrics.evaluator(),
                snapshot,
            )?;
            print!("{}", report.to_table());
            if let Some(p) = csv {
                write(&p, &report.to_csv())?;
            }
            if let Some(p) = json {
                write(&p, &report.to_json())?;
            }
        }
        Command::SynthData { config, out } => {
            let config = config.load()?;
            let manifest = synthesize_corpus(&config.synth, &out)?;
            println!("{} pairs written to {}", manifest.entries.len(), out.display());
        }
        Command::ExportSpectrograms {
            checkpoint,
            clean,
            noisy,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let clean = read_pipeline_wav(&clean)?;
            let noisy = read_pipeline_wav(&noisy)?;
            for m in export_spectrograms(&ck, &clean, &noisy, &out)? {
                println!("{}", m.svg.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
