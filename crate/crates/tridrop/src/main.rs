use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde::de::DeserializeOwned;

use tridrop::config::{
    resolve, AblateArgs, AblateSettings, AeArgs, AeSettings, CapacityArgs, CapacitySettings,
    ClfArgs, ClfSettings, DistillArgs, DistillSettings, GradcheckArgs, GradcheckSettings,
    ParamCountArgs, ParamCountSettings, PruneArgs, PruneSettings,
};
use tridrop::experiments;
use tridrop::Result;

#[derive(Parser)]
#[command(name = "tridrop", version, about = "Triangular Dropout experiments")]
#[command(args_override_self = true)]
struct Cli {
    /// JSON file with settings; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an MNIST autoencoder
    TrainAe(AeArgs),
    /// Train an MNIST classifier with two stacked Triangular Dropout layers
    TrainClf(ClfArgs),
    /// Evaluate a model at reduced widths and emit width,metric,params CSV
    Ablate(AblateArgs),
    /// Train autoencoders at several latent sizes and ablate each
    CapacitySweep(CapacityArgs),
    /// Copy the leading units into a smaller dense model and verify it
    Prune(PruneArgs),
    /// Distill the point-mass expert into a student and search its width
    Distill(DistillArgs),
    /// Check backpropagation against finite differences on a model catalog
    Gradcheck(GradcheckArgs),
    /// Count parameters of the VGG19 classifier head or of a model file
    ParamCount(ParamCountArgs),
}

fn settings<S, F>(config: &Option<PathBuf>, flags: &F) -> Result<S>
where
    S: Default + Serialize + DeserializeOwned,
    F: Serialize,
{
    resolve(config.as_deref(), flags)
}

fn run(cli: Cli) -> Result<String> {
    let c = &cli.config;
    match &cli.command {
        Command::TrainAe(a) => experiments::run_train_ae(&settings::<AeSettings, _>(c, a)?),
        Command::TrainClf(a) => experiments::run_train_clf(&settings::<ClfSettings, _>(c, a)?),
        Command::Ablate(a) => experiments::run_ablate(&settings::<AblateSettings, _>(c, a)?),
        Command::CapacitySweep(a) => {
            experiments::run_capacity_sweep(&settings::<CapacitySettings, _>(c, a)?)
        }
        Command::Prune(a) => experiments::run_prune(&settings::<PruneSettings, _>(c, a)?),
        Command::Distill(a) => experiments::run_distill(&settings::<DistillSettings, _>(c, a)?),
        Command::Gradcheck(a) => {
            experiments::run_gradcheck(&settings::<GradcheckSettings, _>(c, a)?)
        }
        Command::ParamCount(a) => {
            experiments::run_param_count(&settings::<ParamCountSettings, _>(c, a)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
