//! Pipeline driver for the OOD retrosynthesis toolkit.

use clap::{Args, Parser, Subcommand, ValueEnum};
use retroshift::cli::{
    self, resolve_out_dir, CliError, SplitKindArg, SplitParams, TrainParams,
};
use retroshift::enhance::{EncoderKind, EnhanceConfig};
use retroshift::learn::{BinCriterion, ClassifierConfig, IrmConfig, IrmScope, TrainMode};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "retroshift",
    about = "Out-of-distribution retrosynthesis benchmarks and remedies",
    version
)]
struct RootArgs {
    /// Force single-threaded execution for byte-reproducible runs
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract reaction templates at a radius and assign one per reaction
    ExtractTemplates(ExtractArgs),
    /// Build a label-shift or covariate-shift benchmark split
    Split(SplitArgs),
    /// Run the concept-enhancement pipeline on a split's train partition
    Enhance(EnhanceArgs),
    /// Train the reference classifier and report ID/OOD top-k accuracy
    Train(TrainArgs),
    /// Evaluate a saved classifier checkpoint on a split
    Eval(EvalArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Corpus TSV: id<TAB>class<TAB>reaction_smiles
    #[arg(long)]
    corpus: PathBuf,
    /// Template radius (0 = minimal, >=1 = retro)
    #[arg(long, default_value_t = 1)]
    radius: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitKindCli {
    LabelMinimal,
    LabelRetro,
    CovariateSize,
    CovariateScaffold,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum)]
    kind: SplitKindCli,
    /// Retro-template radius for label-retro splits
    #[arg(long, default_value_t = 1)]
    radius: usize,
    #[arg(long, default_value_t = 0.1)]
    ood_fraction: f64,
    /// Minimal-template classes below this size are discarded (covariate)
    #[arg(long, default_value_t = 10)]
    min_class_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncoderCli {
    Fingerprint,
    Mpnn,
}

#[derive(Args)]
struct EnhanceArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Split manifest JSON produced by `split`
    #[arg(long)]
    split: PathBuf,
    #[arg(long, default_value_t = 1)]
    radius: usize,
    #[arg(long, default_value_t = 1)]
    k_hops: usize,
    #[arg(long, default_value_t = 100)]
    max_negatives: usize,
    /// Enhanced candidates kept per gt edge (n)
    #[arg(long, default_value_t = 5)]
    top_n: usize,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    #[arg(long, default_value_t = 256)]
    embed: usize,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    #[arg(long, value_enum, default_value_t = EncoderCli::Fingerprint)]
    encoder: EncoderCli,
    #[arg(long, default_value_t = 2048)]
    fingerprint_bits: usize,
    #[arg(long, default_value_t = 2)]
    fingerprint_radius: usize,
    #[arg(long, default_value_t = 10)]
    mpnn_depth: usize,
    /// Include the positive edge in the contrastive denominator
    #[arg(long)]
    include_positive: bool,
    /// Literal highest-energy selection in the denoising stage
    #[arg(long)]
    score_highest: bool,
    #[arg(long, default_value_t = 100)]
    max_matches: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeCli {
    Erm,
    Irm,
}

#[derive(Clone, Copy, ValueEnum)]
enum BinCli {
    Size,
    Scaffold,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeCli {
    WholeLoss,
    AuxHead,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    split: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeCli::Erm)]
    mode: ModeCli,
    /// Enhanced corpus TSV prepended to the train partition
    #[arg(long)]
    enhanced: Option<PathBuf>,
    /// Template radius override (defaults per split kind)
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 4)]
    environments: usize,
    #[arg(long, value_enum, default_value_t = BinCli::Size)]
    bin_criterion: BinCli,
    #[arg(long, default_value_t = 5)]
    warmup_epochs: usize,
    #[arg(long, value_enum, default_value_t = ScopeCli::WholeLoss)]
    irm_scope: ScopeCli,
    /// Add the center-prediction auxiliary head
    #[arg(long)]
    aux_head: bool,
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    #[arg(long, default_value_t = 2048)]
    fingerprint_bits: usize,
    #[arg(long, default_value_t = 2)]
    fingerprint_radius: usize,
    /// Also evaluate the train partition
    #[arg(long)]
    include_train_metrics: bool,
    #[arg(long, default_value_t = 100)]
    max_matches: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    split: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    include_train_metrics: bool,
    #[arg(long, default_value_t = 100)]
    max_matches: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(root: RootArgs) -> Result<(), CliError> {
    if root.deterministic {
        // single-threaded reductions for byte-identical artifacts
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    match root.command {
        Command::ExtractTemplates(args) => {
            cli::cmd_extract(&args.corpus, args.radius, &resolve_out_dir(args.out))
        }
        Command::Split(args) => {
            let params = SplitParams {
                kind: match args.kind {
                    SplitKindCli::LabelMinimal => SplitKindArg::LabelMinimal,
                    SplitKindCli::LabelRetro => SplitKindArg::LabelRetro,
                    SplitKindCli::CovariateSize => SplitKindArg::CovariateSize,
                    SplitKindCli::CovariateScaffold => SplitKindArg::CovariateScaffold,
                },
                radius: args.radius,
                ood_fraction: args.ood_fraction,
                min_class_size: args.min_class_size,
                seed: args.seed,
            };
            cli::cmd_split(&args.corpus, &params, &resolve_out_dir(args.out))
        }
        Command::Enhance(args) => {
            let cfg = EnhanceConfig {
                k_hops: args.k_hops,
                max_negatives: args.max_negatives,
                top_n: args.top_n,
                tau: args.tau,
                epochs: args.epochs,
                batch_size: args.batch_size,
                lr: args.lr,
                hidden: args.hidden,
                embed: args.embed,
                dropout: args.dropout,
                encoder: match args.encoder {
                    EncoderCli::Fingerprint => EncoderKind::Fingerprint {
                        nbits: args.fingerprint_bits,
                        radius: args.fingerprint_radius,
                    },
                    EncoderCli::Mpnn => EncoderKind::Mpnn { depth: args.mpnn_depth },
                },
                include_positive: args.include_positive,
                score_highest: args.score_highest,
                max_matches: args.max_matches,
            };
            cli::cmd_enhance(
                &args.corpus,
                &args.split,
                &cfg,
                args.radius,
                args.seed,
                &resolve_out_dir(args.out),
            )
        }
        Command::Train(args) => {
            let params = TrainParams {
                mode: match args.mode {
                    ModeCli::Erm => TrainMode::Erm,
                    ModeCli::Irm => TrainMode::Irm,
                },
                irm: IrmConfig {
                    lambda: args.lambda,
                    environments: args.environments,
                    criterion: match args.bin_criterion {
                        BinCli::Size => BinCriterion::Size,
                        BinCli::Scaffold => BinCriterion::Scaffold,
                    },
                    warmup_epochs: args.warmup_epochs,
                    scope: match args.irm_scope {
                        ScopeCli::WholeLoss => IrmScope::WholeLoss,
                        ScopeCli::AuxHead => IrmScope::AuxHead,
                    },
                },
                classifier: ClassifierConfig {
                    fingerprint_bits: args.fingerprint_bits,
                    fingerprint_radius: args.fingerprint_radius,
                    hidden: args.hidden,
                    dropout: args.dropout,
                    epochs: args.epochs,
                    lr: args.lr,
                    aux_head: args.aux_head,
                    linear: false,
                },
                radius: args.radius,
                seed: args.seed,
                include_train_metrics: args.include_train_metrics,
                max_matches: args.max_matches,
            };
            cli::cmd_train(
                &args.corpus,
                &args.split,
                args.enhanced.as_deref(),
                &params,
                &resolve_out_dir(args.out),
            )
        }
        Command::Eval(args) => cli::cmd_eval(
            &args.corpus,
            &args.split,
            &args.checkpoint,
            args.include_train_metrics,
            args.max_matches,
            &resolve_out_dir(args.out),
        ),
    }
}

fn main() {
    let root = RootArgs::parse();
    if let Err(e) = run(root) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
