//! Regenerates the bundled desk corpus deterministically.

use clap::Parser;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "gen-desk-corpus", about = "Write the synthetic desk corpus TSV")]
struct GenArgs {
    #[arg(long, default_value = "data/desk_corpus.tsv")]
    out: PathBuf,
    #[arg(long, default_value_t = 17)]
    seed: u64,
}

fn main() {
    let args = GenArgs::parse();
    let corpus = retroshift::synth::desk_corpus(args.seed);
    if let Some(parent) = args.out.parent() {
        std::fs::create_dir_all(parent).expect("create output directory");
    }
    retroshift::corpus::write_corpus(&args.out, &corpus, false).expect("write corpus");
    eprintln!("wrote {} reactions to {}", corpus.len(), args.out.display());
}
