use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use gait_deid::silhouette::{io::write_sequence, synth_corpus, CorpusSpec, Dims};
use serde_json::json;

use crate::config::RunConfig;
use crate::staging::{write_json, Staged};

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub ids: Option<usize>,
    #[arg(long)]
    pub seqs_per_id: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
}

pub fn run(args: &SynthArgs, mut cfg: RunConfig) -> Result<()> {
    let c = &mut cfg.corpus;
    c.identities = args.ids.unwrap_or(c.identities);
    c.sequences_per_identity = args.seqs_per_id.unwrap_or(c.sequences_per_identity);
    c.seed = args.seed.unwrap_or(c.seed);
    c.dims = Dims::new(
        args.frames.unwrap_or(c.dims.frames),
        args.height.unwrap_or(c.dims.height),
        args.width.unwrap_or(c.dims.width),
    );
    let spec = CorpusSpec {
        identities: c.identities,
        sequences_per_identity: c.sequences_per_identity,
        dims: c.dims,
        seed: c.seed,
        bounds: c.bounds,
    };
    let subjects = synth_corpus(&spec)?;
    let staged = Staged::new(&args.out)?;
    let mut listing = Vec::new();
    for s in &subjects {
        for seq in &s.sequences {
            let name = format!("{}_{}", s.identity, seq.meta.condition.as_deref().unwrap_or("seq"));
            write_sequence(seq, &staged.path().join(&name))?;
            listing.push(json!({
                "dir": name,
                "identity": s.identity,
                "condition": seq.meta.condition,
                "tilt_label": seq.meta.tilt_label,
            }));
        }
    }
    let identities: Vec<_> = subjects
        .iter()
        .map(|s| json!({"identity": s.identity, "params": s.params}))
        .collect();
    write_json(
        &staged.path().join("corpus.json"),
        &json!({
            "corpus": cfg.corpus,
            "sequences": listing,
            "identities": identities,
        }),
    )?;
    staged.commit()?;
    log::info!(
        "wrote {} sequences to {}",
        subjects.len() * spec.sequences_per_identity,
        args.out.display()
    );
    Ok(())
}
