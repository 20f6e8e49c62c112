use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use gait_deid::eval::{evaluate, write_embeddings_csv, EvalProtocol, Gallery, Probe};
use gait_deid::models::FrozenModels;
use gait_deid::silhouette::io::{list_sequence_dirs, read_sequence, MANIFEST_FILE};
use gait_deid::silhouette::SilhouetteSequence;

use crate::config::RunConfig;
use crate::staging::write_json;

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// A protected sequence directory or a directory of them.
    #[arg(long)]
    pub probes: PathBuf,
    #[arg(long)]
    pub gallery: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub rebinarize: bool,
    #[arg(long)]
    pub whitebox: bool,
    /// Also write gallery embeddings as CSV.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

fn dir_name(p: &Path) -> String {
    p.file_name()
        .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn probe_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(MANIFEST_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let dirs = list_sequence_dirs(root)?;
    if dirs.is_empty() {
        anyhow::bail!(gait_deid::Error::NotFound(format!(
            "no sequences under {}",
            root.display()
        )));
    }
    Ok(dirs)
}

fn load_probe(dir: &Path) -> Result<Probe> {
    let id = dir_name(dir);
    let protected = read_sequence(dir)?;
    let linked = |what: &str, p: &Option<String>| -> Result<SilhouetteSequence> {
        let p = p
            .as_ref()
            .ok_or_else(|| gait_deid::Error::InvalidInput(format!("probe {id} has no {what}_path in its manifest")))?;
        Ok(read_sequence(Path::new(p))?)
    };
    let source = linked("source", &protected.meta.source_path)?;
    let target = linked("target", &protected.meta.target_path)?;
    Ok(Probe {
        id,
        source,
        target,
        protected,
    })
}

pub fn run(args: &EvaluateArgs, mut cfg: RunConfig) -> Result<()> {
    cfg.eval.rebinarize |= args.rebinarize;
    cfg.eval.whitebox |= args.whitebox;
    if cfg.eval.whitebox {
        cfg.models = cfg.models.whitebox();
    }
    cfg.validate()?;

    let probes = probe_dirs(&args.probes)?
        .iter()
        .map(|d| load_probe(d))
        .collect::<Result<Vec<_>>>()?;
    // Sequences a probe was derived from never count as gallery entries.
    let excluded: HashSet<PathBuf> = probes
        .iter()
        .flat_map(|p| [&p.protected.meta.source_path, &p.protected.meta.target_path])
        .flatten()
        .filter_map(|p| std::fs::canonicalize(p).ok())
        .collect();
    let gallery_dirs: Vec<PathBuf> = list_sequence_dirs(&args.gallery)?
        .into_iter()
        .filter(|d| std::fs::canonicalize(d).map_or(true, |c| !excluded.contains(&c)))
        .collect();
    if gallery_dirs.is_empty() {
        anyhow::bail!(gait_deid::Error::NotFound(format!(
            "no gallery sequences under {}",
            args.gallery.display()
        )));
    }
    let gallery_seqs = gallery_dirs
        .iter()
        .map(|d| read_sequence(d))
        .collect::<gait_deid::Result<Vec<_>>>()?;

    let dims = probes[0].protected.dims();
    let models = FrozenModels::build(&cfg.models, dims, cfg.protection.diffusion.steps)?;
    let items: Vec<(String, &SilhouetteSequence)> = gallery_dirs
        .iter()
        .map(|d| dir_name(d))
        .zip(gallery_seqs.iter())
        .collect();
    let gallery = Gallery::enroll(&items, &models.evaluator)?;
    let protocol = EvalProtocol {
        rebinarize: cfg.eval.rebinarize,
        whitebox: cfg.eval.whitebox,
        evaluation_seed: models.evaluator.seed(),
        surrogate_seeds: cfg.models.surrogate_seeds.clone(),
    };
    let report = evaluate(&probes, &gallery, &models.evaluator, protocol)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    write_json(&args.out, &report.to_json(models.evaluator.embed_dim()))?;
    if let Some(path) = &args.embeddings {
        write_embeddings_csv(path, gallery.entries())?;
    }
    log::info!(
        "{} probes, gallery {}: ISR {:.3}, rank-1 {:.3} -> {:.3}",
        report.probes,
        report.gallery_size,
        report.isr,
        report.rank1_before,
        report.rank1_after
    );
    Ok(())
}
