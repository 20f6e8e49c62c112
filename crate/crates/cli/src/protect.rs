use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use gait_deid::baseline_pgd::{self, pgd_protect};
use gait_deid::models::FrozenModels;
use gait_deid::objective::{LossRecord, LossWeights};
use gait_deid::protector::{PipelineMode, Protector};
use gait_deid::silhouette::io::{read_sequence, write_sequence};
use gait_deid::silhouette::SilhouetteSequence;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::staging::{write_json, Staged};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Full,
    VaeOnly,
    ObfOnly,
    Pgd,
}

impl Method {
    fn tag(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::VaeOnly => "vae-only",
            Method::ObfOnly => "obf-only",
            Method::Pgd => baseline_pgd::METHOD_TAG,
        }
    }

    /// Folds the method into the configuration so the snapshot says what ran.
    fn configure(self, cfg: &mut RunConfig) {
        match self {
            Method::Full | Method::ObfOnly => cfg.protection.mode = PipelineMode::Full,
            Method::VaeOnly => cfg.protection.mode = PipelineMode::VaeOnly,
            Method::Pgd => {}
        }
        if self == Method::ObfOnly {
            cfg.protection.weights.imp = 0.0;
        }
    }
}

#[derive(Args, Debug)]
pub struct ProtectArgs {
    #[arg(long, requires = "target", conflicts_with = "pairs")]
    pub source: Option<PathBuf>,
    #[arg(long, requires = "source")]
    pub target: Option<PathBuf>,
    /// Text file of `source<TAB>target` lines.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    pub method: Method,
    /// Upper bound on concurrently protected pairs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn read_pairs(path: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (s, t) = line
            .split_once('\t')
            .ok_or_else(|| CliError::Usage(format!("{}:{}: expected source<TAB>target", path.display(), n + 1)))?;
        pairs.push((PathBuf::from(s.trim()), PathBuf::from(t.trim())));
    }
    if pairs.is_empty() {
        anyhow::bail!(CliError::Usage(format!("{}: no pairs", path.display())));
    }
    Ok(pairs)
}

struct Loaded {
    source: SilhouetteSequence,
    target: SilhouetteSequence,
    source_path: PathBuf,
    target_path: PathBuf,
}

fn load(source: &Path, target: &Path) -> Result<Loaded> {
    let canon = |p: &Path| std::fs::canonicalize(p).with_context(|| format!("resolving {}", p.display()));
    let (source_path, target_path) = (canon(source)?, canon(target)?);
    let (src, tar) = (read_sequence(&source_path)?, read_sequence(&target_path)?);
    if src.dims() != tar.dims() {
        anyhow::bail!(gait_deid::Error::Dimension {
            expected: src.dims().as_vec(),
            got: tar.dims().as_vec(),
        });
    }
    Ok(Loaded {
        source: src,
        target: tar,
        source_path,
        target_path,
    })
}

struct Outcome {
    sequence: SilhouetteSequence,
    trace: Vec<LossRecord>,
    weights: LossWeights,
    wall_time_secs: f64,
    surrogate_seeds: Vec<u64>,
}

fn protect_one(pair: &Loaded, method: Method, cfg: &RunConfig, models: &FrozenModels) -> Result<Outcome> {
    Ok(match method {
        Method::Pgd => {
            let r = pgd_protect(&pair.source, &pair.target, &cfg.pgd, &models.surrogates)?;
            Outcome {
                sequence: r.sequence,
                trace: r.trace,
                weights: cfg.pgd.weights,
                wall_time_secs: r.wall_time_secs,
                surrogate_seeds: r.surrogate_seeds,
            }
        }
        _ => {
            let protector = Protector::new(models, cfg.protection.clone())?;
            let r = protector.protect(&pair.source, &pair.target, &models.surrogates)?;
            Outcome {
                sequence: r.sequence,
                trace: r.trace,
                weights: cfg.protection.weights,
                wall_time_secs: r.wall_time_secs,
                surrogate_seeds: r.surrogate_seeds,
            }
        }
    })
}

fn write_pair(
    dir: &Path,
    pair: &Loaded,
    out: Outcome,
    method: Method,
    cfg: &RunConfig,
    models: &FrozenModels,
) -> Result<f64> {
    let mut seq = out.sequence;
    seq.meta.source_path = Some(pair.source_path.display().to_string());
    seq.meta.target_path = Some(pair.target_path.display().to_string());
    seq.meta.target_identity = pair.target.meta.identity.clone();
    write_sequence(&seq, dir)?;
    write_json(
        &dir.join("loss_trace.json"),
        &json!({"weights": out.weights, "records": out.trace}),
    )?;
    write_json(
        &dir.join("result_meta.json"),
        &json!({
            "method": method.tag(),
            "config": cfg,
            "model_seed": models.seed,
            "surrogate_seeds": out.surrogate_seeds,
            "evaluation_seed": models.evaluator.seed(),
            "source_path": seq.meta.source_path,
            "target_path": seq.meta.target_path,
            "source_identity": seq.meta.identity,
            "target_identity": seq.meta.target_identity,
            "wall_time_secs": out.wall_time_secs,
        }),
    )?;
    Ok(out.trace.last().map_or(f64::NAN, |r| r.total))
}

pub fn run(args: &ProtectArgs, mut cfg: RunConfig) -> Result<()> {
    args.method.configure(&mut cfg);
    cfg.validate()?;
    if args.jobs == 0 {
        anyhow::bail!(CliError::Usage("--jobs must be at least 1".into()));
    }
    let batch = args.pairs.is_some();
    let listed = match (&args.pairs, &args.source, &args.target) {
        (Some(p), _, _) => read_pairs(p)?,
        (None, Some(s), Some(t)) => vec![(s.clone(), t.clone())],
        _ => anyhow::bail!(CliError::Usage("give --source and --target, or --pairs".into())),
    };
    let pairs = listed.iter().map(|(s, t)| load(s, t)).collect::<Result<Vec<_>>>()?;
    let dims = pairs[0].source.dims();
    if let Some(p) = pairs.iter().find(|p| p.source.dims() != dims) {
        anyhow::bail!(gait_deid::Error::Dimension {
            expected: dims.as_vec(),
            got: p.source.dims().as_vec(),
        });
    }
    let models = FrozenModels::build(&cfg.models, dims, cfg.protection.diffusion.steps)?;
    let staged = Staged::new(&args.out)?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build()?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        pairs
            .par_iter()
            .map(|p| protect_one(p, args.method, &cfg, &models))
            .collect::<Result<Vec<_>>>()
    })?;

    if batch {
        let mut index = Vec::new();
        for (k, (pair, out)) in pairs.iter().zip(outcomes).enumerate() {
            let name = format!("pair_{k:03}");
            let total = write_pair(&staged.path().join(&name), pair, out, args.method, &cfg, &models)?;
            index.push(json!({
                "dir": name,
                "source_path": pair.source_path,
                "target_path": pair.target_path,
                "final_total": total,
            }));
        }
        write_json(
            &staged.path().join("index.json"),
            &json!({"method": args.method.tag(), "pairs": index}),
        )?;
    } else {
        let out = outcomes.into_iter().next().expect("one pair");
        write_pair(staged.path(), &pairs[0], out, args.method, &cfg, &models)?;
    }
    staged.commit()?;
    log::info!("protected {} pair(s) into {}", pairs.len(), args.out.display());
    Ok(())
}
