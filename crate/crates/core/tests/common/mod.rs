//! Shared fixtures: the calibrated toy corpus, a gallery without the
//! probe sequences, and a 20-pair protection suite.
#![allow(dead_code)]

use gait_deid::baseline_pgd::{pgd_protect, PgdConfig};
use gait_deid::eval::{evaluate, EvalProtocol, EvalReport, Gallery, Probe};
use gait_deid::models::{FrozenModels, ModelConfig, MomentEmbedder};
use gait_deid::protector::{ProtectionConfig, Protector};
use gait_deid::silhouette::{synth_corpus, CorpusSpec, CorpusSubject, Dims, SilhouetteSequence};

pub const IDS: usize = 10;
pub const SEQS: usize = 6;
pub const CORPUS_SEED: u64 = 1;

pub fn corpus() -> Vec<CorpusSubject> {
    synth_corpus(&CorpusSpec::new(IDS, SEQS, CORPUS_SEED)).unwrap()
}

pub fn models(cfg: &ModelConfig) -> FrozenModels {
    FrozenModels::build(cfg, Dims::DESK, ProtectionConfig::default().diffusion.steps).unwrap()
}

/// Sequence 0 of every identity is held out as probe material; the rest
/// form the gallery.
pub fn gallery(corpus: &[CorpusSubject], embedder: &MomentEmbedder) -> Gallery {
    let items: Vec<(String, &SilhouetteSequence)> = corpus
        .iter()
        .flat_map(|s| {
            s.sequences
                .iter()
                .enumerate()
                .skip(1)
                .map(move |(j, q)| (format!("{}/{j}", s.identity), q))
        })
        .collect();
    Gallery::enroll(&items, embedder).unwrap()
}

/// 20 source/target identity pairs: every identity towards its first and
/// third successor.
pub fn pairs() -> Vec<(usize, usize)> {
    (0..IDS)
        .flat_map(|i| [(i, (i + 1) % IDS), (i, (i + 3) % IDS)])
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Protector,
    Pgd,
}

pub struct SuiteRun {
    pub probes: Vec<Probe>,
    pub secs: f64,
}

/// Protects every pair of [`pairs`] with `ensemble`.
pub fn run_suite(
    corpus: &[CorpusSubject],
    models: &FrozenModels,
    cfg: &ProtectionConfig,
    ensemble: &[MomentEmbedder],
    method: Method,
) -> SuiteRun {
    let start = std::time::Instant::now();
    let protector = Protector::new(models, cfg.clone()).unwrap();
    let probes = pairs()
        .into_iter()
        .enumerate()
        .map(|(k, (a, b))| {
            let (source, target) = (&corpus[a].sequences[0], &corpus[b].sequences[0]);
            let protected = match method {
                Method::Protector => protector.protect(source, target, ensemble).unwrap().sequence,
                Method::Pgd => {
                    pgd_protect(source, target, &PgdConfig::default(), ensemble)
                        .unwrap()
                        .sequence
                }
            };
            Probe {
                id: format!("pair{k:02}"),
                source: source.clone(),
                target: target.clone(),
                protected,
            }
        })
        .collect();
    SuiteRun {
        probes,
        secs: start.elapsed().as_secs_f64(),
    }
}

pub fn report(probes: &[Probe], gallery: &Gallery, embedder: &MomentEmbedder, rebinarize: bool) -> EvalReport {
    let protocol = EvalProtocol {
        rebinarize,
        whitebox: false,
        evaluation_seed: embedder.seed(),
        surrogate_seeds: vec![],
    };
    evaluate(probes, gallery, embedder, protocol).unwrap()
}

/// Model configuration whose single surrogate is the evaluation embedder.
pub fn whitebox_config() -> ModelConfig {
    let base = ModelConfig::default();
    ModelConfig {
        surrogate_seeds: vec![base.evaluation_seed],
        ..base
    }
}
