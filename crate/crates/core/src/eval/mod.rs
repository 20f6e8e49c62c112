//! Privacy, quality and utility protocols.

mod quality;
mod retrieval;
mod utility;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use quality::{psnr, quality, ssim, QualityReport, MSE_FLOOR, PSNR_CAP, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW};
pub use retrieval::{isr, rank1_accuracy, Gallery, GalleryEntry};
pub use utility::{classify_lean, lean_offset, utility_accuracy};

use crate::error::{Error, Result};
use crate::models::{Embedding, MomentEmbedder};
use crate::scalar::Scalar;
use crate::silhouette::{gray_fraction, hard_binarize, SilhouetteSequence, GRAY_BAND};

/// Hard re-binarization applied by an adaptive adversary before matching.
pub fn rebinarize_protocol<S: Scalar>(probes: &[SilhouetteSequence<S>]) -> Vec<SilhouetteSequence<S>> {
    probes.iter().map(hard_binarize).collect()
}

/// One protected probe with the sequences it was derived from.
#[derive(Clone, Debug)]
pub struct Probe<S: Scalar = f64> {
    pub id: String,
    pub source: SilhouetteSequence<S>,
    pub target: SilhouetteSequence<S>,
    pub protected: SilhouetteSequence<S>,
}

impl<S: Scalar> Probe<S> {
    fn identities(&self) -> Result<(String, String)> {
        let missing = |what: &str| Error::InvalidInput(format!("probe {} has no {what} identity tag", self.id));
        let src = self.source.meta.identity.clone().ok_or_else(|| missing("source"))?;
        let tar = self
            .protected
            .meta
            .target_identity
            .clone()
            .or_else(|| self.target.meta.identity.clone())
            .ok_or_else(|| missing("target"))?;
        Ok((src, tar))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub rebinarize: bool,
    pub whitebox: bool,
    pub evaluation_seed: u64,
    pub surrogate_seeds: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankStats {
    pub mean: f64,
    pub median: f64,
}

impl RankStats {
    fn of(ranks: &[usize]) -> Self {
        let mut r: Vec<f64> = ranks.iter().map(|&v| v as f64).collect();
        r.sort_by(f64::total_cmp);
        let n = r.len();
        let median = if n % 2 == 1 {
            r[n / 2]
        } else {
            0.5 * (r[n / 2 - 1] + r[n / 2])
        };
        Self {
            mean: r.iter().sum::<f64>() / n as f64,
            median,
        }
    }
}

/// Ranks measured on the gallery augmented with each probe's own source
/// and target sequences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankShiftReport {
    pub target_rank_source: RankStats,
    pub target_rank_protected: RankStats,
    pub source_rank_protected: RankStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub acc_source: f64,
    pub acc_protected: f64,
}

/// Side-by-side metrics without and with hard re-binarization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RebinarizationReport {
    pub isr_raw: f64,
    pub isr_rebin: f64,
    pub rank1_after_raw: f64,
    pub rank1_after_rebin: f64,
    pub gray_fraction_raw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub id: String,
    pub source_identity: String,
    pub target_identity: String,
    pub top1_id: String,
    pub top1_identity: String,
    pub impersonated: bool,
    pub source_retrieved: bool,
    pub target_rank_source: usize,
    pub target_rank_protected: usize,
    pub source_rank_protected: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: EvalProtocol,
    pub probes: usize,
    pub gallery_size: usize,
    pub isr: f64,
    /// ISR of the unprotected sources: the chance-level reference.
    pub isr_source: f64,
    pub rank1_before: f64,
    pub rank1_after: f64,
    pub rank_shift: RankShiftReport,
    pub quality: QualityReport,
    pub utility: UtilityReport,
    pub rebinarization: RebinarizationReport,
    pub per_probe: Vec<ProbeRecord>,
}

/// Top-level keys of `report.json`.
pub const REPORT_FIELDS: [&str; 13] = [
    "protocol",
    "probes",
    "gallery_size",
    "isr",
    "isr_source",
    "rank1_before",
    "rank1_after",
    "rank_shift",
    "quality",
    "utility",
    "rebinarization",
    "per_probe",
    "embedding_dim",
];

impl EvalReport {
    pub fn to_json(&self, embedding_dim: usize) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serialises");
        v["embedding_dim"] = embedding_dim.into();
        v
    }
}

fn labelled<S: Scalar>(embs: &[Embedding<S>], ids: &[String]) -> Vec<(Embedding<S>, String)> {
    embs.iter().cloned().zip(ids.iter().cloned()).collect()
}

/// Runs every protocol on `probes` against `gallery`.
pub fn evaluate<S: Scalar>(
    probes: &[Probe<S>],
    gallery: &Gallery<S>,
    embedder: &MomentEmbedder<S>,
    protocol: EvalProtocol,
) -> Result<EvalReport> {
    if probes.is_empty() {
        return Err(Error::InvalidInput("empty probe set".into()));
    }
    let ids = probes.iter().map(Probe::identities).collect::<Result<Vec<_>>>()?;
    let (src_ids, tar_ids): (Vec<String>, Vec<String>) = ids.into_iter().unzip();
    let raw: Vec<SilhouetteSequence<S>> = probes.iter().map(|p| p.protected.clone()).collect();
    let rebin = rebinarize_protocol(&raw);
    let embed_all = |xs: &[SilhouetteSequence<S>]| xs.iter().map(|x| embedder.embed(x)).collect::<Result<Vec<_>>>();
    let e_raw = embed_all(&raw)?;
    let e_rebin = embed_all(&rebin)?;
    let e_src = probes
        .iter()
        .map(|p| embedder.embed(&p.source))
        .collect::<Result<Vec<_>>>()?;
    let e_tar = probes
        .iter()
        .map(|p| embedder.embed(&p.target))
        .collect::<Result<Vec<_>>>()?;

    let rebinarization = RebinarizationReport {
        isr_raw: isr(&labelled(&e_raw, &tar_ids), gallery)?,
        isr_rebin: isr(&labelled(&e_rebin, &tar_ids), gallery)?,
        rank1_after_raw: rank1_accuracy(&labelled(&e_raw, &src_ids), gallery)?,
        rank1_after_rebin: rank1_accuracy(&labelled(&e_rebin, &src_ids), gallery)?,
        gray_fraction_raw: raw
            .iter()
            .map(|x| gray_fraction(x, GRAY_BAND))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .sum::<f64>()
            / raw.len() as f64,
    };
    let (evaluated, e_pro) = if protocol.rebinarize {
        (&rebin, &e_rebin)
    } else {
        (&raw, &e_raw)
    };

    let mut per_probe = Vec::with_capacity(probes.len());
    let (mut t_src, mut t_pro, mut s_pro) = (Vec::new(), Vec::new(), Vec::new());
    let (mut psnr_sum, mut ssim_sum) = (0.0, 0.0);
    for (i, p) in probes.iter().enumerate() {
        let src_key = format!("{}#source", p.id);
        let tar_key = format!("{}#target", p.id);
        let augmented = gallery.with_entries([
            GalleryEntry {
                id: src_key.clone(),
                identity: src_ids[i].clone(),
                embedding: e_src[i].clone(),
            },
            GalleryEntry {
                id: tar_key.clone(),
                identity: tar_ids[i].clone(),
                embedding: e_tar[i].clone(),
            },
        ])?;
        let top = gallery
            .top1(&e_pro[i])
            .ok_or_else(|| Error::InvalidInput("empty gallery".into()))?;
        let q = quality(&p.source, &evaluated[i])?;
        psnr_sum += q.psnr;
        ssim_sum += q.ssim;
        let record = ProbeRecord {
            id: p.id.clone(),
            source_identity: src_ids[i].clone(),
            target_identity: tar_ids[i].clone(),
            top1_id: top.id.clone(),
            top1_identity: top.identity.clone(),
            impersonated: top.identity == tar_ids[i],
            source_retrieved: top.identity == src_ids[i],
            target_rank_source: augmented.rank_of(&e_src[i], &tar_key)?,
            target_rank_protected: augmented.rank_of(&e_pro[i], &tar_key)?,
            source_rank_protected: augmented.rank_of(&e_pro[i], &src_key)?,
            psnr: q.psnr,
            ssim: q.ssim,
        };
        t_src.push(record.target_rank_source);
        t_pro.push(record.target_rank_protected);
        s_pro.push(record.source_rank_protected);
        per_probe.push(record);
    }
    let n = probes.len() as f64;
    let sources: Vec<&SilhouetteSequence<S>> = probes.iter().map(|p| &p.source).collect();
    let protected: Vec<&SilhouetteSequence<S>> = evaluated.iter().collect();
    Ok(EvalReport {
        probes: probes.len(),
        gallery_size: gallery.len(),
        isr: isr(&labelled(e_pro, &tar_ids), gallery)?,
        isr_source: isr(&labelled(&e_src, &tar_ids), gallery)?,
        rank1_before: rank1_accuracy(&labelled(&e_src, &src_ids), gallery)?,
        rank1_after: rank1_accuracy(&labelled(e_pro, &src_ids), gallery)?,
        rank_shift: RankShiftReport {
            target_rank_source: RankStats::of(&t_src),
            target_rank_protected: RankStats::of(&t_pro),
            source_rank_protected: RankStats::of(&s_pro),
        },
        quality: QualityReport {
            psnr: psnr_sum / n,
            ssim: ssim_sum / n,
        },
        utility: UtilityReport {
            acc_source: utility_accuracy(&sources)?,
            acc_protected: utility_accuracy(&protected)?,
        },
        rebinarization,
        per_probe,
        protocol,
    })
}

/// Writes `id,identity,e0,...,e{m-1}` rows.
pub fn write_embeddings_csv<S: Scalar>(path: &Path, rows: &[GalleryEntry<S>]) -> Result<()> {
    let mut out = Vec::new();
    let dim = rows.first().map_or(0, |r| r.embedding.dim());
    let header: Vec<String> = ["id".to_string(), "identity".to_string()]
        .into_iter()
        .chain((0..dim).map(|k| format!("e{k}")))
        .collect();
    writeln!(out, "{}", header.join(",")).expect("in-memory write");
    for r in rows {
        let vals: Vec<String> = r
            .embedding
            .as_slice()
            .iter()
            .map(|v| format!("{:.17e}", v.as_f64()))
            .collect();
        writeln!(out, "{},{},{}", r.id, r.identity, vals.join(",")).expect("in-memory write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
