use std::cmp::Ordering;
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::models::{Embedding, MomentEmbedder};
use crate::objective::cosine;
use crate::scalar::Scalar;
use crate::silhouette::SilhouetteSequence;

#[derive(Clone, Debug)]
pub struct GalleryEntry<S: Scalar = f64> {
    pub id: String,
    pub identity: String,
    pub embedding: Embedding<S>,
}

/// Enrolled sequences under the evaluation embedder.
#[derive(Clone, Debug)]
pub struct Gallery<S: Scalar = f64> {
    entries: Vec<GalleryEntry<S>>,
}

impl<S: Scalar> Gallery<S> {
    pub fn new(entries: Vec<GalleryEntry<S>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate gallery id {}", e.id)));
            }
            if (e.embedding.norm().as_f64() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "gallery embedding {} is not unit-norm",
                    e.id
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Embeds `(id, sequence)` pairs; identities come from sequence tags.
    pub fn enroll(items: &[(String, &SilhouetteSequence<S>)], embedder: &MomentEmbedder<S>) -> Result<Self> {
        let entries = items
            .iter()
            .map(|(id, seq)| {
                let identity = seq
                    .meta
                    .identity
                    .clone()
                    .ok_or_else(|| Error::InvalidInput(format!("gallery sequence {id} has no identity tag")))?;
                Ok(GalleryEntry {
                    id: id.clone(),
                    identity,
                    embedding: embedder.embed(seq)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn entries(&self) -> &[GalleryEntry<S>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn with_entries(&self, extra: impl IntoIterator<Item = GalleryEntry<S>>) -> Result<Self> {
        Self::new(self.entries.iter().cloned().chain(extra).collect())
    }

    /// Entry indices by descending cosine, ties by ascending id.
    pub fn ranking(&self, query: &Embedding<S>) -> Vec<usize> {
        let sims: Vec<S> = self.entries.iter().map(|e| cosine(query, &e.embedding)).collect();
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_by(|&a, &b| {
            sims[b]
                .partial_cmp(&sims[a])
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.entries[a].id.cmp(&self.entries[b].id))
        });
        order
    }

    /// Best match; `None` for an empty gallery.
    pub fn top1(&self, query: &Embedding<S>) -> Option<&GalleryEntry<S>> {
        self.ranking(query).first().map(|&i| &self.entries[i])
    }

    /// 1-based position of `key` in [`Gallery::ranking`].
    pub fn rank_of(&self, query: &Embedding<S>, key: &str) -> Result<usize> {
        if !self.entries.iter().any(|e| e.id == key) {
            return Err(Error::NotFound(format!("gallery id {key}")));
        }
        let order = self.ranking(query);
        Ok(order.iter().position(|&i| self.entries[i].id == key).expect("present") + 1)
    }
}

fn hit_rate<S: Scalar>(probes: &[(Embedding<S>, String)], gallery: &Gallery<S>) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::InvalidInput("empty probe set".into()));
    }
    let mut hits = 0usize;
    for (e, wanted) in probes {
        if gallery.top1(e).is_some_and(|m| &m.identity == wanted) {
            hits += 1;
        }
    }
    Ok(hits as f64 / probes.len() as f64)
}

/// Impersonation success rate: share of probes whose best match carries
/// the designated target identity.
pub fn isr<S: Scalar>(probes: &[(Embedding<S>, String)], gallery: &Gallery<S>) -> Result<f64> {
    hit_rate(probes, gallery)
}

/// Share of probes whose best match carries the probe's true identity.
pub fn rank1_accuracy<S: Scalar>(probes: &[(Embedding<S>, String)], gallery: &Gallery<S>) -> Result<f64> {
    hit_rate(probes, gallery)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn entry(id: &str, identity: &str, v: Vec<f64>) -> GalleryEntry {
        GalleryEntry {
            id: id.into(),
            identity: identity.into(),
            embedding: Embedding::from_unit(v),
        }
    }

    fn basis(i: usize, n: usize) -> Vec<f64> {
        (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn rank_of_simple_cases() {
        let g = Gallery::new(vec![
            entry("a", "x", basis(0, 3)),
            entry("b", "y", basis(1, 3)),
            entry("c", "z", basis(2, 3)),
        ])
        .unwrap();
        let q = Embedding::from_unit(basis(1, 3));
        assert_eq!(g.rank_of(&q, "b").unwrap(), 1);
        assert!(g.rank_of(&q, "a").unwrap() > 1);
        assert!(matches!(g.rank_of(&q, "nope"), Err(Error::NotFound(_))));
    }

    #[test]
    fn ties_break_by_id_not_position() {
        let g = Gallery::new(vec![entry("b", "y", basis(0, 2)), entry("a", "x", basis(0, 2))]).unwrap();
        let q = Embedding::from_unit(basis(0, 2));
        assert_eq!(g.top1(&q).unwrap().id, "a");
        assert_eq!(g.rank_of(&q, "b").unwrap(), 2);
    }

    #[test]
    fn ranks_form_a_permutation() {
        let mut rng = SplitMix64::new(3);
        let g = Gallery::new(
            (0..12)
                .map(|i| {
                    let e = Embedding::from_raw((0..4).map(|_| rng.symmetric(1.0)).collect());
                    GalleryEntry {
                        id: format!("s{i:02}"),
                        identity: format!("id{}", i % 3),
                        embedding: e,
                    }
                })
                .collect(),
        )
        .unwrap();
        let q = Embedding::from_raw(vec![0.3, -0.2, 0.9, 0.1]);
        let mut ranks: Vec<usize> = g.entries().iter().map(|e| g.rank_of(&q, &e.id).unwrap()).collect();
        ranks.sort();
        assert_eq!(ranks, (1..=12).collect::<Vec<_>>());
    }

    #[test]
    fn isr_extremes_and_tally() {
        let g = Gallery::new(vec![entry("a", "x", basis(0, 2)), entry("b", "y", basis(1, 2))]).unwrap();
        let px = Embedding::from_unit(basis(0, 2));
        let py = Embedding::from_unit(basis(1, 2));
        assert_eq!(isr(&[(px.clone(), "x".into())], &g).unwrap(), 1.0);
        assert_eq!(isr(&[(px.clone(), "y".into())], &g).unwrap(), 0.0);
        // Ten probes, hand count: hits at 0, 1, 4, 7 -> 0.4.
        let probes: Vec<(Embedding, String)> = (0..10)
            .map(|i| {
                let hit = [0, 1, 4, 7].contains(&i);
                let e = if i % 2 == 0 { px.clone() } else { py.clone() };
                let matched = if i % 2 == 0 { "x" } else { "y" };
                let other = if i % 2 == 0 { "y" } else { "x" };
                (e, if hit { matched } else { other }.to_string())
            })
            .collect();
        assert!((isr(&probes, &g).unwrap() - 0.4).abs() < 1e-15);
        assert!(isr(&[], &g).is_err());
    }

    #[test]
    fn single_identity_gallery() {
        let g = Gallery::new(vec![entry("a", "x", basis(0, 2)), entry("b", "x", basis(1, 2))]).unwrap();
        let probes = vec![(Embedding::from_raw(vec![0.3, -0.7]), "x".to_string())];
        assert_eq!(rank1_accuracy(&probes, &g).unwrap(), 1.0);
    }

    #[test]
    fn rejects_duplicates_and_non_unit() {
        assert!(Gallery::new(vec![entry("a", "x", basis(0, 2)), entry("a", "y", basis(1, 2))]).is_err());
        assert!(Gallery::new(vec![entry("a", "x", vec![2.0, 0.0])]).is_err());
    }
}
