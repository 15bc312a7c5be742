//! Combining a target-language clustering with clusterings of other
//! languages: target words keep their clusters, and a secondary-language
//! word is imported only when it is absent from the target, joining the
//! target cluster sharing the most word types with its home cluster.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use crate::clustering::Clustering;
use crate::{Error, Result};

/// Where an imported word came from and where it went.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportRecord {
    pub source_language: String,
    pub source_cluster: u32,
    pub target_cluster: u32,
    pub overlap: u64,
}

/// Why a candidate word was not imported.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    /// Its source cluster shares no word with any target cluster.
    NoOverlap { source_language: String },
    /// An earlier source already imported it.
    AlreadyImported { source_language: String },
}

/// Outcome of [`merge_clusterings`].
#[derive(Debug, Clone, Default)]
pub struct MergeReport {
    pub imported: BTreeMap<String, ImportRecord>,
    pub skipped: BTreeMap<String, SkipReason>,
    pub per_source_counts: BTreeMap<String, u64>,
}

impl MergeReport {
    /// TSV rows `word<TAB>source_lang<TAB>source_cid<TAB>target_cid<TAB>overlap`,
    /// sorted by word.
    pub fn write_tsv<W: Write>(&self, writer: &mut W) -> Result<()> {
        for (word, rec) in &self.imported {
            writeln!(
                writer,
                "{word}\t{}\t{}\t{}\t{}",
                rec.source_language, rec.source_cluster, rec.target_cluster, rec.overlap
            )?;
        }
        Ok(())
    }
}

/// Overlap (in word types) between a source cluster and each target cluster,
/// as the index target-cluster-id -> count.
fn overlap_by_target(
    source: &Clustering,
    source_cid: u32,
    target: &Clustering,
) -> HashMap<u32, u64> {
    let mut overlap: HashMap<u32, u64> = HashMap::new();
    for &member in source.members(source_cid) {
        if let Some(tc) = target.cluster_of(source.word(member)) {
            *overlap.entry(tc).or_insert(0) += 1;
        }
    }
    overlap
}

fn argmax_overlap(overlap: &HashMap<u32, u64>) -> Option<(u32, u64)> {
    let mut best: Option<(u32, u64)> = None;
    let mut cids: Vec<u32> = overlap.keys().copied().collect();
    cids.sort_unstable();
    for cid in cids {
        let count = overlap[&cid];
        if count > 0 && best.map_or(true, |(_, b)| count > b) {
            best = Some((cid, count));
        }
    }
    best
}

/// Target cluster sharing the most word types with `word`'s source cluster,
/// together with the overlap count. `None` when no target cluster shares any
/// word; ties go to the lowest target cluster id.
pub fn best_target_cluster(
    word: &str,
    source: &Clustering,
    target: &Clustering,
) -> Result<Option<(u32, u64)>> {
    let source_cid = source
        .cluster_of(word)
        .ok_or_else(|| Error::data(format!("word `{word}` is not in the source clustering")))?;
    Ok(argmax_overlap(&overlap_by_target(source, source_cid, target)))
}

/// Merges `sources`, in order, into `target`.
///
/// Every target word keeps its cluster. A source word is imported iff it is
/// absent from the target vocabulary, was not imported by an earlier source,
/// and its source cluster overlaps some target cluster. Overlaps are always
/// computed against the original target members, so imports never shift
/// later assignments. K is unchanged.
pub fn merge_clusterings(
    target: &Clustering,
    sources: &[&Clustering],
) -> Result<(Clustering, MergeReport)> {
    let mut report = MergeReport::default();
    let mut entries: Vec<(String, u64, u32)> = target
        .iter()
        .map(|(word, count, cid)| (word.to_string(), count, cid))
        .collect();
    // word -> source language of its first import
    let mut captured: HashMap<String, String> = HashMap::new();

    for (source_idx, source) in sources.iter().enumerate() {
        let language = if source.language.is_empty() {
            format!("source{}", source_idx + 1)
        } else {
            source.language.clone()
        };
        report.per_source_counts.entry(language.clone()).or_insert(0);
        let mut best_by_cluster: HashMap<u32, Option<(u32, u64)>> = HashMap::new();
        let mut imports: Vec<(String, u64, u32)> = Vec::new();

        for (word, count, source_cid) in source.iter() {
            if target.contains(word) {
                continue; // rule 1: the target language stays intact
            }
            if let Some(first) = captured.get(word) {
                report.skipped.insert(
                    word.to_string(),
                    SkipReason::AlreadyImported {
                        source_language: first.clone(),
                    },
                );
                continue;
            }
            let best = *best_by_cluster
                .entry(source_cid)
                .or_insert_with(|| argmax_overlap(&overlap_by_target(source, source_cid, target)));
            match best {
                None => {
                    report.skipped.insert(
                        word.to_string(),
                        SkipReason::NoOverlap {
                            source_language: language.clone(),
                        },
                    );
                }
                Some((target_cid, overlap)) => {
                    captured.insert(word.to_string(), language.clone());
                    report.imported.insert(
                        word.to_string(),
                        ImportRecord {
                            source_language: language.clone(),
                            source_cluster: source_cid,
                            target_cluster: target_cid,
                            overlap,
                        },
                    );
                    *report.per_source_counts.get_mut(&language).unwrap() += 1;
                    imports.push((word.to_string(), count, target_cid));
                }
            }
        }
        imports.sort_by(|a, b| a.0.cmp(&b.0));
        entries.extend(imports);
    }

    let merged = Clustering::from_entries(&target.language, target.k(), entries)?;
    Ok((merged, report))
}
