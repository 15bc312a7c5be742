//! Per-position feature extraction.
//!
//! Every feature string is namespaced and tagged with the position offset it
//! came from, e.g. `W:Obama@0`, `SH:Xxxxx@0`, `CL:de:217@-1`. Cluster
//! features carry one namespace per clustering source; words missing from a
//! clustering emit `CL:<src>:NOCLUSTER@<offset>`.

use std::collections::HashSet;

use super::{ClusterMaps, FeatureConfig};
use crate::corpus::Sentence;
use crate::{Error, Result};

/// Placeholder surfaces for context positions beyond the sentence.
const BOS: &str = "<BOS>";
const EOS: &str = "<EOS>";

/// Word shape: uppercase to `X`, lowercase to `x`, digits to `d`, everything
/// else verbatim; runs longer than four collapse to four plus `*`.
pub fn word_shape(word: &str) -> String {
    let mut shape = String::new();
    let mut run_char = '\0';
    let mut run_len = 0usize;
    for ch in word.chars() {
        let mapped = if ch.is_uppercase() {
            'X'
        } else if ch.is_lowercase() {
            'x'
        } else if ch.is_numeric() {
            'd'
        } else {
            ch
        };
        if mapped == run_char {
            run_len += 1;
        } else {
            run_char = mapped;
            run_len = 1;
        }
        match run_len {
            1..=4 => shape.push(mapped),
            5 => shape.push('*'),
            _ => {}
        }
    }
    shape
}

fn surface_at(sentence: &Sentence, pos: isize) -> &str {
    if pos < 0 {
        BOS
    } else if pos as usize >= sentence.len() {
        EOS
    } else {
        &sentence.tokens[pos as usize].surface
    }
}

/// Extracts the duplicate-free, deterministically ordered feature set for
/// one position.
pub fn extract_features(
    sentence: &Sentence,
    position: usize,
    config: &FeatureConfig,
    clusterings: &ClusterMaps,
) -> Result<Vec<String>> {
    if position >= sentence.len() {
        return Err(Error::data(format!(
            "position {position} out of range for a {}-token sentence",
            sentence.len()
        )));
    }
    for source in &config.cluster_sources {
        if !clusterings.contains_key(source) {
            return Err(Error::data(format!("unknown clustering `{source}`")));
        }
    }

    let pos = position as isize;
    let mut feats: Vec<String> = Vec::new();

    let radius = config.context_window as isize;
    for d in -radius..=radius {
        feats.push(format!("W:{}@{d}", surface_at(sentence, pos + d)));
    }

    let token = &sentence.tokens[position];
    if config.use_shape {
        feats.push(format!("SH:{}@0", word_shape(&token.surface)));
    }

    if config.use_prefix_suffix {
        let chars: Vec<char> = token.surface.chars().collect();
        for len in 1..=3usize {
            if chars.len() >= len {
                let prefix: String = chars[..len].iter().collect();
                let suffix: String = chars[chars.len() - len..].iter().collect();
                feats.push(format!("P{len}:{prefix}@0"));
                feats.push(format!("S{len}:{suffix}@0"));
            }
        }
    }

    if config.use_pos {
        for d in -radius..=radius {
            let i = pos + d;
            if i >= 0 && (i as usize) < sentence.len() {
                if let Some(tag) = &sentence.tokens[i as usize].pos {
                    feats.push(format!("POS:{tag}@{d}"));
                }
            }
        }
    }

    if config.use_lemma {
        for d in -radius..=radius {
            let i = pos + d;
            if i >= 0 && (i as usize) < sentence.len() {
                if let Some(lemma) = &sentence.tokens[i as usize].lemma {
                    feats.push(format!("LEM:{lemma}@{d}"));
                }
            }
        }
    }

    if config.use_bigrams {
        for d in [-1isize, 0] {
            let left = surface_at(sentence, pos + d);
            let right = surface_at(sentence, pos + d + 1);
            feats.push(format!("BG:{left}|{right}@{d}"));
        }
    }

    let cluster_radius = config.cluster_window as isize;
    for source in &config.cluster_sources {
        let map = &clusterings[source];
        for d in -cluster_radius..=cluster_radius {
            let i = pos + d;
            if i >= 0 && (i as usize) < sentence.len() {
                let word = &sentence.tokens[i as usize].surface;
                match map.get(word) {
                    Some(cid) => feats.push(format!("CL:{source}:{cid}@{d}")),
                    None => feats.push(format!("CL:{source}:NOCLUSTER@{d}")),
                }
            }
        }
    }

    let mut seen = HashSet::with_capacity(feats.len());
    feats.retain(|f| seen.insert(f.clone()));
    Ok(feats)
}
