//! K-way hard clustering of a vocabulary by greedy AMI exchange, plus the
//! cluster file format shared by the whole pipeline.

mod exchange;
mod stats;

pub use exchange::Exchange;
pub use stats::{ami, ClusterStats};

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use crate::corpus::{build_vocabulary, Vocabulary, BOUNDARY_SYMBOL};
use crate::{Error, Result, Scalar};

/// Hyperparameters of [`train_clusters`].
#[derive(Debug, Clone)]
pub struct ClusterConfig {
    pub k: u32,
    pub min_count: u32,
    pub max_passes: u32,
    /// Reserved for future sampled initializations; the current pipeline is
    /// deterministic and does not consume it.
    pub seed: u64,
    /// Adds final-3-character suffixes as pinned pseudo-contexts.
    pub suffix_context: bool,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k: 400,
            min_count: 5,
            max_passes: 20,
            seed: 1,
            suffix_context: false,
        }
    }
}

/// A total map from vocabulary words to clusters `0..K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    pub language: String,
    k: u32,
    words: Vec<String>,
    counts: Vec<u64>,
    assign: Vec<u32>,
    index: HashMap<String, u32>,
    members: Vec<BTreeSet<u32>>,
}

impl Clustering {
    /// Builds from `(word, count, cluster)` rows.
    pub fn from_entries<I>(language: &str, k: u32, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, u64, u32)>,
    {
        if k < 2 {
            return Err(Error::data("cluster count K must be at least 2"));
        }
        let mut clustering = Clustering {
            language: language.to_string(),
            k,
            words: Vec::new(),
            counts: Vec::new(),
            assign: Vec::new(),
            index: HashMap::new(),
            members: vec![BTreeSet::new(); k as usize],
        };
        for (word, count, cid) in entries {
            if cid >= k {
                return Err(Error::data(format!(
                    "cluster id {cid} out of range for K={k}"
                )));
            }
            let id = clustering.words.len() as u32;
            if clustering.index.insert(word.clone(), id).is_some() {
                return Err(Error::data(format!("duplicate word `{word}`")));
            }
            clustering.words.push(word);
            clustering.counts.push(count);
            clustering.assign.push(cid);
            clustering.members[cid as usize].insert(id);
        }
        Ok(clustering)
    }

    /// Builds from a vocabulary and a per-id assignment.
    pub fn from_vocabulary(
        language: &str,
        vocab: &Vocabulary,
        k: u32,
        assign: Vec<u32>,
    ) -> Result<Self> {
        if assign.len() != vocab.len() {
            return Err(Error::data("assignment does not cover the vocabulary"));
        }
        let entries = (0..vocab.len() as u32)
            .map(|id| (vocab.word(id).to_string(), vocab.count(id), assign[id as usize]));
        Self::from_entries(language, k, entries.collect::<Vec<_>>())
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Number of words in the clustering.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn count_of_id(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn cluster_of_id(&self, id: u32) -> u32 {
        self.assign[id as usize]
    }

    pub fn cluster_of(&self, word: &str) -> Option<u32> {
        self.index.get(word).map(|&id| self.assign[id as usize])
    }

    pub fn count_of(&self, word: &str) -> Option<u64> {
        self.index.get(word).map(|&id| self.counts[id as usize])
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Word ids of one cluster.
    pub fn members(&self, cid: u32) -> &BTreeSet<u32> {
        &self.members[cid as usize]
    }

    /// `(word, count, cluster)` rows in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64, u32)> + '_ {
        (0..self.words.len()).map(|i| (self.words[i].as_str(), self.counts[i], self.assign[i]))
    }

    /// Word-to-cluster map, e.g. for CRF cluster features.
    pub fn word_cluster_map(&self) -> HashMap<String, u32> {
        self.index
            .iter()
            .map(|(w, &id)| (w.clone(), self.assign[id as usize]))
            .collect()
    }

    /// Checks that `members` is the exact inverse of `assign` and that the
    /// clusters partition the vocabulary.
    pub fn check_partition(&self) -> Result<()> {
        let total: usize = self.members.iter().map(BTreeSet::len).sum();
        if total != self.words.len() {
            return Err(Error::data("clusters do not partition the vocabulary"));
        }
        for (cid, members) in self.members.iter().enumerate() {
            for &id in members {
                if self.assign[id as usize] != cid as u32 {
                    return Err(Error::data("members index disagrees with assignment"));
                }
            }
        }
        Ok(())
    }
}

/// Frequency-based initialization: the K−1 most frequent words become
/// singleton clusters `0..K-1` and everything else pools in cluster `K-1`.
/// Ties break by word order. Deterministic for fixed inputs; `seed` is
/// reserved.
pub fn init_clustering(vocab: &Vocabulary, k: u32, _seed: u64) -> Result<Clustering> {
    if k < 2 {
        return Err(Error::data("cluster count K must be at least 2"));
    }
    if (vocab.len() as u32) < k {
        return Err(Error::data(format!(
            "vocabulary has {} words, fewer than K={k}",
            vocab.len()
        )));
    }
    let mut ids: Vec<u32> = (0..vocab.len() as u32).collect();
    ids.sort_by(|&a, &b| {
        vocab
            .count(b)
            .cmp(&vocab.count(a))
            .then_with(|| vocab.word(a).cmp(vocab.word(b)))
    });
    let mut assign = vec![k - 1; vocab.len()];
    for (rank, &id) in ids.iter().take(k as usize - 1).enumerate() {
        assign[id as usize] = rank as u32;
    }
    Clustering::from_vocabulary("", vocab, k, assign)
}

/// One exchange pass over `clustering`. Returns the updated clustering and
/// the number of applied moves.
pub fn exchange_pass<S: Scalar>(
    clustering: &Clustering,
    vocab: &Vocabulary,
) -> Result<(Clustering, usize)> {
    let mut ex: Exchange<S> = Exchange::new(vocab, clustering, false)?;
    let moves = ex.pass();
    Ok((ex.into_clustering(), moves))
}

/// Full pipeline: vocabulary, initialization, exchange passes to a fixed
/// point or `max_passes`.
pub fn train_clusters<S: Scalar, T: AsRef<str>>(
    sentences: &[Vec<T>],
    config: &ClusterConfig,
) -> Result<Clustering> {
    let vocab = build_vocabulary(sentences, config.min_count, BOUNDARY_SYMBOL)?;
    train_clusters_from_vocab::<S>(&vocab, config)
}

/// As [`train_clusters`], over an already-built vocabulary.
pub fn train_clusters_from_vocab<S: Scalar>(
    vocab: &Vocabulary,
    config: &ClusterConfig,
) -> Result<Clustering> {
    let init = init_clustering(vocab, config.k, config.seed)?;
    if config.max_passes == 0 {
        return Ok(init);
    }
    let mut ex: Exchange<S> = Exchange::new(vocab, &init, config.suffix_context)?;
    ex.run(config.max_passes);
    Ok(ex.into_clustering())
}

/// Writes the cluster file: `#K=<int>` header, then
/// `cluster_id<TAB>word<TAB>count` rows ordered by cluster id, then count
/// descending, then word.
pub fn write_clusters<W: Write>(clustering: &Clustering, writer: &mut W) -> Result<()> {
    writeln!(writer, "#K={}", clustering.k())?;
    let mut rows: Vec<(u32, &str, u64)> = clustering
        .iter()
        .map(|(word, count, cid)| (cid, word, count))
        .collect();
    rows.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| b.2.cmp(&a.2))
            .then_with(|| a.1.cmp(b.1))
    });
    for (cid, word, count) in rows {
        writeln!(writer, "{cid}\t{word}\t{count}")?;
    }
    Ok(())
}

/// Reads a cluster file. Rows may be in any order; duplicate words and
/// cluster ids at or above the header K are rejected. The language tag is
/// left empty; callers set it from context.
pub fn read_clusters<R: BufRead>(reader: R) -> Result<Clustering> {
    let mut lines = reader.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::data("empty cluster file"))?;
    let first = first?;
    let k: u32 = first
        .strip_prefix("#K=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("expected `#K=<int>` header, found `{first}`"),
        })?;
    let mut entries = Vec::new();
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let parse_err = |msg: String| Error::Parse { line: lineno, msg };
        let cid: u32 = fields
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err("bad cluster id".into()))?;
        let word = fields
            .next()
            .filter(|w| !w.is_empty())
            .ok_or_else(|| parse_err("missing word".into()))?;
        let count: u64 = fields
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err("bad count".into()))?;
        entries.push((word.to_string(), count, cid));
    }
    Clustering::from_entries("", k, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocabulary;
    use std::io::Cursor;

    fn sents(raw: &[&str]) -> Vec<Vec<String>> {
        raw.iter()
            .map(|s| s.split_whitespace().map(str::to_string).collect())
            .collect()
    }

    fn vocab_abc() -> Vocabulary {
        // a:5, b:3, c:1 plus <unk> (0) and <s> (3 sentences).
        build_vocabulary(&sents(&["a a a b b", "a a b c", "a"]), 1, BOUNDARY_SYMBOL).unwrap()
    }

    #[test]
    fn init_puts_top_frequencies_in_singletons() {
        let vocab = vocab_abc();
        let clustering = init_clustering(&vocab, 2, 1).unwrap();
        // a has the highest count and becomes the singleton cluster 0.
        assert_eq!(clustering.cluster_of("a"), Some(0));
        assert_eq!(clustering.cluster_of("b"), Some(1));
        assert_eq!(clustering.cluster_of("c"), Some(1));
        assert_eq!(clustering.members(0).len(), 1);
        clustering.check_partition().unwrap();
    }

    #[test]
    fn init_with_k_equal_vocab_gives_singletons() {
        let vocab = vocab_abc();
        let k = vocab.len() as u32;
        let clustering = init_clustering(&vocab, k, 1).unwrap();
        for cid in 0..k {
            assert_eq!(clustering.members(cid).len(), 1);
        }
    }

    #[test]
    fn init_breaks_frequency_ties_by_word_order() {
        // b and c tie at 2; b is lexicographically first and wins the
        // singleton when only one slot exists beyond the top word.
        let vocab =
            build_vocabulary(&sents(&["a a a b b c c"]), 1, BOUNDARY_SYMBOL).unwrap();
        let clustering = init_clustering(&vocab, 3, 1).unwrap();
        assert_eq!(clustering.cluster_of("a"), Some(0));
        assert_eq!(clustering.cluster_of("b"), Some(1));
        assert_eq!(clustering.cluster_of("c"), Some(2));
    }

    #[test]
    fn init_rejects_small_vocabulary() {
        let vocab = vocab_abc();
        assert!(init_clustering(&vocab, vocab.len() as u32 + 1, 1).is_err());
    }

    #[test]
    fn max_passes_zero_returns_initialization() {
        let vocab = vocab_abc();
        let config = ClusterConfig {
            k: 2,
            min_count: 1,
            max_passes: 0,
            ..ClusterConfig::default()
        };
        let trained = train_clusters_from_vocab::<f64>(&vocab, &config).unwrap();
        let init = init_clustering(&vocab, 2, 1).unwrap();
        for (word, _, _) in trained.iter() {
            assert_eq!(trained.cluster_of(word), init.cluster_of(word));
        }
    }

    #[test]
    fn cluster_file_round_trip() {
        let vocab = vocab_abc();
        let config = ClusterConfig {
            k: 2,
            min_count: 1,
            max_passes: 5,
            ..ClusterConfig::default()
        };
        let clustering = train_clusters_from_vocab::<f64>(&vocab, &config).unwrap();
        let mut buf = Vec::new();
        write_clusters(&clustering, &mut buf).unwrap();
        let reread = read_clusters(Cursor::new(&buf)).unwrap();
        assert_eq!(reread.k(), clustering.k());
        assert_eq!(reread.len(), clustering.len());
        for (word, count, cid) in clustering.iter() {
            assert_eq!(reread.cluster_of(word), Some(cid));
            assert_eq!(reread.count_of(word), Some(count));
        }
        // Canonical order: a second write is byte-identical.
        let mut again = Vec::new();
        write_clusters(&reread, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn duplicate_word_is_rejected_by_name() {
        let file = "#K=2\n0\tfoo\t3\n1\tfoo\t2\n";
        let err = read_clusters(Cursor::new(file)).unwrap_err();
        assert!(err.to_string().contains("foo"));
    }

    #[test]
    fn cluster_id_beyond_header_k_is_rejected() {
        let file = "#K=2\n2\tfoo\t3\n";
        assert!(read_clusters(Cursor::new(file)).is_err());
    }

    #[test]
    fn four_hundred_cluster_file_accepted() {
        let mut file = String::from("#K=400\n");
        for cid in 0..400 {
            file.push_str(&format!("{cid}\tw{cid}\t{}\n", 400 - cid));
        }
        let clustering = read_clusters(Cursor::new(file)).unwrap();
        assert_eq!(clustering.k(), 400);
        assert_eq!(clustering.len(), 400);
        assert_eq!(clustering.cluster_of("w399"), Some(399));
    }
}
