//! Vocabulary and bigram statistics over an unlabeled token stream.
//!
//! Construction is two-pass so corpora never have to fit in memory: pass one
//! counts unigrams ([`VocabularyBuilder::count_sentence`]), pass two counts
//! bigrams over the thresholded stream ([`BigramCounter::observe_sentence`]).
//! Both passes must see the same stream.

use std::collections::HashMap;
use std::io::Write;

use crate::{Error, Result};

/// Reserved surface for words below the frequency threshold.
pub const UNK_SYMBOL: &str = "<unk>";
/// Default sentence-boundary symbol.
pub const BOUNDARY_SYMBOL: &str = "<s>";

/// Word ids, counts, and bigram statistics of a thresholded corpus.
///
/// Ids are dense `0..len()`. Real words are ordered by descending count,
/// ties by word; the unknown symbol and the boundary symbol take the last
/// two ids. Rare words are replaced by the unknown symbol before bigram
/// counting, and every sentence is framed by the boundary symbol, so for
/// every non-boundary id the left and right bigram marginals both equal its
/// unigram count.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    bigrams: HashMap<(u32, u32), u64>,
    unigram_total: u64,
    n_sentences: u64,
    min_count: u32,
    unk_id: u32,
    boundary_id: u32,
}

impl Vocabulary {
    /// Number of ids, including the unknown and boundary symbols.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Number of retained real words (excludes the two reserved ids).
    pub fn n_words(&self) -> usize {
        self.words.len() - 2
    }

    pub fn unk_id(&self) -> u32 {
        self.unk_id
    }

    pub fn boundary_id(&self) -> u32 {
        self.boundary_id
    }

    pub fn min_count(&self) -> u32 {
        self.min_count
    }

    /// Total word tokens (boundary excluded).
    pub fn unigram_total(&self) -> u64 {
        self.unigram_total
    }

    pub fn n_sentences(&self) -> u64 {
        self.n_sentences
    }

    /// Id and count of a retained word.
    pub fn get(&self, word: &str) -> Option<(u32, u64)> {
        self.index.get(word).map(|&id| (id, self.counts[id as usize]))
    }

    /// Id of a word under the threshold mapping: retained words map to their
    /// own id, everything else to the unknown id.
    pub fn lookup_id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(self.unk_id)
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn bigrams(&self) -> &HashMap<(u32, u32), u64> {
        &self.bigrams
    }

    pub fn total_bigrams(&self) -> u64 {
        self.bigrams.values().sum()
    }

    /// Diagnostic dump: `word<TAB>count`, descending count, ties by word.
    pub fn write_tsv<W: Write>(&self, writer: &mut W) -> Result<()> {
        let mut rows: Vec<(u32, &str, u64)> = (0..self.words.len() as u32)
            .map(|id| (id, self.word(id), self.count(id)))
            .collect();
        rows.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.1.cmp(b.1)));
        for (_, word, count) in rows {
            writeln!(writer, "{word}\t{count}")?;
        }
        Ok(())
    }
}

/// Pass one: raw unigram counts.
#[derive(Debug)]
pub struct VocabularyBuilder {
    boundary: String,
    counts: HashMap<String, u64>,
    reserved_hits: u64,
    total_tokens: u64,
}

impl VocabularyBuilder {
    pub fn new(boundary_symbol: &str) -> Self {
        VocabularyBuilder {
            boundary: boundary_symbol.to_string(),
            counts: HashMap::new(),
            reserved_hits: 0,
            total_tokens: 0,
        }
    }

    pub fn count_sentence<T: AsRef<str>>(&mut self, tokens: &[T]) {
        for token in tokens {
            let token = token.as_ref();
            self.total_tokens += 1;
            // Literal occurrences of the reserved symbols fold into <unk>.
            if token == self.boundary || token == UNK_SYMBOL {
                self.reserved_hits += 1;
            } else {
                *self.counts.entry(token.to_string()).or_insert(0) += 1;
            }
        }
    }

    /// Applies the frequency threshold and assigns dense ids.
    pub fn freeze(self, min_count: u32) -> Result<BigramCounter> {
        if min_count < 1 {
            return Err(Error::data("min_count must be at least 1"));
        }
        if self.total_tokens == 0 {
            return Err(Error::data("no tokens"));
        }
        let mut retained: Vec<(String, u64)> = Vec::new();
        let mut unk_count = self.reserved_hits;
        for (word, count) in self.counts {
            if count >= u64::from(min_count) {
                retained.push((word, count));
            } else {
                unk_count += count;
            }
        }
        retained.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut words = Vec::with_capacity(retained.len() + 2);
        let mut counts = Vec::with_capacity(retained.len() + 2);
        let mut index = HashMap::with_capacity(retained.len());
        for (id, (word, count)) in retained.into_iter().enumerate() {
            index.insert(word.clone(), id as u32);
            words.push(word);
            counts.push(count);
        }
        let unk_id = words.len() as u32;
        words.push(UNK_SYMBOL.to_string());
        counts.push(unk_count);
        let boundary_id = words.len() as u32;
        words.push(self.boundary);
        counts.push(0); // becomes the sentence count in pass two

        Ok(BigramCounter {
            vocab: Vocabulary {
                words,
                counts,
                index,
                bigrams: HashMap::new(),
                unigram_total: self.total_tokens,
                n_sentences: 0,
                min_count,
                unk_id,
                boundary_id,
            },
            seen_tokens: 0,
        })
    }
}

/// Pass two: bigram counts over the thresholded stream.
#[derive(Debug)]
pub struct BigramCounter {
    vocab: Vocabulary,
    seen_tokens: u64,
}

impl BigramCounter {
    pub fn observe_sentence<T: AsRef<str>>(&mut self, tokens: &[T]) {
        if tokens.is_empty() {
            return;
        }
        self.vocab.n_sentences += 1;
        let mut prev = self.vocab.boundary_id;
        for token in tokens {
            self.seen_tokens += 1;
            let id = self.vocab.lookup_id(token.as_ref());
            *self.vocab.bigrams.entry((prev, id)).or_insert(0) += 1;
            prev = id;
        }
        *self
            .vocab
            .bigrams
            .entry((prev, self.vocab.boundary_id))
            .or_insert(0) += 1;
    }

    pub fn finish(mut self) -> Result<Vocabulary> {
        if self.seen_tokens != self.vocab.unigram_total {
            return Err(Error::data(format!(
                "bigram pass saw {} tokens but the counting pass saw {}",
                self.seen_tokens, self.vocab.unigram_total
            )));
        }
        let bid = self.vocab.boundary_id as usize;
        self.vocab.counts[bid] = self.vocab.n_sentences;
        Ok(self.vocab)
    }
}

/// Builds a vocabulary from in-memory sentences in one call.
pub fn build_vocabulary<T: AsRef<str>>(
    sentences: &[Vec<T>],
    min_count: u32,
    boundary_symbol: &str,
) -> Result<Vocabulary> {
    let mut builder = VocabularyBuilder::new(boundary_symbol);
    for sentence in sentences {
        builder.count_sentence(sentence);
    }
    let mut counter = builder.freeze(min_count)?;
    for sentence in sentences {
        counter.observe_sentence(sentence);
    }
    counter.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sents(raw: &[&str]) -> Vec<Vec<String>> {
        raw.iter()
            .map(|s| s.split_whitespace().map(str::to_string).collect())
            .collect()
    }

    #[test]
    fn hand_counted_four_token_sentence() {
        let v = build_vocabulary(&sents(&["a b a b"]), 1, BOUNDARY_SYMBOL).unwrap();
        assert_eq!(v.get("a"), Some((0, 2)));
        assert_eq!(v.get("b"), Some((1, 2)));
        let a = 0;
        let b = 1;
        let bd = v.boundary_id();
        assert_eq!(v.bigrams()[&(a, b)], 2);
        assert_eq!(v.bigrams()[&(b, a)], 1);
        assert_eq!(v.bigrams()[&(bd, a)], 1);
        assert_eq!(v.bigrams()[&(b, bd)], 1);
        assert_eq!(v.total_bigrams(), 5);
        assert_eq!(v.unigram_total(), 4);
    }

    #[test]
    fn threshold_maps_everything_to_unk() {
        let v = build_vocabulary(&sents(&["a b a b"]), 3, BOUNDARY_SYMBOL).unwrap();
        assert_eq!(v.n_words(), 0);
        assert_eq!(v.count(v.unk_id()), 4);
        assert_eq!(v.lookup_id("a"), v.unk_id());
        let u = v.unk_id();
        let bd = v.boundary_id();
        assert_eq!(v.bigrams()[&(u, u)], 3);
        assert_eq!(v.bigrams()[&(bd, u)], 1);
        assert_eq!(v.bigrams()[&(u, bd)], 1);
    }

    #[test]
    fn duplicate_sentences_double_counts() {
        let one = build_vocabulary(&sents(&["a b a b"]), 1, BOUNDARY_SYMBOL).unwrap();
        let two = build_vocabulary(&sents(&["a b a b", "a b a b"]), 1, BOUNDARY_SYMBOL).unwrap();
        for word in ["a", "b"] {
            assert_eq!(two.get(word).unwrap().1, 2 * one.get(word).unwrap().1);
        }
        for (pair, count) in one.bigrams() {
            assert_eq!(two.bigrams()[pair], 2 * count);
        }
    }

    #[test]
    fn empty_stream_is_an_error() {
        let err = build_vocabulary::<String>(&[], 1, BOUNDARY_SYMBOL).unwrap_err();
        assert!(err.to_string().contains("no tokens"));
    }

    #[test]
    fn ids_ordered_by_count_then_word() {
        let v = build_vocabulary(&sents(&["c c b b a"]), 1, BOUNDARY_SYMBOL).unwrap();
        // b and c tie at 2: b before c; a has count 1, after both.
        assert_eq!(v.word(0), "b");
        assert_eq!(v.word(1), "c");
        assert_eq!(v.word(2), "a");
    }

    #[test]
    fn marginals_match_unigram_counts() {
        let v = build_vocabulary(
            &sents(&["a b c a", "b a a", "c c b"]),
            1,
            BOUNDARY_SYMBOL,
        )
        .unwrap();
        for id in 0..v.len() as u32 {
            let left: u64 = v
                .bigrams()
                .iter()
                .filter(|((l, _), _)| *l == id)
                .map(|(_, c)| *c)
                .sum();
            let right: u64 = v
                .bigrams()
                .iter()
                .filter(|((_, r), _)| *r == id)
                .map(|(_, c)| *c)
                .sum();
            let expected = if id == v.boundary_id() {
                v.n_sentences()
            } else {
                v.count(id)
            };
            assert_eq!(left, expected, "left marginal of {}", v.word(id));
            assert_eq!(right, expected, "right marginal of {}", v.word(id));
        }
    }

    #[test]
    fn bigram_total_counts_every_transition() {
        let corpus = sents(&["a b c", "d", "e f"]);
        let v = build_vocabulary(&corpus, 1, BOUNDARY_SYMBOL).unwrap();
        let expected: u64 = corpus.iter().map(|s| s.len() as u64 + 1).sum();
        assert_eq!(v.total_bigrams(), expected);
    }

    #[test]
    fn vocabulary_additivity() {
        let part_a = sents(&["a b a", "c b"]);
        let part_b = sents(&["a c c", "b b a"]);
        let whole: Vec<Vec<String>> =
            part_a.iter().chain(part_b.iter()).cloned().collect();
        let va = build_vocabulary(&part_a, 1, BOUNDARY_SYMBOL).unwrap();
        let vb = build_vocabulary(&part_b, 1, BOUNDARY_SYMBOL).unwrap();
        let vw = build_vocabulary(&whole, 1, BOUNDARY_SYMBOL).unwrap();
        for word in ["a", "b", "c"] {
            assert_eq!(
                vw.get(word).unwrap().1,
                va.get(word).unwrap().1 + vb.get(word).unwrap().1
            );
        }
        // Bigram additivity, compared through word strings since ids differ.
        let key = |v: &Vocabulary, l: u32, r: u32| (v.word(l).to_string(), v.word(r).to_string());
        let mut sum: HashMap<(String, String), u64> = HashMap::new();
        for v in [&va, &vb] {
            for (&(l, r), &c) in v.bigrams() {
                *sum.entry(key(v, l, r)).or_insert(0) += c;
            }
        }
        let mut whole_map: HashMap<(String, String), u64> = HashMap::new();
        for (&(l, r), &c) in vw.bigrams() {
            *whole_map.entry(key(&vw, l, r)).or_insert(0) += c;
        }
        assert_eq!(sum, whole_map);
    }

    #[test]
    fn dump_is_sorted_by_count_then_word() {
        let v = build_vocabulary(&sents(&["b a b c c"]), 1, BOUNDARY_SYMBOL).unwrap();
        let mut out = Vec::new();
        v.write_tsv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "b\t2");
        assert_eq!(lines[1], "c\t2");
        // a, <s> (1 sentence) and <unk> (0) follow.
        assert!(lines.contains(&"a\t1"));
        assert!(lines.contains(&"<unk>\t0"));
    }
}
