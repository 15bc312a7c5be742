//! Greedy exchange clustering: single-word moves that increase the AMI of
//! adjacent class labels, applied until a fixed point.

use std::marker::PhantomData;

use super::stats::xlog2x;
use super::{ClusterStats, Clustering};
use crate::corpus::Vocabulary;
use crate::{Error, Result, Scalar};

/// Gains at or below this (in bits of AMI) do not count as improvements, so
/// float noise cannot produce move cycles.
const MIN_GAIN: f64 = 1e-10;

/// Incremental exchange state over a fixed vocabulary.
///
/// Words are visited in descending frequency order (ties by word); for each
/// word the AMI delta of moving it to every other cluster is computed from
/// the running [`ClusterStats`], and the best strictly positive move is
/// applied. Suffix contexts, when enabled, add one pinned pseudo-class per
/// distinct final-3-character suffix; pseudo-classes receive context counts
/// but never exchange members.
pub struct Exchange<'v, S> {
    vocab: &'v Vocabulary,
    k: u32,
    n_classes: u32,
    assign: Vec<u32>,
    stats: ClusterStats,
    left_adj: Vec<Vec<(u32, u64)>>,
    right_adj: Vec<Vec<(u32, u64)>>,
    self_count: Vec<u64>,
    visit_order: Vec<u32>,
    language: String,
    // per-word scratch, reused across visits
    lw: Vec<u64>,
    rw: Vec<u64>,
    _scalar: PhantomData<S>,
}

impl<'v, S: Scalar> Exchange<'v, S> {
    /// Builds exchange state for `clustering`, which must assign a cluster to
    /// every word of `vocab`.
    pub fn new(
        vocab: &'v Vocabulary,
        clustering: &Clustering,
        suffix_context: bool,
    ) -> Result<Self> {
        let n_ids = vocab.len();
        let k = clustering.k();

        let mut assign = Vec::with_capacity(n_ids);
        for id in 0..n_ids as u32 {
            let word = vocab.word(id);
            let cid = clustering.cluster_of(word).ok_or_else(|| {
                Error::data(format!("word `{word}` has no cluster assignment"))
            })?;
            assign.push(cid);
        }

        let mut left_adj = vec![Vec::new(); n_ids];
        let mut right_adj = vec![Vec::new(); n_ids];
        let mut self_count = vec![0u64; n_ids];
        let mut pairs: Vec<(&(u32, u32), &u64)> = vocab.bigrams().iter().collect();
        pairs.sort_by_key(|(&pair, _)| pair);
        for (&(l, r), &c) in pairs {
            if l == r {
                self_count[l as usize] += c;
            } else {
                right_adj[l as usize].push((r, c));
                left_adj[r as usize].push((l, c));
            }
        }
        for adj in left_adj.iter_mut().chain(right_adj.iter_mut()) {
            adj.sort_by_key(|&(id, _)| id);
        }

        let mut n_classes = k;
        if suffix_context {
            // Pinned pseudo-classes: the final three characters of each real
            // word act as an extra right-hand context.
            let mut suffixes: Vec<String> = (0..vocab.n_words() as u32)
                .map(|id| word_suffix(vocab.word(id)))
                .collect();
            suffixes.sort();
            suffixes.dedup();
            let suffix_index = |s: &str| {
                suffixes.binary_search_by(|probe| probe.as_str().cmp(s)).unwrap() as u32
            };
            n_classes = k + suffixes.len() as u32;
            for id in 0..vocab.n_words() as u32 {
                let count = vocab.count(id);
                if count > 0 {
                    let pseudo = n_ids as u32 + suffix_index(&word_suffix(vocab.word(id)));
                    right_adj[id as usize].push((pseudo, count));
                }
            }
        }

        let mut visit_order: Vec<u32> = (0..n_ids as u32).collect();
        visit_order.sort_by(|&a, &b| {
            vocab
                .count(b)
                .cmp(&vocab.count(a))
                .then_with(|| vocab.word(a).cmp(vocab.word(b)))
        });

        let mut state = Exchange {
            vocab,
            k,
            n_classes,
            assign,
            stats: ClusterStats::from_bigrams(n_classes, []),
            left_adj,
            right_adj,
            self_count,
            visit_order,
            language: clustering.language.clone(),
            lw: vec![0; n_classes as usize],
            rw: vec![0; n_classes as usize],
            _scalar: PhantomData,
        };
        state.stats = state.recount_stats();
        Ok(state)
    }

    /// Class of a (possibly pseudo) context id.
    #[inline]
    fn class_of(&self, id: u32) -> u32 {
        let n_ids = self.vocab.len() as u32;
        if id < n_ids {
            self.assign[id as usize]
        } else {
            self.k + (id - n_ids)
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn stats(&self) -> &ClusterStats {
        &self.stats
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assign
    }

    /// Current AMI in bits.
    pub fn ami(&self) -> S {
        let n = S::from_count(self.stats.total_bigrams());
        self.stats.objective_f::<S>() / n + n.log2()
    }

    /// Rebuilds the class-bigram table from the current assignment.
    pub fn recount_stats(&self) -> ClusterStats {
        let mut pairs: Vec<((u32, u32), u64)> = Vec::new();
        let mut sorted: Vec<(&(u32, u32), &u64)> = self.vocab.bigrams().iter().collect();
        sorted.sort_by_key(|(&pair, _)| pair);
        for (&(l, r), &c) in sorted {
            pairs.push(((self.class_of(l), self.class_of(r)), c));
        }
        // Pseudo-context counts live only in the adjacency lists.
        for (id, adj) in self.right_adj.iter().enumerate() {
            for &(nb, c) in adj {
                if nb >= self.vocab.len() as u32 {
                    pairs.push(((self.assign[id], self.class_of(nb)), c));
                }
            }
        }
        ClusterStats::from_bigrams(self.n_classes, pairs)
    }

    /// Exact-equality audit of the incrementally maintained statistics.
    pub fn audit_recount(&self) -> Result<()> {
        if self.recount_stats() == self.stats {
            Ok(())
        } else {
            Err(Error::data(
                "incremental cluster statistics diverged from a from-scratch recount",
            ))
        }
    }

    /// AMI delta (in bits) of moving `word_id` to `target`, without applying.
    pub fn probe_move_delta(&mut self, word_id: u32, target: u32) -> S {
        let a = self.assign[word_id as usize];
        if a == target || target >= self.k {
            return S::zero();
        }
        let (lw, rw, tl, tr, s, in_w, out_w) = self.gather(word_id);
        let dr = self.removal_delta(a, &lw, &rw, &tl, &tr, s, in_w, out_w);
        let di = self.insertion_delta(a, target, &lw, &rw, &tl, &tr, s, in_w, out_w);
        self.restore_scratch(lw, rw, &tl, &tr);
        (dr + di) / S::from_count(self.stats.total_bigrams())
    }

    /// One full pass over the vocabulary. Returns the number of applied moves.
    pub fn pass(&mut self) -> usize {
        let mut moves = 0;
        let order = self.visit_order.clone();
        let min_gain = S::from_f64(MIN_GAIN).unwrap();
        let total = S::from_count(self.stats.total_bigrams());
        for &w in &order {
            let a = self.assign[w as usize];
            let (lw, rw, tl, tr, s, in_w, out_w) = self.gather(w);
            if in_w == 0 && out_w == 0 {
                self.restore_scratch(lw, rw, &tl, &tr);
                continue;
            }
            let dr = self.removal_delta(a, &lw, &rw, &tl, &tr, s, in_w, out_w);
            let mut best: Option<(S, u32)> = None;
            for b in 0..self.k {
                if b == a {
                    continue;
                }
                let delta = dr + self.insertion_delta(a, b, &lw, &rw, &tl, &tr, s, in_w, out_w);
                if best.map_or(true, |(bd, _)| delta > bd) {
                    best = Some((delta, b));
                }
            }
            if let Some((delta, b)) = best {
                if delta / total > min_gain {
                    self.apply_move(w, a, b, &lw, &rw, &tl, &tr, s, in_w, out_w);
                    moves += 1;
                }
            }
            self.restore_scratch(lw, rw, &tl, &tr);
        }
        moves
    }

    /// Runs passes until a fixed point or `max_passes`. Returns passes run.
    pub fn run(&mut self, max_passes: u32) -> u32 {
        for pass_no in 0..max_passes {
            if self.pass() == 0 {
                return pass_no + 1;
            }
        }
        max_passes
    }

    /// Final clustering over the vocabulary.
    pub fn into_clustering(self) -> Clustering {
        Clustering::from_vocabulary(&self.language, self.vocab, self.k, self.assign)
            .expect("assignment is total and in range")
    }

    /// Aggregates `word_id`'s contexts by class into the scratch buffers.
    #[allow(clippy::type_complexity)]
    fn gather(&mut self, word_id: u32) -> (Vec<u64>, Vec<u64>, Vec<u32>, Vec<u32>, u64, u64, u64) {
        let mut lw = std::mem::take(&mut self.lw);
        let mut rw = std::mem::take(&mut self.rw);
        let mut tl = Vec::new();
        let mut tr = Vec::new();
        for &(x, c) in &self.left_adj[word_id as usize] {
            let cx = self.class_of(x);
            if lw[cx as usize] == 0 {
                tl.push(cx);
            }
            lw[cx as usize] += c;
        }
        for &(y, c) in &self.right_adj[word_id as usize] {
            let cy = self.class_of(y);
            if rw[cy as usize] == 0 {
                tr.push(cy);
            }
            rw[cy as usize] += c;
        }
        let s = self.self_count[word_id as usize];
        let in_w = tl.iter().map(|&c| lw[c as usize]).sum::<u64>() + s;
        let out_w = tr.iter().map(|&c| rw[c as usize]).sum::<u64>() + s;
        (lw, rw, tl, tr, s, in_w, out_w)
    }

    fn restore_scratch(&mut self, mut lw: Vec<u64>, mut rw: Vec<u64>, tl: &[u32], tr: &[u32]) {
        for &c in tl {
            lw[c as usize] = 0;
        }
        for &c in tr {
            rw[c as usize] = 0;
        }
        self.lw = lw;
        self.rw = rw;
    }

    /// Objective-F delta of removing the word from class `a`.
    #[allow(clippy::too_many_arguments)]
    fn removal_delta(
        &self,
        a: u32,
        lw: &[u64],
        rw: &[u64],
        tl: &[u32],
        tr: &[u32],
        s: u64,
        in_w: u64,
        out_w: u64,
    ) -> S {
        let mut d = S::zero();
        for &c in tl {
            if c != a {
                let n = self.stats.count(c, a);
                d = d + xlog2x::<S>(n - lw[c as usize]) - xlog2x::<S>(n);
            }
        }
        for &c in tr {
            if c != a {
                let n = self.stats.count(a, c);
                d = d + xlog2x::<S>(n - rw[c as usize]) - xlog2x::<S>(n);
            }
        }
        let naa = self.stats.count(a, a);
        let corner = lw[a as usize] + rw[a as usize] + s;
        d = d + xlog2x::<S>(naa - corner) - xlog2x::<S>(naa);
        let la = self.stats.left_marginal(a);
        d = d - (xlog2x::<S>(la - out_w) - xlog2x::<S>(la));
        let ra = self.stats.right_marginal(a);
        d = d - (xlog2x::<S>(ra - in_w) - xlog2x::<S>(ra));
        d
    }

    /// Objective-F delta of inserting the word into class `b`, assuming it
    /// was already removed from class `a`.
    #[allow(clippy::too_many_arguments)]
    fn insertion_delta(
        &self,
        a: u32,
        b: u32,
        lw: &[u64],
        rw: &[u64],
        tl: &[u32],
        tr: &[u32],
        s: u64,
        in_w: u64,
        out_w: u64,
    ) -> S {
        let mut d = S::zero();
        for &c in tl {
            if c != b {
                let mut base = self.stats.count(c, b);
                if c == a {
                    base -= rw[b as usize];
                }
                d = d + xlog2x::<S>(base + lw[c as usize]) - xlog2x::<S>(base);
            }
        }
        for &c in tr {
            if c != b {
                let mut base = self.stats.count(b, c);
                if c == a {
                    base -= lw[b as usize];
                }
                d = d + xlog2x::<S>(base + rw[c as usize]) - xlog2x::<S>(base);
            }
        }
        let nbb = self.stats.count(b, b);
        let corner = lw[b as usize] + rw[b as usize] + s;
        d = d + xlog2x::<S>(nbb + corner) - xlog2x::<S>(nbb);
        let lb = self.stats.left_marginal(b);
        d = d - (xlog2x::<S>(lb + out_w) - xlog2x::<S>(lb));
        let rb = self.stats.right_marginal(b);
        d = d - (xlog2x::<S>(rb + in_w) - xlog2x::<S>(rb));
        d
    }

    #[allow(clippy::too_many_arguments)]
    fn apply_move(
        &mut self,
        w: u32,
        a: u32,
        b: u32,
        lw: &[u64],
        rw: &[u64],
        tl: &[u32],
        tr: &[u32],
        s: u64,
        in_w: u64,
        out_w: u64,
    ) {
        for &c in tl {
            *self.stats.count_mut(c, a) -= lw[c as usize];
            *self.stats.count_mut(c, b) += lw[c as usize];
        }
        for &c in tr {
            *self.stats.count_mut(a, c) -= rw[c as usize];
            *self.stats.count_mut(b, c) += rw[c as usize];
        }
        *self.stats.count_mut(a, a) -= s;
        *self.stats.count_mut(b, b) += s;
        *self.stats.left_marginal_mut(a) -= out_w;
        *self.stats.left_marginal_mut(b) += out_w;
        *self.stats.right_marginal_mut(a) -= in_w;
        *self.stats.right_marginal_mut(b) += in_w;
        self.assign[w as usize] = b;
    }
}

fn word_suffix(word: &str) -> String {
    let chars: Vec<char> = word.chars().collect();
    let start = chars.len().saturating_sub(3);
    chars[start..].iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{ami, init_clustering, write_clusters};
    use crate::corpus::{build_vocabulary, BOUNDARY_SYMBOL};
    use approx::assert_abs_diff_eq;

    fn sents(raw: &[&str]) -> Vec<Vec<String>> {
        raw.iter()
            .map(|s| s.split_whitespace().map(str::to_string).collect())
            .collect()
    }

    fn toy_vocab() -> Vocabulary {
        build_vocabulary(
            &sents(&[
                "the dog ran",
                "a dog ran",
                "the cat ran",
                "a cat sat",
                "the dog sat",
                "a cat ran",
            ]),
            1,
            BOUNDARY_SYMBOL,
        )
        .unwrap()
    }

    /// Every single-move delta must match an AMI recomputation from scratch.
    #[test]
    fn probe_delta_matches_scratch_recomputation() {
        let vocab = toy_vocab();
        let k = 3;
        let clustering = init_clustering(&vocab, k, 1).unwrap();
        let mut ex: Exchange<f64> = Exchange::new(&vocab, &clustering, false).unwrap();
        let before: f64 = ami(ex.stats()).unwrap();
        for w in 0..vocab.len() as u32 {
            let a = ex.assignment()[w as usize];
            for b in 0..k {
                if b == a {
                    continue;
                }
                let delta = ex.probe_move_delta(w, b);
                let mut perturbed = ex.assignment().to_vec();
                perturbed[w as usize] = b;
                let scratch = ClusterStats::from_assignment(&vocab, &perturbed, k);
                let after: f64 = ami(&scratch).unwrap();
                assert_abs_diff_eq!(delta, after - before, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn pass_keeps_stats_consistent_and_ami_monotone() {
        let vocab = toy_vocab();
        let clustering = init_clustering(&vocab, 3, 1).unwrap();
        let mut ex: Exchange<f64> = Exchange::new(&vocab, &clustering, false).unwrap();
        let mut last = ex.ami();
        for _ in 0..10 {
            let moves = ex.pass();
            ex.audit_recount().unwrap();
            let now = ex.ami();
            assert!(now >= last - 1e-9, "AMI decreased: {last} -> {now}");
            last = now;
            if moves == 0 {
                break;
            }
        }
    }

    #[test]
    fn fixed_point_reports_zero_moves() {
        let vocab = toy_vocab();
        let clustering = init_clustering(&vocab, 2, 1).unwrap();
        let mut ex: Exchange<f64> = Exchange::new(&vocab, &clustering, false).unwrap();
        ex.run(20);
        let assign_before = ex.assignment().to_vec();
        assert_eq!(ex.pass(), 0);
        assert_eq!(ex.assignment(), assign_before.as_slice());
    }

    /// Exhaustive argmax over all 2-class assignments of the toy vocabulary.
    fn brute_force_best(vocab: &Vocabulary, k: u32) -> f64 {
        let n = vocab.len();
        assert!(k == 2 && n <= 16);
        let mut best = f64::NEG_INFINITY;
        for mask in 0..(1u32 << n) {
            let assign: Vec<u32> = (0..n).map(|i| (mask >> i) & 1).collect();
            let stats = ClusterStats::from_assignment(vocab, &assign, k);
            if stats.total_bigrams() == 0 {
                continue;
            }
            let v: f64 = ami(&stats).unwrap();
            if v > best {
                best = v;
            }
        }
        best
    }

    #[test]
    fn converges_to_brute_force_optimum_on_tiny_corpus() {
        // Three content words plus <unk>/<s>; small enough to enumerate.
        let vocab = build_vocabulary(
            &sents(&["a b a b a c", "b a c a b"]),
            1,
            BOUNDARY_SYMBOL,
        )
        .unwrap();
        let clustering = init_clustering(&vocab, 2, 1).unwrap();
        let mut ex: Exchange<f64> = Exchange::new(&vocab, &clustering, false).unwrap();
        let passes = ex.run(20);
        assert!(passes <= 2, "expected convergence within two passes");
        let best = brute_force_best(&vocab, 2);
        assert_abs_diff_eq!(ex.ami(), best, epsilon = 1e-9);
    }

    #[test]
    fn interleaved_word_families_separate() {
        // det-like tokens always precede noun-like tokens; sentences are long
        // enough that boundary transitions stay marginal.
        let dets = ["the", "a", "this", "that"];
        let nouns = ["dog", "cat", "bird", "fish"];
        let mut corpus = Vec::new();
        for (i, d) in dets.iter().enumerate() {
            for (j, n) in nouns.iter().enumerate() {
                for rep in 0..(1 + (i + j) % 3) {
                    let other = nouns[(j + rep + 1) % nouns.len()];
                    let pair = format!("{d} {n} {d} {other}");
                    corpus.push(format!("{pair} {pair} {pair}"));
                }
            }
        }
        let refs: Vec<&str> = corpus.iter().map(String::as_str).collect();
        let vocab = build_vocabulary(&sents(&refs), 1, BOUNDARY_SYMBOL).unwrap();
        let clustering = init_clustering(&vocab, 2, 1).unwrap();
        let mut ex: Exchange<f64> = Exchange::new(&vocab, &clustering, false).unwrap();
        ex.run(20);
        let cluster_of = |w: &str| ex.assignment()[vocab.get(w).unwrap().0 as usize];
        let det_cluster = cluster_of("the");
        let noun_cluster = cluster_of("dog");
        assert_ne!(det_cluster, noun_cluster);
        for d in dets {
            assert_eq!(cluster_of(d), det_cluster);
        }
        for n in nouns {
            assert_eq!(cluster_of(n), noun_cluster);
        }
        // The family partition beats every single-move perturbation.
        let base: f64 = ex.ami();
        for w in 0..vocab.len() as u32 {
            for b in 0..2 {
                if b == ex.assignment()[w as usize] {
                    continue;
                }
                let mut perturbed = ex.assignment().to_vec();
                perturbed[w as usize] = b;
                let stats = ClusterStats::from_assignment(&vocab, &perturbed, 2);
                let v: f64 = ami(&stats).unwrap();
                assert!(v <= base + 1e-9);
            }
        }
    }

    #[test]
    fn suffix_context_groups_shared_endings() {
        let vocab = build_vocabulary(
            &sents(&["walking talking", "walking jumping", "talking jumping"]),
            1,
            BOUNDARY_SYMBOL,
        )
        .unwrap();
        let clustering = init_clustering(&vocab, 2, 1).unwrap();
        let mut ex: Exchange<f64> = Exchange::new(&vocab, &clustering, true).unwrap();
        ex.run(10);
        ex.audit_recount().unwrap();
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = sents(&["the dog ran", "a cat sat", "the cat ran", "a dog sat"]);
        let run = || {
            let vocab = build_vocabulary(&corpus, 1, BOUNDARY_SYMBOL).unwrap();
            let clustering = init_clustering(&vocab, 2, 1).unwrap();
            let mut ex: Exchange<f64> = Exchange::new(&vocab, &clustering, false).unwrap();
            ex.run(20);
            let mut out = Vec::new();
            write_clusters(&ex.into_clustering(), &mut out).unwrap();
            out
        };
        assert_eq!(run(), run());
    }
}
