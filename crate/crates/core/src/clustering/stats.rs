//! Class-bigram sufficient statistics and the average-mutual-information
//! objective.

use crate::corpus::Vocabulary;
use crate::{Error, Result, Scalar};

/// Dense class-bigram table with row/column marginals.
///
/// `n_classes` covers the K word clusters plus, when suffix contexts are
/// enabled, one pinned pseudo-class per distinct suffix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterStats {
    n_classes: u32,
    bigram: Vec<u64>,
    left_marginal: Vec<u64>,
    right_marginal: Vec<u64>,
    total_bigrams: u64,
}

/// `x * log2(x)` with the `0 log 0 = 0` convention.
#[inline]
pub(crate) fn xlog2x<S: Scalar>(x: u64) -> S {
    if x == 0 {
        S::zero()
    } else {
        let v = S::from_count(x);
        v * v.log2()
    }
}

impl ClusterStats {
    /// Builds from an explicit bigram table.
    pub fn from_bigrams<I>(n_classes: u32, pairs: I) -> Self
    where
        I: IntoIterator<Item = ((u32, u32), u64)>,
    {
        let k = n_classes as usize;
        let mut stats = ClusterStats {
            n_classes,
            bigram: vec![0; k * k],
            left_marginal: vec![0; k],
            right_marginal: vec![0; k],
            total_bigrams: 0,
        };
        for ((c1, c2), count) in pairs {
            stats.add(c1, c2, count);
        }
        stats
    }

    /// Recounts the table from a vocabulary and a per-id class assignment.
    ///
    /// `class_of[id]` must be a valid class for every vocabulary id.
    pub fn from_assignment(vocab: &Vocabulary, class_of: &[u32], n_classes: u32) -> Self {
        let pairs = vocab
            .bigrams()
            .iter()
            .map(|(&(l, r), &c)| ((class_of[l as usize], class_of[r as usize]), c));
        Self::from_bigrams(n_classes, pairs)
    }

    fn add(&mut self, c1: u32, c2: u32, count: u64) {
        let k = self.n_classes as usize;
        self.bigram[c1 as usize * k + c2 as usize] += count;
        self.left_marginal[c1 as usize] += count;
        self.right_marginal[c2 as usize] += count;
        self.total_bigrams += count;
    }

    pub fn n_classes(&self) -> u32 {
        self.n_classes
    }

    pub fn total_bigrams(&self) -> u64 {
        self.total_bigrams
    }

    #[inline]
    pub fn count(&self, c1: u32, c2: u32) -> u64 {
        self.bigram[c1 as usize * self.n_classes as usize + c2 as usize]
    }

    #[inline]
    pub fn left_marginal(&self, c: u32) -> u64 {
        self.left_marginal[c as usize]
    }

    #[inline]
    pub fn right_marginal(&self, c: u32) -> u64 {
        self.right_marginal[c as usize]
    }

    pub(crate) fn count_mut(&mut self, c1: u32, c2: u32) -> &mut u64 {
        &mut self.bigram[c1 as usize * self.n_classes as usize + c2 as usize]
    }

    pub(crate) fn left_marginal_mut(&mut self, c: u32) -> &mut u64 {
        &mut self.left_marginal[c as usize]
    }

    pub(crate) fn right_marginal_mut(&mut self, c: u32) -> &mut u64 {
        &mut self.right_marginal[c as usize]
    }

    /// Checks that marginals and the total agree with the table.
    pub fn validate(&self) -> Result<()> {
        let k = self.n_classes as usize;
        let mut total = 0u64;
        for c1 in 0..k {
            let row: u64 = self.bigram[c1 * k..(c1 + 1) * k].iter().sum();
            if row != self.left_marginal[c1] {
                return Err(Error::data(format!(
                    "left marginal of class {c1} is {} but row sums to {row}",
                    self.left_marginal[c1]
                )));
            }
            total += row;
        }
        for c2 in 0..k {
            let col: u64 = (0..k).map(|c1| self.bigram[c1 * k + c2]).sum();
            if col != self.right_marginal[c2] {
                return Err(Error::data(format!(
                    "right marginal of class {c2} is {} but column sums to {col}",
                    self.right_marginal[c2]
                )));
            }
        }
        if total != self.total_bigrams {
            return Err(Error::data(format!(
                "total bigram count is {} but cells sum to {total}",
                self.total_bigrams
            )));
        }
        Ok(())
    }

    /// Unnormalized objective `F = Σ f(n) − Σ f(l) − Σ f(r)` with
    /// `f(x) = x log2 x`. The AMI is `F / N + log2 N`.
    pub(crate) fn objective_f<S: Scalar>(&self) -> S {
        let k = self.n_classes as usize;
        let mut f = S::zero();
        for c1 in 0..k {
            for c2 in 0..k {
                f = f + xlog2x(self.bigram[c1 * k + c2]);
            }
        }
        for c in 0..k {
            f = f - xlog2x::<S>(self.left_marginal[c]);
            f = f - xlog2x::<S>(self.right_marginal[c]);
        }
        f
    }
}

/// Average mutual information of adjacent class labels, in bits:
/// `Σ p(c1,c2) · log2( p(c1,c2) / (p_left(c1) · p_right(c2)) )`.
pub fn ami<S: Scalar>(stats: &ClusterStats) -> Result<S> {
    if stats.total_bigrams == 0 {
        return Err(Error::data("no bigrams: AMI undefined"));
    }
    stats.validate()?;
    let n = S::from_count(stats.total_bigrams);
    Ok(stats.objective_f::<S>() / n + n.log2())
}
