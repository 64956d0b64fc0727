use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use super::{CorpusStats, SolidityFile};
use crate::lexer;

/// The distinct lexical tokens of a source text; comments and whitespace do
/// not contribute.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSet {
    pub tokens: BTreeSet<String>,
}

impl TokenSet {
    pub fn from_source(src: &str) -> Self {
        Self {
            tokens: lexer::tokenize_lossy(src)
                .iter()
                .map(|t| t.text(src).to_string())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self {
            tokens: iter.into_iter().map(Into::into).collect(),
        }
    }
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets counted as identical.
pub fn jaccard(a: &TokenSet, b: &TokenSet) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.tokens.intersection(&b.tokens).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

#[derive(Debug, Clone)]
pub struct DedupOutcome {
    pub files: Vec<SolidityFile>,
    pub stats: CorpusStats,
}

/// Keeps the first file of every similarity cluster, preserving input order.
///
/// Clusters are the transitive closure of pairs with `jaccard >= threshold`.
/// Candidate pairs come from a prefix index: with tokens ranked rarest-first,
/// two sets reaching the threshold must share a token within their first
/// `n - ceil(threshold * n) + 1` ranks, so no qualifying pair is missed.
pub fn deduplicate(files: Vec<SolidityFile>, threshold: f64) -> DedupOutcome {
    assert!(threshold > 0.0 && threshold <= 1.0, "threshold must lie in (0, 1]");
    let sets: Vec<TokenSet> = files.par_iter().map(|f| TokenSet::from_source(&f.content)).collect();

    let mut doc_freq: HashMap<&str, usize> = HashMap::new();
    for s in &sets {
        for t in &s.tokens {
            *doc_freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let prefixes: Vec<Vec<&str>> = sets
        .iter()
        .map(|s| {
            let mut ranked: Vec<&str> = s.tokens.iter().map(String::as_str).collect();
            ranked.sort_by_key(|t| (doc_freq[t], *t));
            ranked.truncate(prefix_len(s.len(), threshold));
            ranked
        })
        .collect();
    let mut index: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, p) in prefixes.iter().enumerate() {
        for t in p {
            index.entry(*t).or_default().push(i);
        }
    }

    let empties: Vec<usize> = (0..sets.len()).filter(|&i| sets[i].is_empty()).collect();
    let mut pairs: Vec<(usize, usize)> = (0..sets.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut cands: Vec<usize> = prefixes[i]
                .iter()
                .flat_map(|t| index[t].iter().copied())
                .filter(|&j| j < i)
                .collect();
            cands.sort_unstable();
            cands.dedup();
            cands
                .into_iter()
                .filter(|&j| jaccard(&sets[i], &sets[j]) >= threshold)
                .map(move |j| (j, i))
                .collect::<Vec<_>>()
        })
        .collect();
    pairs.extend(empties.windows(2).map(|w| (w[0], w[1])));
    pairs.sort_unstable();

    let mut uf = UnionFind::new(files.len());
    for (a, b) in pairs {
        uf.union(a, b);
    }
    let decomposed = files.len();
    let kept: Vec<SolidityFile> = files
        .into_iter()
        .enumerate()
        .filter(|(i, _)| uf.find(*i) == *i)
        .map(|(_, f)| f)
        .collect();
    let stats = CorpusStats::with_counts(decomposed, kept.len());
    DedupOutcome { files: kept, stats }
}

fn prefix_len(n: usize, threshold: f64) -> usize {
    if n == 0 {
        return 0;
    }
    let need = ((threshold * n as f64) - 1e-9).ceil().max(1.0) as usize;
    (n - need.min(n) + 1).min(n)
}

/// Union-find whose root is always the smallest member.
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(s: &[&str]) -> TokenSet {
        s.iter().copied().collect()
    }

    #[test]
    fn hand_computed_values() {
        assert_eq!(jaccard(&set(&["a", "b"]), &set(&["a", "b"])), 1.0);
        assert_eq!(jaccard(&set(&["a"]), &set(&["b"])), 0.0);
        assert_eq!(jaccard(&set(&["a", "b", "c"]), &set(&["a", "b", "d"])), 0.5);
        assert_eq!(jaccard(&set(&[]), &set(&[])), 1.0);
        assert_eq!(jaccard(&set(&[]), &set(&["a"])), 0.0);
    }

    #[test]
    fn prefix_covers_minimum_overlap() {
        assert_eq!(prefix_len(20, 0.9), 3);
        assert_eq!(prefix_len(20, 1.0), 1);
        assert_eq!(prefix_len(1, 0.9), 1);
        assert_eq!(prefix_len(10, 0.05), 10);
    }

    #[test]
    fn comments_and_layout_do_not_matter() {
        let a = TokenSet::from_source("contract A { uint x; }");
        let b = TokenSet::from_source("contract A {\n  // c\n  uint   x;\n}");
        assert_eq!(a, b);
    }
}
