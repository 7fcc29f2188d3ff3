//! Symbolic collision sequences, collision graphs and combinatorial richness.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::ops::Range;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
pub use crate::pair::Pair;

/// Time-ordered list of colliding pairs for `n_balls` balls.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymbolicSequence {
    pub n_balls: usize,
    pub labels: Vec<Pair>,
}

/// Graph on the ball labels whose edges are the distinct pairs of a sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollisionGraph {
    pub n_balls: usize,
    pub edges: BTreeSet<Pair>,
}

/// Output of [`find_witness`]: a ball and two collision indices (zero-based).
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub ball: usize,
    pub p: usize,
    pub q: usize,
}

/// Disjoint-set forest that also tracks how many vertices have been touched.
#[derive(Clone, Debug)]
pub(crate) struct Dsu {
    parent: Vec<usize>,
    size: Vec<usize>,
    components: usize,
}

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
            size: vec![1; n],
            components: n,
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true if the two vertices were in different components.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.components -= 1;
        true
    }

    pub(crate) fn is_connected(&self) -> bool {
        self.components == 1
    }
}

/// Streaming form of the greedy richness count, fed one collision at a time.
#[derive(Clone, Debug)]
pub struct RichnessCounter {
    n_balls: usize,
    dsu: Dsu,
    count: usize,
}

impl RichnessCounter {
    pub fn new(n_balls: usize) -> Self {
        RichnessCounter {
            n_balls,
            dsu: Dsu::new(n_balls),
            count: 0,
        }
    }

    /// Records a collision and returns the richness so far.
    pub fn push(&mut self, pair: Pair) -> usize {
        self.dsu.union(pair.lo(), pair.hi());
        if self.dsu.is_connected() {
            self.count += 1;
            self.dsu = Dsu::new(self.n_balls);
        }
        self.count
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

impl SymbolicSequence {
    pub fn new(n_balls: usize, labels: Vec<Pair>) -> Result<Self> {
        if let Some(p) = labels.iter().find(|p| p.hi() >= n_balls) {
            return Err(Error::Domain(format!(
                "pair {p} refers to a ball outside 1..={n_balls}"
            )));
        }
        Ok(SymbolicSequence { n_balls, labels })
    }

    /// Convenience constructor from one-based label tuples.
    pub fn from_labels(n_balls: usize, labels: &[(usize, usize)]) -> Result<Self> {
        let pairs = labels
            .iter()
            .map(|&(a, b)| Pair::from_labels(a, b).ok_or_else(|| Error::Domain(format!("invalid pair ({a},{b})"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_balls, pairs)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Collision graph of the subsequence `range` (zero-based, half-open).
    pub fn collision_graph(&self, range: Range<usize>) -> Result<CollisionGraph> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::Range {
                start: range.start,
                end: range.end,
                len: self.len(),
            });
        }
        Ok(CollisionGraph {
            n_balls: self.n_balls,
            edges: self.labels[range].iter().copied().collect(),
        })
    }

    /// Greedy decomposition into minimal consecutive blocks whose collision
    /// graphs are connected and span all balls. A trailing incomplete block is
    /// not reported.
    pub fn rich_blocks(&self) -> Vec<Range<usize>> {
        let mut blocks = Vec::new();
        let mut dsu = Dsu::new(self.n_balls);
        let mut start = 0;
        for (k, p) in self.labels.iter().enumerate() {
            dsu.union(p.lo(), p.hi());
            if dsu.is_connected() {
                blocks.push(start..k + 1);
                start = k + 1;
                dsu = Dsu::new(self.n_balls);
            }
        }
        blocks
    }

    /// Largest number of disjoint consecutive blocks with connected, spanning
    /// collision graphs.
    pub fn richness(&self) -> usize {
        if self.n_balls < 2 {
            return 0;
        }
        self.rich_blocks().len()
    }

    /// Whether the sequence is `C`-rich for a (possibly fractional) threshold.
    pub fn is_rich(&self, threshold: &BigRational) -> bool {
        BigRational::from_integer(BigInt::from(self.richness())) >= *threshold
    }

    /// Drops every collision involving `ball` and relabels the remaining balls
    /// compactly onto `0..N−1`.
    pub fn derived(&self, ball: usize) -> SymbolicSequence {
        let shift = |x: usize| if x > ball { x - 1 } else { x };
        SymbolicSequence {
            n_balls: self.n_balls.saturating_sub(1),
            labels: self
                .labels
                .iter()
                .filter(|p| !p.contains(ball))
                .map(|p| Pair::new(shift(p.lo()), shift(p.hi())).expect("distinct after shift"))
                .collect(),
        }
    }

    /// Writes the `k i j` text format (one-based), preceded by a `# n_balls` header.
    pub fn to_text(&self) -> String {
        let mut out = format!("# n_balls {}\n", self.n_balls);
        for (k, p) in self.labels.iter().enumerate() {
            let _ = writeln!(out, "{} {} {}", k + 1, p.lo() + 1, p.hi() + 1);
        }
        out
    }

    /// Parses the `k i j` format. Without a `# n_balls` header the ball count
    /// is the largest label seen.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut n_balls = None;
        let mut labels = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let parse_err = |message: String| Error::Parse { line: ln + 1, message };
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("n_balls") {
                    let v = it
                        .next()
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(|| parse_err("malformed n_balls header".into()))?;
                    n_balls = Some(v);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<usize> = line
                .split_whitespace()
                .map(|f| f.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(format!("expected `k i j` integers: {e}")))?;
            let [k, i, j] = fields[..] else {
                return Err(parse_err(format!("expected 3 fields, found {}", fields.len())));
            };
            if k != labels.len() + 1 {
                return Err(parse_err(format!(
                    "collision index {k} out of order (expected {})",
                    labels.len() + 1
                )));
            }
            let pair = Pair::from_labels(i, j).ok_or_else(|| parse_err(format!("invalid pair ({i},{j})")))?;
            labels.push(pair);
        }
        let n = n_balls.unwrap_or_else(|| labels.iter().map(|p| p.hi() + 1).max().unwrap_or(2));
        SymbolicSequence::new(n, labels)
    }
}

impl CollisionGraph {
    /// Connected and touching every vertex `1..=N`.
    pub fn is_connected_spanning(&self) -> bool {
        if self.n_balls < 2 {
            return self.n_balls == 1;
        }
        let mut dsu = Dsu::new(self.n_balls);
        for e in &self.edges {
            dsu.union(e.lo(), e.hi());
        }
        dsu.is_connected()
    }
}

/// The richness threshold `C(2) = 1`, `C(N) = (N/2)(2C(N−1) + 1)`, exactly.
pub fn threshold_c(n: usize) -> Result<BigRational> {
    if n < 2 {
        return Err(Error::Domain(format!("C(N) is defined for N >= 2, got {n}")));
    }
    let two = BigRational::from_integer(BigInt::from(2));
    let mut c = BigRational::one();
    for k in 3..=n {
        let half_k = BigRational::new(BigInt::from(k), BigInt::from(2));
        c = half_k * (&two * c + BigRational::one());
    }
    Ok(c)
}

/// Smallest integer richness meeting a rational threshold.
pub fn ceil_count(threshold: &BigRational) -> usize {
    threshold
        .ceil()
        .to_integer()
        .to_usize()
        .expect("threshold fits in usize")
}

/// Richness the derived sequence is guaranteed to have: `⌈2C(N−1) + 1⌉`.
pub fn derived_target(n: usize) -> Result<usize> {
    let c = threshold_c(n - 1)?;
    Ok(ceil_count(
        &(BigRational::from_integer(BigInt::from(2)) * c + BigRational::one()),
    ))
}

/// Finds a ball `k0` and indices `p < q` such that `k0` lies in both
/// `σ_p` and `σ_q` and in no collision strictly between them, `σ_p = σ_q`
/// only if some intermediate collision meets `σ_p`, and the sequence with
/// `k0` removed is `(2C(N−1)+1)`-rich on the remaining balls.
///
/// Returns `None` unless `N ≥ 3` and the sequence is `C(N)`-rich.
pub fn find_witness(seq: &SymbolicSequence) -> Option<Witness> {
    let n = seq.n_balls;
    if n < 3 {
        return None;
    }
    let target = ceil_count(&threshold_c(n).ok()?);
    let blocks = seq.rich_blocks();
    if blocks.len() < target {
        return None;
    }

    // leaf counts over a spanning tree of every block
    let mut leaf_count = vec![0usize; n];
    for block in &blocks {
        let mut dsu = Dsu::new(n);
        let mut degree = vec![0usize; n];
        for p in &seq.labels[block.clone()] {
            if dsu.union(p.lo(), p.hi()) {
                degree[p.lo()] += 1;
                degree[p.hi()] += 1;
            }
        }
        for (v, &d) in degree.iter().enumerate() {
            if d == 1 {
                leaf_count[v] += 1;
            }
        }
    }
    let needed = derived_target(n).ok()?;
    let ball = (0..n)
        .filter(|&v| leaf_count[v] >= needed)
        .max_by(|&a, &b| leaf_count[a].cmp(&leaf_count[b]).then(b.cmp(&a)))?;

    let occurrences: Vec<usize> = seq
        .labels
        .iter()
        .enumerate()
        .filter(|(_, p)| p.contains(ball))
        .map(|(k, _)| k)
        .collect();
    occurrences
        .windows(2)
        .map(|w| (w[0], w[1]))
        .filter(|&(p, q)| {
            let (sp, sq) = (seq.labels[p], seq.labels[q]);
            sp != sq || seq.labels[p + 1..q].iter().any(|s| s.meets(sp))
        })
        .min_by_key(|&(p, q)| (q - p, p))
        .map(|(p, q)| Witness { ball, p, q })
}
