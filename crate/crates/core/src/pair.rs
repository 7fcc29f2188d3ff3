use std::fmt;

/// Unordered pair of distinct ball indices, stored with `lo < hi`.
///
/// Indices are zero-based in code; text formats and `Display` use the
/// one-based labels `1..=N`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    lo: usize,
    hi: usize,
}

impl Pair {
    /// Returns `None` when `a == b`.
    pub fn new(a: usize, b: usize) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(Pair { lo: a, hi: b }),
            std::cmp::Ordering::Greater => Some(Pair { lo: b, hi: a }),
            std::cmp::Ordering::Equal => None,
        }
    }

    /// Builds a pair from one-based labels.
    pub fn from_labels(a: usize, b: usize) -> Option<Self> {
        if a == 0 || b == 0 {
            return None;
        }
        Pair::new(a - 1, b - 1)
    }

    #[inline]
    pub fn lo(self) -> usize {
        self.lo
    }

    #[inline]
    pub fn hi(self) -> usize {
        self.hi
    }

    #[inline]
    pub fn contains(self, ball: usize) -> bool {
        self.lo == ball || self.hi == ball
    }

    #[inline]
    pub fn meets(self, other: Pair) -> bool {
        self.contains(other.lo) || self.contains(other.hi)
    }

    /// The partner of `ball` in this pair.
    pub fn other(self, ball: usize) -> Option<usize> {
        if ball == self.lo {
            Some(self.hi)
        } else if ball == self.hi {
            Some(self.lo)
        } else {
            None
        }
    }

    /// All pairs of `n` balls in lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = Pair> {
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| Pair { lo: i, hi: j }))
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.lo + 1, self.hi + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_and_labels() {
        let p = Pair::new(4, 1).unwrap();
        assert_eq!((p.lo(), p.hi()), (1, 4));
        assert_eq!(p, Pair::from_labels(2, 5).unwrap());
        assert_eq!(p.to_string(), "(2,5)");
        assert!(Pair::new(3, 3).is_none());
        assert!(Pair::from_labels(0, 2).is_none());
        assert_eq!(p.other(4), Some(1));
        assert_eq!(p.other(0), None);
    }

    #[test]
    fn enumerates_all_pairs() {
        let all: Vec<_> = Pair::all(4).collect();
        assert_eq!(all.len(), 6);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }
}
