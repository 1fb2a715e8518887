//! User sets as bitmasks. User `k` (0-based) is bit `k`; sets render with
//! 1-based labels, e.g. `{1,3}`.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct UserSet(pub u64);

impl UserSet {
    pub const EMPTY: UserSet = UserSet(0);

    /// Users `from..users` (0-based), i.e. the users that need layer `from`.
    pub fn range(from: usize, users: usize) -> Self {
        if from >= users {
            return Self::EMPTY;
        }
        let all = if users == 64 { u64::MAX } else { (1u64 << users) - 1 };
        UserSet(all & !((1u64 << from) - 1))
    }

    pub fn singleton(k: usize) -> Self {
        UserSet(1 << k)
    }

    /// Builds a set from 1-based user labels.
    pub fn from_labels(labels: &[usize]) -> Self {
        UserSet(labels.iter().fold(0, |m, &k| m | (1 << (k - 1))))
    }

    pub fn contains(self, k: usize) -> bool {
        self.0 >> k & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: UserSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersects(self, other: UserSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn with(self, k: usize) -> Self {
        UserSet(self.0 | 1 << k)
    }

    pub fn without(self, k: usize) -> Self {
        UserSet(self.0 & !(1 << k))
    }

    pub fn minus(self, other: UserSet) -> Self {
        UserSet(self.0 & !other.0)
    }

    /// Smallest member, if any.
    pub fn min(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    pub fn iter(self) -> Members {
        Members(self.0)
    }

    /// All subsets of `self` (including the empty set and `self`) in
    /// ascending bitmask order.
    pub fn subsets(self) -> Subsets {
        Subsets { universe: self.0, next: Some(0) }
    }

    pub fn labels(self) -> Vec<usize> {
        self.iter().map(|k| k + 1).collect()
    }

    /// Parses `{1,3}` / `{}` notation.
    pub fn parse(text: &str) -> Option<Self> {
        let inner = text.trim().strip_prefix('{')?.strip_suffix('}')?;
        if inner.trim().is_empty() {
            return Some(Self::EMPTY);
        }
        let mut set = Self::EMPTY;
        for part in inner.split(',') {
            let k: usize = part.trim().parse().ok()?;
            if k == 0 || k > 64 {
                return None;
            }
            set = set.with(k - 1);
        }
        Some(set)
    }
}

impl fmt::Display for UserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.labels().iter().map(|k| k.to_string()).collect();
        write!(f, "{{{}}}", labels.join(","))
    }
}

pub struct Members(u64);

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let k = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(k)
    }
}

/// Submask enumeration in increasing numeric order.
pub struct Subsets {
    universe: u64,
    next: Option<u64>,
}

impl Iterator for Subsets {
    type Item = UserSet;

    fn next(&mut self) -> Option<UserSet> {
        let cur = self.next?;
        self.next = if cur == self.universe {
            None
        } else {
            // next submask above cur: (cur - universe) & universe, done in wrapping arithmetic
            Some(cur.wrapping_sub(self.universe) & self.universe)
        };
        Some(UserSet(cur))
    }
}
