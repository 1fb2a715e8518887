//! Rounding a real-valued scheme to whole bits for a given file size.

use std::collections::BTreeMap;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::scheme::SchemeSolution;
use crate::subset::UserSet;

/// Integer-bit version of a [`SchemeSolution`] for files of `file_size` bits.
///
/// Every layer is partitioned into subfile ranges laid out left to right in
/// ascending bitmask order of the caching set (the empty set first).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedScheme {
    pub users: usize,
    pub file_size: usize,
    pub layer_bits: Vec<usize>,
    subfiles: Vec<BTreeMap<UserSet, Range<usize>>>,
    /// `(layer, T, S) -> bits` of subfile `S` sent inside the multicast to `T`.
    pub assignments: BTreeMap<(usize, UserSet, UserSet), usize>,
    /// `T -> v_T` in bits.
    pub multicast: BTreeMap<UserSet, usize>,
    /// `(user, layer) -> bits` still missing after caches and multicasts.
    pub unicast: BTreeMap<(usize, usize), usize>,
    /// Rounded per-user cache size (bits per file).
    pub memory_bits: Vec<usize>,
    pub predicted_load: f64,
    pub variable_count: usize,
}

fn to_bits(x: f64, file_size: usize) -> usize {
    (x.max(0.0) * file_size as f64).round() as usize
}

/// `round(f_l · F)` for every layer.
pub fn layer_bits(rates: &[f64], file_size: usize) -> Vec<usize> {
    let mut prev = 0.0;
    rates
        .iter()
        .map(|&r| {
            let f = r - prev;
            prev = r;
            to_bits(f, file_size)
        })
        .collect()
}

fn layer_partition(
    scheme: &SchemeSolution,
    l: usize,
    length: usize,
    file_size: usize,
) -> BTreeMap<UserSet, Range<usize>> {
    let universe = UserSet::range(l, scheme.users);
    let exact: Vec<(UserSet, f64)> =
        universe.subsets().skip(1).map(|s| (s, scheme.alloc(l, s).max(0.0) * file_size as f64)).collect();
    let mut counts: Vec<usize> = exact.iter().map(|&(_, x)| x.round() as usize).collect();
    let mut total: usize = counts.iter().sum();
    while total > length {
        // give back a bit from the entry that was rounded up the most
        let i = (0..counts.len())
            .filter(|&i| counts[i] > 0)
            .max_by(|&a, &b| {
                let ea = counts[a] as f64 - exact[a].1;
                let eb = counts[b] as f64 - exact[b].1;
                ea.total_cmp(&eb).then(b.cmp(&a))
            })
            .expect("a positive total has a positive entry");
        counts[i] -= 1;
        total -= 1;
    }
    let mut out = BTreeMap::new();
    let mut cursor = length - total;
    out.insert(UserSet::EMPTY, 0..cursor);
    for (&(s, _), &c) in exact.iter().zip(&counts) {
        out.insert(s, cursor..cursor + c);
        cursor += c;
    }
    out
}

/// Maps every allocation and assignment to whole bits. Assignments are cut
/// greedily, in canonical order, to fit the rounded subfile each one draws
/// from; multicast lengths and unicasts are then recomputed exactly.
pub fn quantize(scheme: &SchemeSolution, file_size: usize) -> Result<QuantizedScheme> {
    if file_size == 0 {
        return Err(Error::Domain("file size must be at least 1 bit".into()));
    }
    let k = scheme.users;
    let bits = layer_bits(&scheme.rates, file_size);
    let subfiles: Vec<_> = (0..k).map(|l| layer_partition(scheme, l, bits[l], file_size)).collect();

    let mut used: BTreeMap<(usize, UserSet, usize), usize> = BTreeMap::new();
    let mut assignments = BTreeMap::new();
    let mut streams: BTreeMap<(UserSet, usize), usize> = BTreeMap::new();
    for (&(l, t, s), &u) in &scheme.assignments {
        let j = t.minus(s);
        let universe = UserSet::range(l, k);
        if l >= k || j.len() != 1 || !s.is_subset_of(universe) || !t.is_subset_of(universe) {
            return Err(Error::Simulation(format!("malformed assignment u[{}][{t}][{s}]", l + 1)));
        }
        let j = j.min().unwrap_or(0);
        let cap = subfiles[l][&s].len();
        let spent = used.entry((l, s, j)).or_insert(0);
        let n = to_bits(u, file_size).min(cap - *spent);
        if n > 0 {
            *spent += n;
            assignments.insert((l, t, s), n);
            *streams.entry((t, j)).or_insert(0) += n;
        }
    }

    let mut multicast: BTreeMap<UserSet, usize> = BTreeMap::new();
    for (&(t, _), &n) in &streams {
        let v = multicast.entry(t).or_insert(0);
        *v = (*v).max(n);
    }

    let mut unicast = BTreeMap::new();
    for user in 0..k {
        for l in 0..=user {
            let cached: usize = subfiles[l].iter().filter(|(s, _)| s.contains(user)).map(|(_, r)| r.len()).sum();
            let received: usize = assignments
                .iter()
                .filter(|(&(al, t, s), _)| al == l && t.minus(s) == UserSet::singleton(user))
                .map(|(_, &n)| n)
                .sum();
            let missing = bits[l] - cached - received;
            if missing > 0 {
                unicast.insert((user, l), missing);
            }
        }
    }

    let memory_bits = scheme.user_memories().iter().map(|&m| to_bits(m, file_size)).collect();
    Ok(QuantizedScheme {
        users: k,
        file_size,
        layer_bits: bits,
        subfiles,
        assignments,
        multicast,
        unicast,
        memory_bits,
        predicted_load: scheme.objective,
        variable_count: scheme.variable_count(),
    })
}

impl QuantizedScheme {
    /// Bit range of subfile `S` within layer `l`.
    pub fn subfile(&self, l: usize, s: UserSet) -> Range<usize> {
        self.subfiles.get(l).and_then(|m| m.get(&s)).cloned().unwrap_or(0..0)
    }

    /// Subfile ranges of layer `l` in canonical order.
    pub fn subfiles(&self, l: usize) -> impl Iterator<Item = (UserSet, Range<usize>)> + '_ {
        self.subfiles[l].iter().map(|(&s, r)| (s, r.clone()))
    }

    /// Bits of each file cached by `user`.
    pub fn cached_bits(&self, user: usize) -> usize {
        (0..=user.min(self.users.saturating_sub(1)))
            .flat_map(|l| self.subfiles(l))
            .filter(|(s, _)| s.contains(user))
            .map(|(_, r)| r.len())
            .sum()
    }

    /// Load implied by the quantized counts, in files.
    pub fn load(&self) -> f64 {
        let total: usize = self.multicast.values().sum::<usize>() + self.unicast.values().sum::<usize>();
        total as f64 / self.file_size as f64
    }
}
