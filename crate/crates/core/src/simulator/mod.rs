//! Bit-level realization of a scheme: random files, cache placement, XOR
//! delivery, decoding at every user and an end-to-end check.

pub mod quantize;

use std::collections::BTreeMap;
use std::ops::Range;

use bitvec::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::scheme::SchemeSolution;
use crate::subset::UserSet;

pub use quantize::{layer_bits, quantize, QuantizedScheme};

pub type Bits = BitVec<u64, Lsb0>;

/// `N` files, each a stack of pseudorandom layer bit strings.
#[derive(Debug, Clone, PartialEq)]
pub struct FileLibrary {
    pub layer_bits: Vec<usize>,
    data: Vec<Vec<Bits>>,
}

impl FileLibrary {
    pub fn generate(files: usize, rates: &[f64], file_size: usize, seed: u64) -> Self {
        let lengths = layer_bits(rates, file_size);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..files)
            .map(|_| {
                lengths
                    .iter()
                    .map(|&len| {
                        let words: Vec<u64> = (0..len.div_ceil(64)).map(|_| rng.next_u64()).collect();
                        let mut bits = Bits::from_vec(words);
                        bits.truncate(len);
                        bits
                    })
                    .collect()
            })
            .collect();
        Self { layer_bits: lengths, data }
    }

    pub fn files(&self) -> usize {
        self.data.len()
    }

    pub fn layer(&self, file: usize, l: usize) -> &BitSlice<u64, Lsb0> {
        &self.data[file][l]
    }
}

/// What one user stores: `(file, layer, S) -> bits` for every `S` holding it.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheContents {
    pub user: usize,
    pub subfiles: BTreeMap<(usize, usize, UserSet), Bits>,
    /// Cached bits per file.
    pub bits_per_file: usize,
}

/// Slack allowed on top of the rounded cache size.
pub fn cache_slack(users: usize) -> usize {
    users << users
}

pub fn place(library: &FileLibrary, q: &QuantizedScheme) -> Result<Vec<CacheContents>> {
    if library.layer_bits != q.layer_bits {
        return Err(Error::Simulation("library and scheme disagree on layer lengths".into()));
    }
    let mut out = Vec::with_capacity(q.users);
    for user in 0..q.users {
        let mut subfiles = BTreeMap::new();
        for file in 0..library.files() {
            for l in 0..=user {
                for (s, range) in q.subfiles(l) {
                    if s.contains(user) && !range.is_empty() {
                        subfiles.insert((file, l, s), library.layer(file, l)[range].to_bitvec());
                    }
                }
            }
        }
        let bits_per_file = q.cached_bits(user);
        let limit = q.memory_bits[user] + cache_slack(q.users);
        if bits_per_file > limit {
            return Err(Error::Simulation(format!(
                "cache of user {} overflows: {bits_per_file} bits per file, limit {limit}",
                user + 1
            )));
        }
        out.push(CacheContents { user, subfiles, bits_per_file });
    }
    Ok(out)
}

/// One recipient's share of a multicast.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub recipient: usize,
    pub layer: usize,
    pub file: usize,
    pub subset: UserSet,
    /// Offset inside the subfile.
    pub offset: usize,
    pub len: usize,
    /// Position inside the payload.
    pub at: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub target: UserSet,
    pub parts: Vec<Part>,
    pub payload: Bits,
}

/// Uncoded bits for one user; `ranges` are `(layer, positions in the layer)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Unicast {
    pub user: usize,
    pub file: usize,
    pub ranges: Vec<(usize, Range<usize>)>,
    pub payload: Bits,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransmissionLog {
    pub signals: Vec<Signal>,
    pub unicasts: Vec<Unicast>,
}

impl TransmissionLog {
    pub fn total_bits(&self) -> usize {
        self.signals.iter().map(|s| s.payload.len()).sum::<usize>()
            + self.unicasts.iter().map(|u| u.payload.len()).sum::<usize>()
    }
}

fn xor_into(dst: &mut BitSlice<u64, Lsb0>, src: &BitSlice<u64, Lsb0>) {
    for (mut d, s) in dst.iter_mut().zip(src.iter().by_vals()) {
        *d ^= s;
    }
}

fn check_demand(demand: &[usize], users: usize, files: usize) -> Result<()> {
    if demand.len() != users {
        return Err(Error::Domain(format!("demand has {} entries, K = {users}", demand.len())));
    }
    let mut seen = vec![false; files];
    for &d in demand {
        if d >= files {
            return Err(Error::Domain(format!("demanded file {} does not exist (N = {files})", d + 1)));
        }
        if std::mem::replace(&mut seen[d], true) {
            return Err(Error::Domain(format!("file {} demanded twice", d + 1)));
        }
    }
    Ok(())
}

/// Parts of every multicast, grouped by target. Pieces of a subfile sent to
/// the same recipient are taken left to right in canonical order.
fn plan_parts(q: &QuantizedScheme, demand: &[usize]) -> BTreeMap<UserSet, Vec<Part>> {
    let mut cursor: BTreeMap<(usize, UserSet, usize), usize> = BTreeMap::new();
    let mut stream: BTreeMap<(UserSet, usize), usize> = BTreeMap::new();
    let mut out: BTreeMap<UserSet, Vec<Part>> = BTreeMap::new();
    for (&(l, t, s), &len) in &q.assignments {
        let j = t.minus(s).min().unwrap_or(0);
        let off = cursor.entry((l, s, j)).or_insert(0);
        let at = stream.entry((t, j)).or_insert(0);
        out.entry(t).or_default().push(Part {
            recipient: j,
            layer: l,
            file: demand[j],
            subset: s,
            offset: *off,
            len,
            at: *at,
        });
        *off += len;
        *at += len;
    }
    out
}

/// Builds every multicast and the unicasts that fill what is still missing.
pub fn deliver(library: &FileLibrary, q: &QuantizedScheme, demand: &[usize]) -> Result<TransmissionLog> {
    check_demand(demand, q.users, library.files())?;
    let plan = plan_parts(q, demand);
    let mut log = TransmissionLog::default();
    for (t, parts) in plan {
        let width = parts.iter().map(|p| p.at + p.len).max().unwrap_or(0);
        if width == 0 {
            continue;
        }
        let mut payload = bitvec![u64, Lsb0; 0; width];
        for p in &parts {
            let start = q.subfile(p.layer, p.subset).start + p.offset;
            xor_into(&mut payload[p.at..p.at + p.len], &library.layer(p.file, p.layer)[start..start + p.len]);
        }
        log.signals.push(Signal { target: t, parts, payload });
    }

    for (user, &file) in demand.iter().enumerate() {
        let mut ranges = Vec::new();
        let mut payload = Bits::new();
        for l in 0..=user {
            let covered = coverage(q, &log, user, l, &mut 0);
            for run in zero_runs(&covered) {
                payload.extend_from_bitslice(&library.layer(file, l)[run.clone()]);
                ranges.push((l, run));
            }
        }
        if !payload.is_empty() {
            log.unicasts.push(Unicast { user, file, ranges, payload });
        }
    }
    Ok(log)
}

/// Positions of layer `l` that `user` holds from its cache and its multicast
/// parts. Bits delivered twice are added to `redundant`.
fn coverage(q: &QuantizedScheme, log: &TransmissionLog, user: usize, l: usize, redundant: &mut usize) -> Bits {
    let mut cov = bitvec![u64, Lsb0; 0; q.layer_bits[l]];
    for (s, range) in q.subfiles(l) {
        if s.contains(user) {
            cov[range].fill(true);
        }
    }
    let mut mark = |cov: &mut Bits, range: Range<usize>| {
        *redundant += cov[range.clone()].count_ones();
        cov[range].fill(true);
    };
    for sig in log.signals.iter().filter(|s| s.target.contains(user)) {
        for p in sig.parts.iter().filter(|p| p.recipient == user && p.layer == l) {
            let start = q.subfile(l, p.subset).start + p.offset;
            mark(&mut cov, start..start + p.len);
        }
    }
    cov
}

fn zero_runs(bits: &BitSlice<u64, Lsb0>) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, b) in bits.iter().by_vals().enumerate() {
        match (b, start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                runs.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(s..bits.len());
    }
    runs
}

/// Bits `user` would receive although it already has them, counting cached
/// bits, multicast parts and unicasts.
pub fn redundancy_audit(q: &QuantizedScheme, log: &TransmissionLog, user: usize) -> usize {
    let mut redundant = 0;
    let mut covered: Vec<Bits> = (0..=user).map(|l| coverage(q, log, user, l, &mut redundant)).collect();
    for u in log.unicasts.iter().filter(|u| u.user == user) {
        for (l, range) in &u.ranges {
            if let Some(cov) = covered.get_mut(*l) {
                redundant += cov[range.clone()].count_ones();
                cov[range.clone()].fill(true);
            }
        }
    }
    redundant
}

/// Layers `1..=k` of the demanded file as reconstructed by user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub layers: Vec<Bits>,
    /// Bits of those layers never recovered.
    pub missing_bits: usize,
    /// Signals addressed to the user it could not strip for lack of side
    /// information.
    pub undecodable_signals: usize,
}

/// Recovers the user's demanded layers from its cache and the log. Missing
/// side information is reported in the result, never a panic.
pub fn decode(
    user: usize,
    cache: &CacheContents,
    log: &TransmissionLog,
    q: &QuantizedScheme,
    demand: &[usize],
) -> Decoded {
    let file = demand[user];
    let mut layers: Vec<Bits> = (0..=user).map(|l| bitvec![u64, Lsb0; 0; q.layer_bits[l]]).collect();
    let mut known: Vec<Bits> = layers.clone();

    for (&(f, l, s), bits) in &cache.subfiles {
        if f == file && l <= user {
            let start = q.subfile(l, s).start;
            let end = (start + bits.len()).min(layers[l].len());
            layers[l][start..end].copy_from_bitslice(&bits[..end - start]);
            known[l][start..end].fill(true);
        }
    }

    let mut undecodable_signals = 0;
    for sig in log.signals.iter().filter(|s| s.target.contains(user)) {
        let mut buf = sig.payload.clone();
        let mut ok = true;
        for p in sig.parts.iter().filter(|p| p.recipient != user) {
            let side = cache.subfiles.get(&(p.file, p.layer, p.subset)).and_then(|b| b.get(p.offset..p.offset + p.len));
            match (side, buf.get_mut(p.at..p.at + p.len)) {
                (Some(side), Some(dst)) => xor_into(dst, side),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            undecodable_signals += 1;
            continue;
        }
        for p in sig.parts.iter().filter(|p| p.recipient == user && p.layer <= user) {
            let start = q.subfile(p.layer, p.subset).start + p.offset;
            let (Some(src), true) = (buf.get(p.at..p.at + p.len), start + p.len <= layers[p.layer].len()) else {
                undecodable_signals += 1;
                continue;
            };
            layers[p.layer][start..start + p.len].copy_from_bitslice(src);
            known[p.layer][start..start + p.len].fill(true);
        }
    }

    for u in log.unicasts.iter().filter(|u| u.user == user) {
        let mut pos = 0;
        for (l, range) in &u.ranges {
            let len = range.len();
            if *l <= user && range.end <= layers[*l].len() && pos + len <= u.payload.len() {
                layers[*l][range.clone()].copy_from_bitslice(&u.payload[pos..pos + len]);
                known[*l][range.clone()].fill(true);
            }
            pos += len;
        }
    }

    let missing_bits = known.iter().map(|k| k.count_zeros()).sum();
    Decoded { layers, missing_bits, undecodable_signals }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserStatus {
    /// 1-based user label.
    pub user: usize,
    pub decoded: bool,
    pub missing_bits: usize,
    pub wrong_bits: usize,
    pub redundant_bits: usize,
    pub undecodable_signals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub file_size: usize,
    pub seed: u64,
    pub users: Vec<UserStatus>,
    pub measured_load: f64,
    pub predicted_load: f64,
    pub max_discrepancy: f64,
    /// Allowed discrepancy, `C / F` with `C` the scheme's variable count.
    pub tolerance: f64,
    pub variable_count: usize,
    /// Set when the pipeline stopped before decoding (e.g. cache overflow).
    pub failure: Option<String>,
}

/// Compares a user's reconstruction with the library.
pub fn check_user(
    library: &FileLibrary,
    q: &QuantizedScheme,
    log: &TransmissionLog,
    decoded: &Decoded,
    user: usize,
    demand: &[usize],
) -> UserStatus {
    let wrong_bits = decoded
        .layers
        .iter()
        .enumerate()
        .map(|(l, bits)| {
            let truth = library.layer(demand[user], l);
            bits.iter().by_vals().zip(truth.iter().by_vals()).filter(|(a, b)| a != b).count()
        })
        .sum();
    let redundant_bits = redundancy_audit(q, log, user);
    UserStatus {
        user: user + 1,
        decoded: wrong_bits == 0 && decoded.missing_bits == 0 && decoded.undecodable_signals == 0,
        missing_bits: decoded.missing_bits,
        wrong_bits,
        redundant_bits,
        undecodable_signals: decoded.undecodable_signals,
    }
}

/// Runs quantize, place, deliver and decode for the demand `(1, 2, …, K)`.
pub fn verify(
    inst: &ProblemInstance,
    scheme: &SchemeSolution,
    file_size: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if scheme.users != inst.users {
        return Err(Error::Domain(format!("scheme has K = {}, instance has K = {}", scheme.users, inst.users)));
    }
    let tolerance = scheme.variable_count() as f64 / file_size.max(1) as f64;
    let failed = |msg: String| VerificationReport {
        passed: false,
        file_size,
        seed,
        users: Vec::new(),
        measured_load: f64::NAN,
        predicted_load: scheme.objective,
        max_discrepancy: f64::NAN,
        tolerance,
        variable_count: scheme.variable_count(),
        failure: Some(msg),
    };
    match run(inst, scheme, file_size, seed) {
        Ok(report) => Ok(report),
        Err(Error::Simulation(msg)) => Ok(failed(msg)),
        Err(e) => Err(e),
    }
}

fn run(inst: &ProblemInstance, scheme: &SchemeSolution, file_size: usize, seed: u64) -> Result<VerificationReport> {
    let q = quantize(scheme, file_size)?;
    let library = FileLibrary::generate(inst.files, &scheme.rates, file_size, seed);
    let caches = place(&library, &q)?;
    let demand: Vec<usize> = (0..q.users).collect();
    let log = deliver(&library, &q, &demand)?;
    let users: Vec<UserStatus> = (0..q.users)
        .map(|k| {
            let decoded = decode(k, &caches[k], &log, &q, &demand);
            check_user(&library, &q, &log, &decoded, k, &demand)
        })
        .collect();
    let measured_load = log.total_bits() as f64 / file_size as f64;
    let max_discrepancy = (measured_load - scheme.objective).abs();
    let tolerance = q.variable_count as f64 / file_size as f64;
    let passed = users.iter().all(|u| u.decoded && u.redundant_bits == 0) && max_discrepancy <= tolerance;
    Ok(VerificationReport {
        passed,
        file_size,
        seed,
        users,
        measured_load,
        predicted_load: scheme.objective,
        max_discrepancy,
        tolerance,
        variable_count: q.variable_count,
        failure: None,
    })
}
