//! Problem instances, the Hamming rate-distortion function and the layered
//! file geometry shared by every other module.
//!
//! Rates are in bits per source sample (base-2 logarithms). Memory values
//! are normalized by the library size, so user `k` may hold at most `r_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Slack allowed when comparing user-supplied reals against their bounds.
const INPUT_TOL: f64 = 1e-12;

/// Binary entropy in bits, with `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Rate-distortion function of a uniform `q`-ary source under Hamming
/// distortion: `log2 q - H(D) - D log2(q-1)`.
pub fn rho(distortion: f64, q: u32) -> Result<f64> {
    if q < 2 {
        return Err(Error::Domain(format!("alphabet size q={q} must be at least 2")));
    }
    let d_max = 1.0 - 1.0 / q as f64;
    if !(0.0..=d_max + INPUT_TOL).contains(&distortion) || distortion.is_nan() {
        return Err(Error::Domain(format!("distortion {distortion} outside [0, {d_max}] for q={q}")));
    }
    let d = distortion.min(d_max);
    let qf = q as f64;
    let rate = qf.log2() - binary_entropy(d) - d * (qf - 1.0).log2();
    Ok(rate.max(0.0))
}

/// Inverse of [`rho`] on its monotone branch `[0, 1 - 1/q]`, by bisection.
pub fn rho_inverse(rate: f64, q: u32) -> Result<f64> {
    if q < 2 {
        return Err(Error::Domain(format!("alphabet size q={q} must be at least 2")));
    }
    let r_max = (q as f64).log2();
    if !(0.0..=r_max + INPUT_TOL).contains(&rate) || rate.is_nan() {
        return Err(Error::Domain(format!("rate {rate} outside [0, {r_max}] for q={q}")));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0 - 1.0 / q as f64);
    // rho is flat to second order at D_max, so bisection cannot resolve rate 0
    if rate <= 0.0 {
        return Ok(hi);
    }
    // rho is decreasing: rho(lo) >= rate >= rho(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rho(mid, q)? > rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Per-layer target rates `r` and the layer sizes `f` (first differences).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    rates: Vec<f64>,
    layer_sizes: Vec<f64>,
}

impl RateProfile {
    pub fn new(rates: &[f64]) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::Domain("rate vector is empty".into()));
        }
        let mut prev = 0.0;
        let mut layer_sizes = Vec::with_capacity(rates.len());
        for (i, &r) in rates.iter().enumerate() {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::Domain(format!("rate r_{} = {r} is negative", i + 1)));
            }
            if r < prev {
                return Err(Error::Domain(format!(
                    "rates must be non-decreasing: r_{} = {r} < r_{} = {prev}",
                    i + 1,
                    i
                )));
            }
            layer_sizes.push(r - prev);
            prev = r;
        }
        Ok(Self { rates: rates.to_vec(), layer_sizes })
    }

    /// Number of users (equivalently, layers).
    pub fn users(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn rate(&self, k: usize) -> f64 {
        self.rates[k]
    }

    pub fn layer_sizes(&self) -> &[f64] {
        &self.layer_sizes
    }

    pub fn layer_size(&self, l: usize) -> f64 {
        self.layer_sizes[l]
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// Alias kept for call sites that read better as a verb.
pub fn make_rate_profile(rates: &[f64]) -> Result<RateProfile> {
    RateProfile::new(rates)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MemoryConstraint {
    /// Normalized total memory the server may distribute.
    Budget(f64),
    /// Fixed normalized cache size per user.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub users: usize,
    pub files: usize,
    pub q: u32,
    pub rates: RateProfile,
    pub constraint: MemoryConstraint,
}

impl ProblemInstance {
    pub fn with_budget(files: usize, rates: &[f64], budget: f64) -> Result<Self> {
        let rates = RateProfile::new(rates)?;
        Ok(Self { users: rates.users(), files, q: 2, rates, constraint: MemoryConstraint::Budget(budget) })
    }

    pub fn with_memories(files: usize, rates: &[f64], memories: &[f64]) -> Result<Self> {
        let rates = RateProfile::new(rates)?;
        Ok(Self { users: rates.users(), files, q: 2, rates, constraint: MemoryConstraint::Fixed(memories.to_vec()) })
    }

    pub fn budget(&self) -> Option<f64> {
        match self.constraint {
            MemoryConstraint::Budget(b) => Some(b),
            MemoryConstraint::Fixed(_) => None,
        }
    }

    pub fn memories(&self) -> Option<&[f64]> {
        match &self.constraint {
            MemoryConstraint::Fixed(m) => Some(m),
            MemoryConstraint::Budget(_) => None,
        }
    }

    /// Checks every instance invariant and reports all violations at once.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let k = self.users;
        if k == 0 {
            out.push(Violation { field: "K", message: "K ≥ 1 violated".into() });
        }
        if self.rates.users() != k {
            out.push(Violation {
                field: "rates",
                message: format!("expected {k} rates, found {}", self.rates.users()),
            });
        }
        if self.files < k {
            out.push(Violation { field: "N", message: format!("N ≥ K violated (N = {}, K = {k})", self.files) });
        }
        if self.q < 2 {
            out.push(Violation { field: "q", message: format!("q ≥ 2 violated (q = {})", self.q) });
        } else {
            let r_max = (self.q as f64).log2();
            if let Some(r) = self.rates.rates().last() {
                if *r > r_max + INPUT_TOL {
                    out.push(Violation { field: "rates", message: format!("r_K = {r} exceeds log2 q = {r_max}") });
                }
            }
        }
        let total = self.rates.total_rate();
        match &self.constraint {
            MemoryConstraint::Budget(b) => {
                if !b.is_finite() || *b < -INPUT_TOL {
                    out.push(Violation { field: "budget", message: format!("budget {b} is negative") });
                } else if *b > total + INPUT_TOL {
                    out.push(Violation {
                        field: "budget",
                        message: format!("budget {b} exceeds Σ r_k = {}", fmt_short(total)),
                    });
                }
            }
            MemoryConstraint::Fixed(m) => {
                if m.len() != k {
                    out.push(Violation {
                        field: "memories",
                        message: format!("expected {k} memories, found {}", m.len()),
                    });
                }
                for (i, (&mk, &rk)) in m.iter().zip(self.rates.rates()).enumerate() {
                    if !mk.is_finite() || mk < -INPUT_TOL || mk > rk + INPUT_TOL {
                        out.push(Violation {
                            field: "memories",
                            message: format!("m_{} = {mk} outside [0, r_{} = {rk}]", i + 1, i + 1),
                        });
                    }
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn validated(self) -> Result<Self> {
        self.validate().map_err(Error::Invalid)?;
        Ok(self)
    }
}

pub fn validate_instance(inst: ProblemInstance) -> Result<ProblemInstance> {
    inst.validated()
}

fn fmt_short(x: f64) -> String {
    let s = format!("{x:.10}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Per-user and per-layer normalized cache memory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryAllocation {
    pub per_user: Vec<f64>,
    /// `per_layer[k][l]` is the memory user `k` dedicates to layer `l`; zero for `l > k`.
    pub per_layer: Vec<Vec<f64>>,
}

impl MemoryAllocation {
    pub fn from_layers(per_layer: Vec<Vec<f64>>) -> Self {
        let per_user = per_layer.iter().map(|row| row.iter().sum()).collect();
        Self { per_user, per_layer }
    }

    pub fn total(&self) -> f64 {
        self.per_user.iter().sum()
    }
}

/// On-disk instance description.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct InstanceFile {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "N")]
    pub files: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memories: Option<Vec<f64>>,
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Converts to a validated [`ProblemInstance`]. Distortions are mapped to
    /// rates once here.
    pub fn into_instance(self) -> Result<ProblemInstance> {
        let mut violations = Vec::new();
        let q = self.q.unwrap_or(2);
        let rates = match (&self.rates, &self.distortions) {
            (Some(r), None) => Some(r.clone()),
            (None, Some(d)) => {
                let mut rs = Vec::with_capacity(d.len());
                for (i, w) in d.windows(2).enumerate() {
                    if w[1] > w[0] {
                        violations.push(Violation {
                            field: "distortions",
                            message: format!("D must be non-increasing: D_{} < D_{}", i + 1, i + 2),
                        });
                    }
                }
                for &di in d {
                    match rho(di, q) {
                        Ok(r) => rs.push(r),
                        Err(e) => violations.push(Violation { field: "distortions", message: e.to_string() }),
                    }
                }
                Some(rs)
            }
            _ => {
                violations
                    .push(Violation { field: "rates", message: "exactly one of rates/distortions is required".into() });
                None
            }
        };
        let constraint = match (self.budget, &self.memories) {
            (Some(b), None) => Some(MemoryConstraint::Budget(b)),
            (None, Some(m)) => Some(MemoryConstraint::Fixed(m.clone())),
            _ => {
                violations
                    .push(Violation { field: "budget", message: "exactly one of budget/memories is required".into() });
                None
            }
        };
        if let Some(r) = &rates {
            if r.len() != self.users {
                violations.push(Violation {
                    field: "rates",
                    message: format!("expected K = {} entries, found {}", self.users, r.len()),
                });
            }
        }
        let profile = match rates.as_deref().map(RateProfile::new) {
            Some(Ok(p)) => Some(p),
            Some(Err(e)) => {
                violations.push(Violation { field: "rates", message: e.to_string() });
                None
            }
            None => None,
        };
        match (profile, constraint) {
            (Some(rates), Some(constraint)) if violations.is_empty() => {
                let inst = ProblemInstance { users: self.users, files: self.files, q, rates, constraint };
                inst.validated()
            }
            (Some(rates), Some(constraint)) => {
                let inst = ProblemInstance { users: self.users, files: self.files, q, rates, constraint };
                if let Err(mut more) = inst.validate() {
                    violations.append(&mut more);
                }
                Err(Error::Invalid(violations))
            }
            _ => Err(Error::Invalid(violations)),
        }
    }
}

impl From<&ProblemInstance> for InstanceFile {
    fn from(inst: &ProblemInstance) -> Self {
        let (budget, memories) = match &inst.constraint {
            MemoryConstraint::Budget(b) => (Some(*b), None),
            MemoryConstraint::Fixed(m) => (None, Some(m.clone())),
        };
        Self {
            users: inst.users,
            files: inst.files,
            q: Some(inst.q),
            rates: Some(inst.rates.rates().to_vec()),
            distortions: None,
            budget,
            memories,
        }
    }
}
