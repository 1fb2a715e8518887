//! Separation-based comparison schemes: per-layer cache splits (PCA, OCA)
//! followed by delivery that never mixes layers.
//!
//! The per-layer delivery is the exact intra-layer LP, which is at least as
//! good as any concrete intra-layer scheme, so gaps to the joint design are
//! conservative.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::RateProfile;
use crate::scheme::build_intra_layer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Proportional cache allocation.
    Pca,
    /// Ordered cache allocation.
    Oca,
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::Pca => "pca",
            Baseline::Oca => "oca",
        })
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(Baseline::Pca),
            "oca" => Ok(Baseline::Oca),
            other => Err(Error::Parse(format!("unknown baseline {other:?}"))),
        }
    }
}

fn check_memories(m: &[f64], rates: &RateProfile) -> Result<()> {
    if m.len() != rates.users() {
        return Err(Error::Domain(format!("expected {} memories, got {}", rates.users(), m.len())));
    }
    for (k, &mk) in m.iter().enumerate() {
        let rk = rates.rate(k);
        if !mk.is_finite() || mk < 0.0 || mk > rk + 1e-12 {
            return Err(Error::Domain(format!("m_{} = {mk} outside [0, {rk}]", k + 1)));
        }
    }
    Ok(())
}

/// `m[k][l] = f_l m_k / r_k` for every layer user `k` needs.
pub fn pca_split(m: &[f64], rates: &RateProfile) -> Result<Vec<Vec<f64>>> {
    check_memories(m, rates)?;
    let k = rates.users();
    let mut out = vec![vec![0.0; k]; k];
    for (user, row) in out.iter_mut().enumerate() {
        let rk = rates.rate(user);
        if rk == 0.0 {
            if m[user] > 0.0 {
                return Err(Error::Domain(format!("user {} has zero rate but m = {}", user + 1, m[user])));
            }
            continue;
        }
        for (l, cell) in row.iter_mut().enumerate().take(user + 1) {
            *cell = rates.layer_size(l) * m[user] / rk;
        }
    }
    Ok(out)
}

/// Fills layers `1, 2, …` in order until each user's cache is used up.
pub fn oca_split(m: &[f64], rates: &RateProfile) -> Result<Vec<Vec<f64>>> {
    check_memories(m, rates)?;
    let k = rates.users();
    let mut out = vec![vec![0.0; k]; k];
    for (user, row) in out.iter_mut().enumerate() {
        let mut left = m[user].min(rates.rate(user));
        for (l, cell) in row.iter_mut().enumerate().take(user + 1) {
            let take = rates.layer_size(l).min(left);
            *cell = take;
            left -= take;
        }
        // put any round-off residue back on the last filled layer
        if left > 0.0 {
            if let Some(cell) = row[..=user].iter_mut().rev().find(|c| **c > 0.0) {
                *cell += left;
            }
        }
    }
    Ok(out)
}

pub fn split(method: Baseline, m: &[f64], rates: &RateProfile) -> Result<Vec<Vec<f64>>> {
    match method {
        Baseline::Pca => pca_split(m, rates),
        Baseline::Oca => oca_split(m, rates),
    }
}

/// Load of the split followed by optimal intra-layer delivery.
pub fn baseline_load(method: Baseline, m: &[f64], rates: &RateProfile) -> Result<f64> {
    let per_layer = split(method, m, rates)?;
    let models = build_intra_layer(rates, &per_layer)?;
    let loads: Result<Vec<f64>> = models.par_iter().map(|model| Ok(model.solve()?.objective)).collect();
    Ok(loads?.iter().sum())
}
