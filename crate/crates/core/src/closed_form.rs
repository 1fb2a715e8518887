//! Closed-form evaluators for the budgeted problem.
//!
//! With `n_l = K - l` users needing layer `l` (0-based), spending `t·f_l`
//! memory on that layer and running the Maddah-Ali–Niesen scheme inside it
//! costs `g_l(t)·f_l` with `g_l(t) = (n_l - t)/(1 + t)` at integer `t`, and
//! the piecewise-linear interpolation `g̃_l` in between. The minimum load for
//! a budget is `min Σ g̃_l(t_l) f_l` subject to `Σ t_l f_l = m_tot`, a
//! separable convex problem that the greedy marginal rule solves exactly.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{MemoryAllocation, RateProfile};

/// Memory budget expressed as per-layer replication levels.
#[derive(Debug, Clone, PartialEq)]
pub struct TDecomposition {
    /// `t_l`, non-increasing, `t_l ≤ K - l`.
    pub levels: Vec<f64>,
    /// Integer level `x ≥ 1` currently being filled.
    pub level: usize,
    /// 0-based index of the layer being raised to `level`.
    pub boundary_layer: usize,
    /// Fraction of the boundary layer already raised, in `[0, 1]`.
    pub alpha: f64,
}

fn check_budget(m_tot: f64, rates: &RateProfile) -> Result<f64> {
    let total = rates.total_rate();
    let tol = 1e-12 * (1.0 + total);
    if !m_tot.is_finite() || m_tot < -tol || m_tot > total + tol {
        return Err(Error::Domain(format!("budget {m_tot} outside [0, {total}]")));
    }
    Ok(m_tot.clamp(0.0, total))
}

fn width(k: usize, l: usize) -> usize {
    k - l
}

/// `g_l(t)` at integer replication level `t` for a layer shared by `n` users.
fn man_load(n: usize, t: usize) -> f64 {
    (n - t) as f64 / (1 + t) as f64
}

/// `g̃` at real `t ∈ [0, n]`.
fn man_load_interp(n: usize, t: f64) -> f64 {
    let lo = (t.floor() as usize).min(n);
    if lo == n {
        return 0.0;
    }
    let frac = t - lo as f64;
    (1.0 - frac) * man_load(n, lo) + frac * man_load(n, lo + 1)
}

/// Order in which the greedy raises layers by one unit each. Zero-width
/// layers never appear.
pub fn greedy_schedule(rates: &RateProfile) -> Vec<usize> {
    let k = rates.users();
    let mut levels = vec![0usize; k];
    let mut out = Vec::new();
    loop {
        // slope of raising layer l from t: (n+1)/((t+1)(t+2)), compared exactly
        let mut best: Option<(usize, u64, u64)> = None;
        for l in 0..k {
            let n = width(k, l);
            let t = levels[l];
            if rates.layer_size(l) <= 0.0 || t >= n {
                continue;
            }
            let num = (n + 1) as u64;
            let den = ((t + 1) * (t + 2)) as u64;
            let better = match best {
                None => true,
                Some((bl, bn, bd)) => match (num * bd).cmp(&(bn * den)) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => t < levels[bl],
                },
            };
            if better {
                best = Some((l, num, den));
            }
        }
        let Some((l, _, _)) = best else { break };
        levels[l] += 1;
        out.push(l);
    }
    out
}

pub fn t_decomposition(m_tot: f64, rates: &RateProfile) -> Result<TDecomposition> {
    let m_tot = check_budget(m_tot, rates)?;
    let k = rates.users();
    let mut levels = vec![0.0; k];
    let mut remaining = m_tot;
    let mut last = None;
    let mut fractional = None;
    for l in greedy_schedule(rates) {
        if remaining <= 0.0 {
            break;
        }
        let f = rates.layer_size(l);
        if remaining >= f {
            levels[l] += 1.0;
            remaining -= f;
            last = Some(l);
        } else {
            levels[l] += remaining / f;
            remaining = 0.0;
            fractional = Some(l);
        }
    }
    // zero-width layers take the largest level the ordering allows
    let mut cap = k as f64;
    for (l, level) in levels.iter_mut().enumerate() {
        if rates.layer_size(l) <= 0.0 {
            *level = cap.floor().min(width(k, l) as f64);
        }
        cap = *level;
    }
    let (level, boundary_layer, alpha) = match (fractional, last) {
        (Some(y), _) => {
            let base = levels[y].floor();
            (base as usize + 1, y, levels[y] - base)
        }
        (None, Some(y)) => (levels[y].round() as usize, y, 1.0),
        (None, None) => (1, 0, 0.0),
    };
    Ok(TDecomposition { levels, level, boundary_layer, alpha })
}

/// Minimum worst-case load for a memory budget (lower convex envelope of the
/// integer-level points).
pub fn theorem1_load(m_tot: f64, rates: &RateProfile) -> Result<f64> {
    let dec = t_decomposition(m_tot, rates)?;
    let k = rates.users();
    Ok((0..k).map(|l| man_load_interp(width(k, l), dec.levels[l]) * rates.layer_size(l)).sum())
}

/// Load at integer levels, `Σ (n_l - t_l)/(1 + t_l) f_l`.
pub fn load_at_levels(levels: &[usize], rates: &RateProfile) -> f64 {
    let k = rates.users();
    levels.iter().enumerate().map(|(l, &t)| man_load(width(k, l), t) * rates.layer_size(l)).sum()
}

/// Equal per-layer memories: `m_k^{(l)} = t_l f_l / (K - l)` for users `k ≥ l`.
pub fn threshold_allocation(m_tot: f64, rates: &RateProfile) -> Result<MemoryAllocation> {
    let dec = t_decomposition(m_tot, rates)?;
    let k = rates.users();
    let mut per_layer = vec![vec![0.0; k]; k];
    for l in 0..k {
        let share = dec.levels[l] * rates.layer_size(l) / width(k, l) as f64;
        for row in per_layer.iter_mut().skip(l) {
            row[l] = share;
        }
    }
    Ok(MemoryAllocation::from_layers(per_layer))
}

/// Breakpoints `(m_tot, load)` of the optimal trade-off, ascending in `m_tot`.
pub fn corner_points(rates: &RateProfile) -> Vec<(f64, f64)> {
    let k = rates.users();
    let mut levels = vec![0usize; k];
    let mut m = 0.0;
    let mut out = vec![(0.0, load_at_levels(&levels, rates))];
    for l in greedy_schedule(rates) {
        levels[l] += 1;
        m += rates.layer_size(l);
        out.push((m, load_at_levels(&levels, rates)));
    }
    out
}

/// Equal-demand load with `K` users and total budget `m_tot ∈ [0, K]`.
pub fn lemma1_load(users: usize, m_tot: f64) -> Result<f64> {
    let kf = users as f64;
    if users == 0 || !m_tot.is_finite() || m_tot < -1e-12 || m_tot > kf + 1e-12 {
        return Err(Error::Domain(format!("budget {m_tot} outside [0, {users}]")));
    }
    Ok(chi(users, m_tot.clamp(0.0, kf)))
}

/// `χ(t) = max_j {(2n - j + 1)/(j + 1) - (n + 1) t/(j (j + 1))}` over `j ∈ [n]`.
fn chi(n: usize, t: f64) -> f64 {
    let nf = n as f64;
    (1..=n)
        .map(|j| {
            let jf = j as f64;
            (2.0 * nf - jf + 1.0) / (jf + 1.0) - (nf + 1.0) * t / (jf * (jf + 1.0))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solves the per-layer allocation problem `min Σ χ_l(t_l) f_l` s.t.
/// `Σ t_l f_l ≤ m_tot`, `0 ≤ t_l ≤ K - l`, by filling unit segments of every
/// layer in order of steepness, then evaluates `χ` directly.
pub fn simplified_budget_solve(m_tot: f64, rates: &RateProfile) -> Result<(Vec<f64>, f64)> {
    let m_tot = check_budget(m_tot, rates)?;
    let k = rates.users();
    // (steepness numerator, denominator, segment j, layer)
    let mut segments: Vec<(u64, u64, usize, usize)> = Vec::new();
    for l in 0..k {
        if rates.layer_size(l) <= 0.0 {
            continue;
        }
        let n = width(k, l);
        for j in 1..=n {
            segments.push(((n + 1) as u64, (j * (j + 1)) as u64, j, l));
        }
    }
    segments.sort_by(|a, b| (b.0 * a.1).cmp(&(a.0 * b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
    let mut t = vec![0.0; k];
    let mut remaining = m_tot;
    for &(_, _, _, l) in &segments {
        if remaining <= 0.0 {
            break;
        }
        let f = rates.layer_size(l);
        let step = (remaining / f).min(1.0);
        t[l] += step;
        remaining -= step * f;
    }
    let load = (0..k).map(|l| chi(width(k, l), t[l]) * rates.layer_size(l)).sum();
    Ok((t, load))
}
