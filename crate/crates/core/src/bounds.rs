//! Cut-set lower bounds on the delivery load.

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::model::RateProfile;
use crate::subset::UserSet;

/// Enumeration over user subsets is exact; larger systems are refused.
pub const MAX_BOUND_USERS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// Bound clamped at zero.
    pub value: f64,
    /// Unclamped value of the max over user subsets.
    pub raw: f64,
    /// Subset attaining the max at `memories`.
    pub binding_set: UserSet,
    /// Memory vector the bound was evaluated at (the minimizer for budgets).
    pub memories: Vec<f64>,
}

fn check_users(k: usize) -> Result<()> {
    if k == 0 || k > MAX_BOUND_USERS {
        return Err(Error::Domain(format!("cut-set enumeration supports 1..={MAX_BOUND_USERS} users, got {k}")));
    }
    Ok(())
}

/// `N / ⌊N/|U|⌋`, the memory weight of a cut through `|U|` users.
fn cut_weight(files: usize, size: usize) -> f64 {
    files as f64 / (files / size) as f64
}

fn cut_value(rates: &[f64], m: &[f64], files: usize, u: UserSet) -> f64 {
    let r: f64 = u.iter().map(|k| rates[k]).sum();
    let mem: f64 = u.iter().map(|k| m[k]).sum();
    r - cut_weight(files, u.len()) * mem
}

fn best_cut(rates: &[f64], m: &[f64], files: usize) -> (f64, UserSet) {
    let all = UserSet::range(0, rates.len());
    let mut best = (f64::NEG_INFINITY, UserSet::EMPTY);
    for u in all.subsets().skip(1) {
        let v = cut_value(rates, m, files, u);
        if v > best.0 {
            best = (v, u);
        }
    }
    best
}

/// Bound for fixed cache sizes: `max_U Σ_{k∈U} r_k - N Σ_{k∈U} m_k / ⌊N/|U|⌋`.
pub fn cutset_fixed(rates: &RateProfile, files: usize, m: &[f64]) -> Result<BoundReport> {
    let k = rates.users();
    check_users(k)?;
    if m.len() != k {
        return Err(Error::Domain(format!("expected {k} memories, got {}", m.len())));
    }
    if files < k {
        return Err(Error::Domain(format!("N = {files} < K = {k}")));
    }
    let (raw, binding_set) = best_cut(rates.rates(), m, files);
    Ok(BoundReport { value: raw.max(0.0), raw, binding_set, memories: m.to_vec() })
}

/// Bound for a total budget: the fixed-memory bound minimized over every
/// split of `m_tot` with `0 ≤ m_k ≤ r_k`. Solved as an epigraph LP whose cut
/// rows are generated lazily from the most violated subset.
pub fn cutset_budget(rates: &RateProfile, files: usize, m_tot: f64) -> Result<BoundReport> {
    let k = rates.users();
    check_users(k)?;
    if files < k {
        return Err(Error::Domain(format!("N = {files} < K = {k}")));
    }
    let total = rates.total_rate();
    if !m_tot.is_finite() || m_tot < -1e-12 || m_tot > total + 1e-12 {
        return Err(Error::Domain(format!("budget {m_tot} outside [0, {total}]")));
    }
    let m_tot = m_tot.clamp(0.0, total);
    let r = rates.rates();

    let mut lp = LinearProgram::new();
    let mem: Vec<usize> = (0..k).map(|i| lp.add_var(0.0, 0.0, r[i], format!("m{}", i + 1))).collect();
    let z = lp.add_var(1.0, -(files as f64) * total - 1.0, total + 1.0, "z");
    lp.add_eq(mem.iter().map(|&c| (c, 1.0)).collect(), m_tot);

    let add_cut = |lp: &mut LinearProgram, u: UserSet| {
        let w = cut_weight(files, u.len());
        let mut terms: Vec<(usize, f64)> = u.iter().map(|i| (mem[i], -w)).collect();
        terms.push((z, -1.0));
        let rhs: f64 = -u.iter().map(|i| r[i]).sum::<f64>();
        lp.add_le(terms, rhs);
    };
    let all = UserSet::range(0, k);
    add_cut(&mut lp, all);
    for i in 0..k {
        add_cut(&mut lp, UserSet::singleton(i));
    }

    let max_rounds = (1usize << k) + 1;
    for _ in 0..max_rounds {
        let sol = solve_lp(&lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::NotOptimal(sol.status));
        }
        let m: Vec<f64> = mem.iter().map(|&c| sol.x[c]).collect();
        let (worst, u) = best_cut(r, &m, files);
        if worst <= sol.x[z] + 1e-11 {
            return Ok(BoundReport { value: worst.max(0.0), raw: worst, binding_set: u, memories: m });
        }
        add_cut(&mut lp, u);
    }
    Err(Error::Solver("cut generation did not converge".into()))
}

/// Three-user closed form of [`cutset_budget`].
pub fn cutset_k3(rates: &RateProfile, files: usize, m_tot: f64) -> Result<f64> {
    if rates.users() != 3 {
        return Err(Error::Domain(format!("closed form needs K = 3, got {}", rates.users())));
    }
    if files < 3 {
        return Err(Error::Domain(format!("closed form needs N ≥ 3, got {files}")));
    }
    let r = rates.rates();
    let n = files as f64;
    let third = (files / 3) as f64;
    let half = (files / 2) as f64;
    let sum: f64 = r.iter().sum();
    let all_users = sum - n / third * m_tot;
    let mixed = (half * (r[0] + r[1]) + n * r[2]) / (n + half) - n / (n + half) * m_tot;
    let single = (sum - m_tot) / 3.0;
    Ok(all_users.max(mixed).max(single))
}
