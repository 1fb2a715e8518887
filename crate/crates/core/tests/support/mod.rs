#![allow(dead_code)]

use hetcache::lp::LinearProgram;
use hetcache::model::RateProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn reference_rates() -> RateProfile {
    RateProfile::new(&[0.5, 0.7, 1.0]).unwrap()
}

/// Rates with distinct, well separated layer sizes in `(0, 1]`.
pub fn random_rates(rng: &mut impl Rng, k: usize) -> RateProfile {
    loop {
        let mut r: Vec<f64> = (0..k).map(|_| (rng.gen_range(5..=100) as f64) / 100.0).collect();
        r.sort_by(f64::total_cmp);
        let mut sizes = vec![r[0]];
        sizes.extend(r.windows(2).map(|w| w[1] - w[0]));
        if sizes.iter().all(|&f| f >= 0.04) {
            return RateProfile::new(&r).unwrap();
        }
    }
}

/// Small LP with integer data in `[-5, 5]` and finite boxes.
pub fn random_lp(seed: u64) -> LinearProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=4);
    let mut lp = LinearProgram::new();
    for j in 0..n {
        let lo = rng.gen_range(-5..=0) as f64;
        let hi = lo + rng.gen_range(0..=5) as f64;
        lp.add_var(rng.gen_range(-5..=5) as f64, lo, hi, format!("x{j}"));
    }
    let rows = rng.gen_range(0..=4);
    let eqs = if n > 1 { rng.gen_range(0..=1) } else { 0 };
    for r in 0..rows + eqs {
        let mut coeffs: Vec<(usize, f64)> =
            (0..n).map(|j| (j, rng.gen_range(-5..=5) as f64)).filter(|&(_, a)| a != 0.0).collect();
        if coeffs.is_empty() {
            coeffs.push((0, 1.0));
        }
        let rhs = rng.gen_range(-5..=5) as f64;
        if r < eqs {
            lp.add_eq(coeffs, rhs);
        } else if rng.gen_bool(0.5) {
            lp.add_le(coeffs, rhs);
        } else {
            lp.add_ge(coeffs, rhs);
        }
    }
    lp
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                if f != 0.0 {
                    let (pivot, row) = if r < c {
                        let (lo, hi) = a.split_at_mut(c);
                        (&hi[0], &mut lo[r])
                    } else {
                        let (lo, hi) = a.split_at_mut(r);
                        (&lo[c], &mut hi[0])
                    };
                    for (x, p) in row[c..].iter_mut().zip(&pivot[c..]) {
                        *x -= f * p;
                    }
                    b[r] -= f * b[c];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Exhaustive vertex enumeration: every choice of `n` linearly independent
/// active constraints (equalities always active) is solved and kept if
/// feasible. Returns the best objective, or `None` when infeasible. All
/// variables are boxed, so a feasible LP attains its optimum at a vertex.
pub fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // candidate hyperplanes: (coefficients, rhs)
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    let dense = |coeffs: &[(usize, f64)]| {
        let mut d = vec![0.0; n];
        for &(j, a) in coeffs {
            d[j] += a;
        }
        d
    };
    let eqs: Vec<(Vec<f64>, f64)> = lp.eq_rows.iter().map(|r| (dense(&r.coeffs), r.rhs)).collect();
    for r in &lp.ub_rows {
        planes.push((dense(&r.coeffs), r.rhs));
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lo));
        planes.push((e, hi));
    }
    if eqs.len() > n {
        return None;
    }
    let mut best: Option<f64> = None;
    for combo in combinations(planes.len(), n - eqs.len()) {
        let mut a: Vec<Vec<f64>> = eqs.iter().map(|e| e.0.clone()).collect();
        let mut b: Vec<f64> = eqs.iter().map(|e| e.1).collect();
        for &c in &combo {
            a.push(planes[c].0.clone());
            b.push(planes[c].1);
        }
        let Some(x) = solve_square(a, b) else { continue };
        if lp.max_violation(&x) <= 1e-9 {
            let obj = lp.objective_value(&x);
            best = Some(best.map_or(obj, |v: f64| v.min(obj)));
        }
    }
    best
}
