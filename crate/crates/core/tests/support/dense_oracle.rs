//! Reference LP solver for tests: dense two-phase tableau simplex with
//! Bland's rule. Slow and simple on purpose; shares no code with the crate.

#![allow(dead_code)]

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sense {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, PartialEq)]
pub enum Outcome {
    Optimal(f64, Vec<f64>),
    Infeasible,
    Unbounded,
}

/// max cᵀx s.t. rows, lo <= x <= hi (finite bounds).
pub fn maximize(c: &[f64], rows: &[(Vec<(usize, f64)>, Sense, f64)], lo: &[f64], hi: &[f64]) -> Outcome {
    let n = c.len();
    // shift x = lo + z, 0 <= z <= hi - lo
    let mut all: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for (coefs, sense, rhs) in rows {
        let mut dense = vec![0.0; n];
        for &(j, v) in coefs {
            dense[j] += v;
        }
        let shift: f64 = dense.iter().zip(lo).map(|(a, l)| a * l).sum();
        all.push((dense, *sense, rhs - shift));
    }
    for j in 0..n {
        let mut dense = vec![0.0; n];
        dense[j] = 1.0;
        all.push((dense, Sense::Le, hi[j] - lo[j]));
    }
    for r in all.iter_mut() {
        if r.2 < 0.0 {
            r.0.iter_mut().for_each(|v| *v = -*v);
            r.2 = -r.2;
            r.1 = match r.1 {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }
    let m = all.len();
    let n_slack = all.iter().filter(|r| r.1 != Sense::Eq).count();
    let n_art = all.iter().filter(|r| r.1 != Sense::Le).count();
    let width = n + n_slack + n_art;
    let mut t = vec![vec![0.0; width + 1]; m];
    let mut basis = vec![0usize; m];
    let mut is_art = vec![false; width];
    let (mut s, mut a) = (n, n + n_slack);
    for (i, (coefs, sense, rhs)) in all.iter().enumerate() {
        t[i][..n].copy_from_slice(coefs);
        t[i][width] = *rhs;
        match sense {
            Sense::Le => {
                t[i][s] = 1.0;
                basis[i] = s;
                s += 1;
            }
            Sense::Ge => {
                t[i][s] = -1.0;
                s += 1;
                t[i][a] = 1.0;
                is_art[a] = true;
                basis[i] = a;
                a += 1;
            }
            Sense::Eq => {
                t[i][a] = 1.0;
                is_art[a] = true;
                basis[i] = a;
                a += 1;
            }
        }
    }
    let eps = 1e-9;
    // phase one: max -sum(art)
    let cost1: Vec<f64> = (0..width).map(|j| if is_art[j] { -1.0 } else { 0.0 }).collect();
    if !run(&mut t, &mut basis, &cost1, &vec![true; width], eps) {
        return Outcome::Unbounded;
    }
    let infeas: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| is_art[b])
        .map(|(i, _)| t[i][width])
        .sum();
    if infeas > 1e-7 {
        return Outcome::Infeasible;
    }
    // drive zero-level artificials out where possible
    for i in 0..m {
        if is_art[basis[i]] {
            if let Some(j) = (0..width).find(|&j| !is_art[j] && t[i][j].abs() > eps) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }
    let mut cost2 = vec![0.0; width];
    cost2[..n].copy_from_slice(c);
    let allowed: Vec<bool> = (0..width).map(|j| !is_art[j]).collect();
    if !run(&mut t, &mut basis, &cost2, &allowed, eps) {
        return Outcome::Unbounded;
    }
    let mut z = vec![0.0; width];
    for (i, &b) in basis.iter().enumerate() {
        z[b] = t[i][width];
    }
    let x: Vec<f64> = (0..n).map(|j| lo[j] + z[j]).collect();
    let obj = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Outcome::Optimal(obj, x)
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, q: usize) {
    let p = t[r][q];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let prow = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r {
            let f = row[q];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
    }
    basis[r] = q;
}

/// Returns false when unbounded.
fn run(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: &[bool], eps: f64) -> bool {
    let width = cost.len();
    loop {
        let mut entering = None;
        for j in 0..width {
            if !allowed[j] || basis.contains(&j) {
                continue;
            }
            let mut d = cost[j];
            for (i, &b) in basis.iter().enumerate() {
                d -= cost[b] * t[i][j];
            }
            if d > eps {
                entering = Some(j);
                break;
            }
        }
        let Some(q) = entering else { return true };
        let mut leave: Option<(usize, f64)> = None;
        for (i, row) in t.iter().enumerate() {
            if row[q] > eps {
                let ratio = row[width] / row[q];
                match leave {
                    Some((k, r)) if ratio > r + 1e-12 || (ratio >= r - 1e-12 && basis[i] > basis[k]) => {}
                    _ => leave = Some((i, ratio)),
                }
            }
        }
        let Some((r, _)) = leave else { return false };
        pivot(t, basis, r, q);
    }
}
