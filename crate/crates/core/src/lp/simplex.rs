//! Bounded-variable primal revised simplex.
//!
//! Every row gets a logical column so the problem reads `A x + s = b` with
//! bounds on `s` encoding the row kind. Phase one minimises the sum of bound
//! violations of basic variables starting from the all-logical basis; phase
//! two maximises the objective. The basis inverse is kept dense and updated
//! in product form, with periodic reinversion from the identity.
//!
//! Degenerate stalls are broken by widening bounds by small index-hashed
//! amounts; once the widened problem is optimal the true bounds come back and
//! a cleanup pass (with Bland's rule as the last resort) finishes the solve.

use super::{Basis, CscMatrix, LpError, LpProblem, LpSolution, LpStatus, RowKind, ToleranceSet, VarStatus};

const REINVERT_EVERY: usize = 100;
const STALL_LIMIT: usize = 50;
const SINGULAR_TOL: f64 = 1e-11;
const DRIFT_TOL: f64 = 1e-11;
const PERTURB: f64 = 1e-6;

/// Deterministic value in [0, 1) from a column index.
fn hash_unit(j: usize) -> f64 {
    let mut z = (j as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

pub fn solve_lp(p: &LpProblem, tol: &ToleranceSet) -> Result<LpSolution, LpError> {
    solve_lp_from(p, tol, None)
}

/// Solves starting from `start` when it fits the problem, else from the slack basis.
pub fn solve_lp_from(
    p: &LpProblem,
    tol: &ToleranceSet,
    start: Option<&Basis>,
) -> Result<LpSolution, LpError> {
    p.validate()?;
    let scaled = Scaled::new(p);
    let mut s = Simplex::new(&scaled, *tol);
    if let Some(b) = start {
        s.warm_start(b);
    }
    let status = s.run()?;
    Ok(s.extract(status, p, &scaled))
}

struct Scaled {
    a: CscMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    kinds: Vec<RowKind>,
    row: Vec<f64>,
    col: Vec<f64>,
}

impl Scaled {
    fn new(p: &LpProblem) -> Self {
        let (m, n) = (p.num_rows(), p.num_cols());
        let mut row = vec![1.0; m];
        let mut col = vec![1.0; n];
        let trip = p.matrix.triplets();
        for _ in 0..4 {
            let mut rmin = vec![f64::INFINITY; m];
            let mut rmax = vec![0.0f64; m];
            for &(i, j, v) in &trip {
                let a = v.abs() * col[j];
                rmin[i] = rmin[i].min(a);
                rmax[i] = rmax[i].max(a);
            }
            for i in 0..m {
                if rmax[i] > 0.0 {
                    row[i] = 1.0 / (rmin[i] * rmax[i]).sqrt();
                }
            }
            let mut cmin = vec![f64::INFINITY; n];
            let mut cmax = vec![0.0f64; n];
            for &(i, j, v) in &trip {
                let a = v.abs() * row[i];
                cmin[j] = cmin[j].min(a);
                cmax[j] = cmax[j].max(a);
            }
            for j in 0..n {
                if cmax[j] > 0.0 {
                    col[j] = 1.0 / (cmin[j] * cmax[j]).sqrt();
                }
            }
        }
        // powers of two keep the scaling exact
        for v in row.iter_mut().chain(col.iter_mut()) {
            *v = 2f64.powi(v.log2().round() as i32);
        }
        let mut a = p.matrix.clone();
        a.scale(&row, &col);
        Scaled {
            a,
            b: p.rhs.iter().zip(&row).map(|(b, r)| b * r).collect(),
            c: p.objective.iter().zip(&col).map(|(c, s)| c * s).collect(),
            lo: p.lower.iter().zip(&col).map(|(l, s)| l / s).collect(),
            hi: p.upper.iter().zip(&col).map(|(h, s)| h / s).collect(),
            kinds: p.row_kinds.clone(),
            row,
            col,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    One,
    Two,
}

struct Simplex<'a> {
    p: &'a Scaled,
    tol: ToleranceSet,
    m: usize,
    n: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    head: Vec<usize>,
    pos: Vec<Option<usize>>,
    /// Row-major dense basis inverse.
    binv: Vec<f64>,
    y: Vec<f64>,
    iterations: usize,
    since_reinvert: usize,
    max_iterations: usize,
    /// True bounds while the working ones are widened.
    saved_bounds: Option<(Vec<f64>, Vec<f64>)>,
    may_perturb: bool,
}

impl<'a> Simplex<'a> {
    fn new(p: &'a Scaled, tol: ToleranceSet) -> Self {
        let m = p.b.len();
        let n = p.c.len();
        let mut lo = p.lo.clone();
        let mut hi = p.hi.clone();
        for k in &p.kinds {
            let (l, h) = match k {
                RowKind::Eq => (0.0, 0.0),
                RowKind::Le => (0.0, f64::INFINITY),
                RowKind::Ge => (f64::NEG_INFINITY, 0.0),
            };
            lo.push(l);
            hi.push(h);
        }
        let mut x = vec![0.0; n + m];
        x[..n].copy_from_slice(&p.lo);
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let head: Vec<usize> = (n..n + m).collect();
        let mut pos = vec![None; n + m];
        for (i, &h) in head.iter().enumerate() {
            pos[h] = Some(i);
        }
        let max_iterations = tol.max_iterations.unwrap_or(50 * (n + m) + 10_000);
        let mut s = Simplex {
            p,
            tol,
            m,
            n,
            lo,
            hi,
            x,
            head,
            pos,
            binv,
            y: vec![0.0; m],
            iterations: 0,
            since_reinvert: 0,
            max_iterations,
            saved_bounds: None,
            may_perturb: true,
        };
        s.recompute_basic_values();
        s
    }

    fn warm_start(&mut self, b: &Basis) {
        let (n, m) = (self.n, self.m);
        if b.columns.len() != n || b.rows.len() > m {
            return;
        }
        let status = |j: usize| {
            if j < n {
                b.columns[j]
            } else {
                b.rows.get(j - n).copied().unwrap_or(VarStatus::Basic)
            }
        };
        let basic: Vec<usize> = (0..n + m).filter(|&j| status(j) == VarStatus::Basic).collect();
        if basic.len() != m {
            return;
        }
        for j in 0..n + m {
            let (lo, hi) = (self.lo[j], self.hi[j]);
            self.x[j] = match status(j) {
                VarStatus::Basic => 0.0,
                VarStatus::AtUpper if hi.is_finite() => hi,
                _ if lo.is_finite() => lo,
                _ if hi.is_finite() => hi,
                _ => 0.0,
            };
        }
        for p in self.pos.iter_mut() {
            *p = None;
        }
        for (i, &j) in basic.iter().enumerate() {
            self.pos[j] = Some(i);
        }
        self.head = basic;
        self.reinvert();
    }

    fn column(&self, j: usize) -> ColIter<'_> {
        if j < self.n {
            let (r, v) = self.p.a.col(j);
            ColIter::Sparse(r.iter().zip(v.iter()))
        } else {
            ColIter::Unit(Some(j - self.n))
        }
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for (k, v) in self.column(j) {
            for (i, a) in alpha.iter_mut().enumerate() {
                *a += self.binv[i * m + k] * v;
            }
        }
        alpha
    }

    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut r = self.p.b.clone();
        for j in 0..self.n + m {
            if self.pos[j].is_none() && self.x[j] != 0.0 {
                let xj = self.x[j];
                for (k, v) in self.column(j) {
                    r[k] -= v * xj;
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&r).map(|(a, b)| a * b).sum();
            self.x[self.head[i]] = v;
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let x = self.x[j];
        (self.lo[j] - x).max(x - self.hi[j]).max(0.0)
    }

    fn cost(&self, phase: Phase, j: usize) -> f64 {
        match phase {
            Phase::Two => {
                if j < self.n {
                    self.p.c[j]
                } else {
                    0.0
                }
            }
            Phase::One => {
                if self.pos[j].is_none() {
                    0.0
                } else if self.x[j] < self.lo[j] - self.tol.feas_tol {
                    1.0
                } else if self.x[j] > self.hi[j] + self.tol.feas_tol {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn compute_duals(&mut self, phase: Phase) {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = self.cost(phase, self.head[i]);
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, b) in y.iter_mut().zip(row) {
                    *yk += cb * b;
                }
            }
        }
        self.y = y;
    }

    fn reduced_cost(&self, phase: Phase, j: usize) -> f64 {
        let mut d = self.cost(phase, j);
        for (k, v) in self.column(j) {
            d -= self.y[k] * v;
        }
        d
    }

    /// Entering candidate and its direction (+1 increase, -1 decrease).
    fn price(&self, phase: Phase, bland: bool) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n + self.m {
            if self.pos[j].is_some() || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.reduced_cost(phase, j);
            let at_lo = self.x[j] <= self.lo[j];
            let at_hi = self.x[j] >= self.hi[j];
            let dir = if d > self.tol.opt_tol && !at_hi {
                1.0
            } else if d < -self.tol.opt_tol && !at_lo {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir, d));
            }
            match best {
                Some((_, _, bd)) if bd.abs() >= d.abs() => {}
                _ => best = Some((j, dir, d)),
            }
        }
        best
    }

    /// Returns step length and leaving basis position (None for a bound flip).
    fn ratio_test(
        &self,
        phase: Phase,
        q: usize,
        dir: f64,
        alpha: &[f64],
        bland: bool,
    ) -> (f64, Option<(usize, f64)>) {
        let ftol = self.tol.feas_tol;
        // (limit with tolerance, exact limit) per candidate
        let mut limits: Vec<(usize, f64, f64, f64)> = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if a.abs() <= self.tol.pivot_tol {
                continue;
            }
            let j = self.head[i];
            let delta = -dir * a;
            let x = self.x[j];
            let (lo, hi) = (self.lo[j], self.hi[j]);
            let target = if delta < 0.0 {
                if phase == Phase::One && x > hi + ftol {
                    Some(hi)
                } else if x >= lo - ftol {
                    Some(lo)
                } else {
                    None
                }
            } else if phase == Phase::One && x < lo - ftol {
                Some(lo)
            } else if x <= hi + ftol {
                Some(hi)
            } else {
                None
            };
            let Some(t) = target else { continue };
            if !t.is_finite() {
                continue;
            }
            let exact = ((t - x) / delta).max(0.0);
            let loose = ((t - x) / delta + ftol / delta.abs()).max(0.0);
            limits.push((i, loose, exact, t));
        }
        let flip = self.hi[q] - self.lo[q];
        let chosen = if bland {
            let min = limits.iter().map(|l| l.2).fold(f64::INFINITY, f64::min);
            limits
                .iter()
                .filter(|l| l.2 <= min)
                .min_by_key(|l| self.head[l.0])
                .map(|l| (l.0, l.2, l.3))
        } else {
            let bound = limits.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
            let mut pick: Option<(usize, f64, f64)> = None;
            for &(i, _, exact, t) in &limits {
                if exact <= bound {
                    let better = match pick {
                        None => true,
                        Some((pi, _, _)) => {
                            let (a, b) = (alpha[i].abs(), alpha[pi].abs());
                            a > b || (a == b && self.head[i] < self.head[pi])
                        }
                    };
                    if better {
                        pick = Some((i, exact, t));
                    }
                }
            }
            pick
        };
        match chosen {
            Some((i, theta, t)) if theta < flip => (theta, Some((i, t))),
            _ => (flip, None),
        }
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let ar = alpha[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        let mut nz: Vec<(usize, f64)> = Vec::new();
        for (k, v) in prow.iter_mut().enumerate() {
            if *v != 0.0 {
                *v /= ar;
                nz.push((k, *v));
            }
        }
        let sparse = nz.len() * 3 < m;
        for (i, &a) in alpha.iter().enumerate() {
            if i == r || a == 0.0 {
                continue;
            }
            let row = if i < r {
                &mut before[i * m..(i + 1) * m]
            } else {
                &mut after[(i - r - 1) * m..(i - r) * m]
            };
            if sparse {
                for &(k, p) in &nz {
                    row[k] -= a * p;
                }
            } else {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= a * p;
                }
            }
        }
    }

    fn reinvert(&mut self) {
        let m = self.m;
        let target: Vec<usize> = self.head.clone();
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            self.binv[i * m + i] = 1.0;
        }
        let mut new_head: Vec<usize> = (self.n..self.n + m).collect();
        let mut free = vec![true; m];
        for &j in &target {
            if j >= self.n {
                free[j - self.n] = false;
            }
        }
        let mut dropped = Vec::new();
        for &j in &target {
            if j >= self.n {
                continue;
            }
            let alpha = self.ftran(j);
            let mut r: Option<usize> = None;
            for i in 0..m {
                if free[i] && alpha[i].abs() > SINGULAR_TOL {
                    match r {
                        Some(k) if alpha[k].abs() >= alpha[i].abs() => {}
                        _ => r = Some(i),
                    }
                }
            }
            match r {
                Some(i) => {
                    self.pivot(i, &alpha);
                    new_head[i] = j;
                    free[i] = false;
                }
                None => dropped.push(j),
            }
        }
        for p in self.pos.iter_mut() {
            *p = None;
        }
        for (i, &h) in new_head.iter().enumerate() {
            self.pos[h] = Some(i);
        }
        self.head = new_head;
        for j in dropped {
            // basis repair: the logical of a free row took this column's place
            let x = self.x[j];
            self.x[j] = if (x - self.lo[j]).abs() <= (self.hi[j] - x).abs() {
                self.lo[j]
            } else {
                self.hi[j]
            };
        }
        self.recompute_basic_values();
        self.since_reinvert = 0;
    }

    /// True when the updated inverse no longer reproduces `A x = b` or `B^T y = c_B`.
    fn drifted(&mut self, phase: Phase) -> bool {
        let mut r = self.p.b.clone();
        for j in 0..self.n + self.m {
            let xj = self.x[j];
            if xj != 0.0 {
                for (k, v) in self.column(j) {
                    r[k] -= v * xj;
                }
            }
        }
        let scale = 1.0 + self.p.b.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if r.iter().any(|v| v.abs() > DRIFT_TOL * scale) {
            return true;
        }
        self.compute_duals(phase);
        self.head
            .iter()
            .any(|&j| self.reduced_cost(phase, j).abs() > DRIFT_TOL)
    }

    fn perturb(&mut self) {
        let saved = (self.lo.clone(), self.hi.clone());
        for j in 0..self.n + self.m {
            let (lo, hi) = (self.lo[j], self.hi[j]);
            let basic = self.pos[j].is_some();
            if lo == hi && !basic {
                continue;
            }
            let u = hash_unit(j);
            let at_lo = !basic && self.x[j] == lo;
            let at_hi = !basic && self.x[j] == hi && !at_lo;
            if lo.is_finite() {
                self.lo[j] = lo - PERTURB * (1.0 + lo.abs()) * (1.0 + u);
                if at_lo {
                    self.x[j] = self.lo[j];
                }
            }
            if hi.is_finite() {
                self.hi[j] = hi + PERTURB * (1.0 + hi.abs()) * (2.0 - u);
                if at_hi {
                    self.x[j] = self.hi[j];
                }
            }
        }
        self.saved_bounds = Some(saved);
        self.recompute_basic_values();
    }

    fn unperturb(&mut self) {
        let Some((lo, hi)) = self.saved_bounds.take() else {
            return;
        };
        for j in 0..self.n + self.m {
            if self.pos[j].is_none() {
                let x = self.x[j];
                if x == self.lo[j] {
                    self.x[j] = lo[j];
                } else if x == self.hi[j] {
                    self.x[j] = hi[j];
                }
            }
        }
        self.lo = lo;
        self.hi = hi;
        self.may_perturb = false;
        self.reinvert();
    }

    fn primal_infeasibility(&self) -> f64 {
        self.head
            .iter()
            .map(|&j| self.infeasibility(j))
            .fold(0.0, f64::max)
    }

    fn iterate(&mut self, phase: Phase) -> Result<Option<LpStatus>, LpError> {
        let mut stalls = 0usize;
        loop {
            if phase == Phase::One && self.primal_infeasibility() <= self.tol.feas_tol {
                return Ok(None);
            }
            if self.since_reinvert >= REINVERT_EVERY {
                if self.drifted(phase) {
                    self.reinvert();
                } else {
                    self.since_reinvert = 0;
                }
            }
            if self.iterations >= self.max_iterations {
                return Err(LpError::NumericalFailure {
                    iterations: self.iterations,
                    detail: "iteration limit reached".into(),
                });
            }
            self.compute_duals(phase);
            if stalls >= STALL_LIMIT && self.may_perturb && self.saved_bounds.is_none() {
                self.perturb();
                stalls = 0;
                continue;
            }
            let bland = stalls >= STALL_LIMIT;
            let Some((q, dir, _)) = self.price(phase, bland) else {
                return Ok(match phase {
                    Phase::One => Some(LpStatus::Infeasible),
                    Phase::Two => None,
                });
            };
            let alpha = self.ftran(q);
            let (theta, leave) = self.ratio_test(phase, q, dir, &alpha, bland);
            if !theta.is_finite() {
                if phase == Phase::Two {
                    return Ok(Some(LpStatus::Unbounded));
                }
                return Err(LpError::NumericalFailure {
                    iterations: self.iterations,
                    detail: "unbounded ray in phase one".into(),
                });
            }
            self.iterations += 1;
            self.since_reinvert += 1;
            if theta <= self.tol.feas_tol * 1e-3 {
                stalls += 1;
            } else {
                stalls = 0;
            }
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let j = self.head[i];
                    self.x[j] -= dir * theta * a;
                }
            }
            self.x[q] += dir * theta;
            match leave {
                None => {
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Some((r, target)) => {
                    let j = self.head[r];
                    self.x[j] = target;
                    self.pivot(r, &alpha);
                    self.pos[j] = None;
                    self.pos[q] = Some(r);
                    self.head[r] = q;
                }
            }
        }
    }

    fn run(&mut self) -> Result<LpStatus, LpError> {
        for _attempt in 0..5 {
            if let Some(st) = self.iterate(Phase::One)? {
                self.reinvert();
                // widened bounds only relax the problem
                if self.primal_infeasibility() > self.tol.feas_tol {
                    return Ok(st);
                }
            }
            if let Some(st) = self.iterate(Phase::Two)? {
                if self.saved_bounds.is_some() {
                    self.unperturb();
                    continue;
                }
                return Ok(st);
            }
            if self.saved_bounds.is_some() {
                self.unperturb();
                continue;
            }
            self.reinvert();
            if self.primal_infeasibility() > self.tol.feas_tol {
                continue;
            }
            self.compute_duals(Phase::Two);
            if self.price(Phase::Two, false).is_some() {
                continue;
            }
            return Ok(LpStatus::Optimal);
        }
        Err(LpError::NumericalFailure {
            iterations: self.iterations,
            detail: "could not restore feasibility after reinversion".into(),
        })
    }

    fn extract(&self, status: LpStatus, p: &LpProblem, sc: &Scaled) -> LpSolution {
        let n = self.n;
        let mut primal: Vec<f64> = (0..n).map(|j| self.x[j] * sc.col[j]).collect();
        for j in 0..n {
            primal[j] = primal[j].clamp(p.lower[j], p.upper[j]);
        }
        if status != LpStatus::Optimal {
            return LpSolution {
                status,
                primal,
                dual_rows: vec![0.0; self.m],
                reduced_costs: vec![0.0; n],
                objective_value: 0.0,
                iterations: self.iterations,
                basis: None,
            };
        }
        let dual_rows: Vec<f64> = self.y.iter().zip(&sc.row).map(|(y, r)| y * r).collect();
        let aty = p.matrix.tmul_vec(&dual_rows);
        let reduced_costs: Vec<f64> = (0..n)
            .map(|j| {
                if self.pos[j].is_some() {
                    0.0
                } else {
                    p.objective[j] - aty[j]
                }
            })
            .collect();
        LpSolution {
            status,
            objective_value: p.objective_value(&primal),
            primal,
            dual_rows,
            reduced_costs,
            iterations: self.iterations,
            basis: Some(self.basis()),
        }
    }

    fn basis(&self) -> Basis {
        let status = |j: usize| {
            if self.pos[j].is_some() {
                VarStatus::Basic
            } else if self.hi[j].is_finite() && self.x[j] >= self.hi[j] && self.lo[j] < self.hi[j] {
                VarStatus::AtUpper
            } else {
                VarStatus::AtLower
            }
        };
        Basis {
            columns: (0..self.n).map(status).collect(),
            rows: (self.n..self.n + self.m).map(status).collect(),
        }
    }
}

enum ColIter<'a> {
    Sparse(std::iter::Zip<std::slice::Iter<'a, usize>, std::slice::Iter<'a, f64>>),
    Unit(Option<usize>),
}

impl Iterator for ColIter<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColIter::Sparse(it) => it.next().map(|(r, v)| (*r, *v)),
            ColIter::Unit(r) => r.take().map(|r| (r, 1.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::duality_gap;

    fn lp(c: &[f64], rows: &[(&[f64], RowKind, f64)], lo: &[f64], hi: &[f64]) -> LpProblem {
        let mut trip = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.0.iter().enumerate() {
                trip.push((i, j, *v));
            }
        }
        LpProblem::new(
            c.to_vec(),
            CscMatrix::from_triplets(rows.len(), c.len(), &trip),
            rows.iter().map(|r| r.1).collect(),
            rows.iter().map(|r| r.2).collect(),
            lo.to_vec(),
            hi.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn textbook_two_variable() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18
        let p = lp(
            &[3.0, 5.0],
            &[
                (&[1.0, 0.0], RowKind::Le, 4.0),
                (&[0.0, 2.0], RowKind::Le, 12.0),
                (&[3.0, 2.0], RowKind::Le, 18.0),
            ],
            &[0.0, 0.0],
            &[100.0, 100.0],
        );
        let s = solve_lp(&p, &ToleranceSet::default()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 36.0).abs() < 1e-10);
        assert!((s.primal[0] - 2.0).abs() < 1e-10);
        assert!((s.primal[1] - 6.0).abs() < 1e-10);
        assert!((s.dual_rows[1] - 1.5).abs() < 1e-10);
        assert!((s.dual_rows[2] - 1.0).abs() < 1e-10);
        assert!(duality_gap(&p, &s).unwrap() < 1e-10);
    }

    #[test]
    fn equality_and_ge_rows() {
        // max -x - y, x + y = 3, x - y >= 1
        let p = lp(
            &[-1.0, -2.0],
            &[(&[1.0, 1.0], RowKind::Eq, 3.0), (&[1.0, -1.0], RowKind::Ge, 1.0)],
            &[0.0, 0.0],
            &[10.0, 10.0],
        );
        let s = solve_lp(&p, &ToleranceSet::default()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value + 3.0).abs() < 1e-10);
        assert!(duality_gap(&p, &s).unwrap() < 1e-10);
        assert!(s.dual_rows[1] <= 1e-12);
    }

    #[test]
    fn nonzero_lower_bounds() {
        // max x0 - x1, x0 - x1 <= 2, 1 <= x0 <= 5, 3 <= x1 <= 4
        let p = lp(
            &[1.0, -1.0],
            &[(&[1.0, -1.0], RowKind::Le, 2.0)],
            &[1.0, 3.0],
            &[5.0, 4.0],
        );
        let s = solve_lp(&p, &ToleranceSet::default()).unwrap();
        assert!((s.objective_value - 2.0).abs() < 1e-10);
        assert!(duality_gap(&p, &s).unwrap() < 1e-10);
    }

    #[test]
    fn infeasible_equality() {
        let p = lp(
            &[1.0, 1.0],
            &[(&[1.0, 1.0], RowKind::Eq, 30.0)],
            &[0.0, 0.0],
            &[10.0, 10.0],
        );
        assert_eq!(
            solve_lp(&p, &ToleranceSet::default()).unwrap().status,
            LpStatus::Infeasible
        );
    }

    #[test]
    fn degenerate_vertex_is_escaped() {
        // every pairwise difference row is tight at the origin
        let n = 30;
        let mut trip = Vec::new();
        let mut r = 0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    trip.push((r, i, 1.0));
                    trip.push((r, j, -1.0));
                    r += 1;
                }
            }
        }
        let p = LpProblem::new(
            (0..n).map(|j| 1.0 + (j % 3) as f64).collect(),
            CscMatrix::from_triplets(r, n, &trip),
            vec![RowKind::Le; r],
            vec![0.0; r],
            vec![0.0; n],
            vec![1.0; n],
        )
        .unwrap();
        let s = solve_lp(&p, &ToleranceSet::default()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 60.0).abs() < 1e-9);
        assert!(s.primal.iter().all(|v| (v - 1.0).abs() < 1e-9));
        assert!(duality_gap(&p, &s).unwrap() < 1e-8);
    }

    #[test]
    fn iteration_cap_reports_failure() {
        let p = lp(
            &[3.0, 5.0],
            &[(&[3.0, 2.0], RowKind::Le, 18.0)],
            &[0.0, 0.0],
            &[100.0, 100.0],
        );
        let tol = ToleranceSet {
            max_iterations: Some(0),
            ..Default::default()
        };
        assert!(matches!(
            solve_lp(&p, &tol),
            Err(LpError::NumericalFailure { .. })
        ));
    }
}
