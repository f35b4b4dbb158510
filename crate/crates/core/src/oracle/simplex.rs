//! Dense two-phase tableau simplex with Bland's anti-cycling rule, for small equality-form
//! programs `min c·x  s.t.  A x = b, x ≥ 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MmtError, Result};

/// Entering threshold on reduced costs.
const COST_TOL: f64 = 1e-11;
/// Smallest admissible pivot element.
const PIVOT_TOL: f64 = 1e-9;
/// Phase-one objective above which the program is declared infeasible.
const FEASIBILITY_TOL: f64 = 1e-9;
/// Tolerances of the independent re-verification.
const PRIMAL_TOL: f64 = 1e-9;
pub const REDUCED_COST_TOL: f64 = 1e-10;
/// Consecutive degenerate pivots after which Bland's rule takes over.
const DEGENERATE_SWITCH: usize = 20;

#[derive(Debug, Clone)]
pub struct StandardLp {
    pub m: usize,
    pub n: usize,
    /// Row-major `m × n`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl StandardLp {
    pub fn new(n: usize, c: Vec<f64>) -> Self {
        assert_eq!(c.len(), n);
        StandardLp { m: 0, n, a: Vec::new(), b: Vec::new(), c }
    }

    /// Appends the row `Σ coef·x_j = rhs` given as sparse `(j, coef)` pairs.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>, rhs: f64) {
        let start = self.a.len();
        self.a.resize(start + self.n, 0.0);
        for (j, v) in entries {
            self.a[start + j] += v;
        }
        self.b.push(rhs);
        self.m += 1;
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }
}

/// Final basis of an optimal solve: `basis[k]` is the basic column of
/// constraint row `rows[k]`; rows not listed were found redundant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub rows: Vec<usize>,
    pub basis: Vec<usize>,
    /// Smallest reduced cost recomputed from the basis factorization.
    pub min_reduced_cost: f64,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub certificate: Certificate,
    pub pivots: usize,
}

struct Tableau {
    m: usize,
    /// columns: n originals, m artificials, rhs
    w: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
    /// reduced costs over all non-rhs columns, and minus the objective value
    d: Vec<f64>,
    pivots: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.w + self.w - 1]
    }

    fn pivot(&mut self, r: usize, s: usize) {
        let w = self.w;
        let p = self.t[r * w + s];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= p;
        }
        let row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + s];
            if f != 0.0 {
                for (v, rv) in self.t[i * w..(i + 1) * w].iter_mut().zip(&row) {
                    *v -= f * rv;
                }
                self.t[i * w + s] = 0.0;
            }
        }
        let f = self.d[s];
        if f != 0.0 {
            for (v, rv) in self.d.iter_mut().zip(&row) {
                *v -= f * rv;
            }
            self.d[s] = 0.0;
        }
        for i in 0..self.m {
            let b = &mut self.t[i * w + w - 1];
            if *b < 0.0 && *b > -1e-12 {
                *b = 0.0;
            }
        }
        self.basis[r] = s;
        self.pivots += 1;
    }

    /// Steepest reduced cost while the objective moves; Bland's rule for
    /// the entering and leaving choice during runs of degenerate pivots.
    fn run(&mut self, cols: usize, active: &[bool], max_pivots: usize) -> Result<()> {
        let mut degenerate_run = 0;
        loop {
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            let entering = if bland {
                (0..cols).find(|&j| self.d[j] < -COST_TOL)
            } else {
                (0..cols)
                    .filter(|&j| self.d[j] < -COST_TOL)
                    .min_by(|&a, &b| self.d[a].total_cmp(&self.d[b]))
            };
            let Some(s) = entering else {
                return Ok(());
            };
            let mut best: Option<(f64, usize)> = None;
            for i in (0..self.m).filter(|&i| active[i]) {
                let a = self.t[i * self.w + s];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    let better = match best {
                        None => true,
                        Some((r, k)) => {
                            ratio < r || (ratio == r && self.basis[i] < self.basis[k])
                        }
                    };
                    if better {
                        best = Some((ratio, i));
                    }
                }
            }
            let Some((ratio, r)) = best else {
                return Err(MmtError::Infeasible("objective unbounded below".into()));
            };
            if self.pivots >= max_pivots {
                return Err(MmtError::NoConvergence {
                    iterations: self.pivots,
                    residual_mass: f64::NAN,
                });
            }
            if ratio <= 0.0 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, s);
        }
    }
}

pub fn solve(lp: &StandardLp) -> Result<LpSolution> {
    let (m, n) = (lp.m, lp.n);
    let w = n + m + 1;
    let mut t = vec![0.0; m * w];
    for i in 0..m {
        let sign = if lp.b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i * w + j] = sign * lp.at(i, j);
        }
        t[i * w + n + i] = 1.0;
        t[i * w + w - 1] = sign * lp.b[i];
    }
    // phase one: minimise the sum of artificials
    let mut d = vec![0.0; w];
    for i in 0..m {
        for j in 0..n {
            d[j] -= t[i * w + j];
        }
        d[w - 1] -= t[i * w + w - 1];
    }
    let mut tab = Tableau { m, w, t, basis: (n..n + m).collect(), d, pivots: 0 };
    let max_pivots = 50 * (m + n) + 1000;
    let mut active = vec![true; m];
    tab.run(n, &active, max_pivots)?;
    let infeasibility = -tab.d[w - 1];
    let scale = 1.0 + lp.b.iter().map(|v| v.abs()).sum::<f64>();
    if infeasibility > FEASIBILITY_TOL * scale {
        return Err(MmtError::Infeasible(format!(
            "constraints cannot be met (phase-one residual {infeasibility:e})"
        )));
    }
    // drive artificials out of the basis, dropping redundant rows
    for i in 0..m {
        if tab.basis[i] >= n {
            let row = &tab.t[i * w..i * w + n];
            let best = (0..n).max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()));
            match best.filter(|&j| row[j].abs() > PIVOT_TOL) {
                Some(j) => tab.pivot(i, j),
                None => active[i] = false,
            }
        }
    }
    // phase two
    let mut d = vec![0.0; w];
    d[..n].copy_from_slice(&lp.c);
    for i in (0..m).filter(|&i| active[i]) {
        let cb = lp.c[tab.basis[i]];
        if cb != 0.0 {
            for (dj, tj) in d.iter_mut().zip(&tab.t[i * w..(i + 1) * w]) {
                *dj -= cb * tj;
            }
        }
    }
    for v in &mut d[n..w - 1] {
        *v = 0.0;
    }
    tab.d = d;
    tab.run(n, &active, max_pivots)?;

    let rows: Vec<usize> = (0..m).filter(|&i| active[i]).collect();
    let basis: Vec<usize> = rows.iter().map(|&i| tab.basis[i]).collect();
    let (x, min_reduced_cost) = verify(lp, &rows, &basis)?;
    let value = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(LpSolution {
        x,
        value,
        certificate: Certificate { rows, basis, min_reduced_cost },
        pivots: tab.pivots,
    })
}

/// Recomputes the basic solution and reduced costs from a fresh LU
/// factorization of the basis, independent of the pivot sequence.
pub fn verify(lp: &StandardLp, rows: &[usize], basis: &[usize]) -> Result<(Vec<f64>, f64)> {
    let k = rows.len();
    if basis.len() != k || basis.iter().any(|&j| j >= lp.n) {
        return Err(MmtError::CertificateRejected("basis does not match the rows".into()));
    }
    let bm = DMatrix::from_fn(k, k, |r, s| lp.at(rows[r], basis[s]));
    let lu = bm.clone().lu();
    let rhs = DVector::from_iterator(k, rows.iter().map(|&i| lp.b[i]));
    let xb = lu
        .solve(&rhs)
        .ok_or_else(|| MmtError::CertificateRejected("singular basis".into()))?;
    let scale = 1.0 + lp.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut x = vec![0.0; lp.n];
    for (s, &j) in basis.iter().enumerate() {
        if xb[s] < -PRIMAL_TOL * scale {
            return Err(MmtError::CertificateRejected(format!(
                "basic variable {j} is negative ({:e})",
                xb[s]
            )));
        }
        x[j] = xb[s].max(0.0);
    }
    for i in 0..lp.m {
        let r: f64 = (0..lp.n).map(|j| lp.at(i, j) * x[j]).sum::<f64>() - lp.b[i];
        if r.abs() > PRIMAL_TOL * scale {
            return Err(MmtError::CertificateRejected(format!(
                "row {i} violated by {r:e}"
            )));
        }
    }
    let cb = DVector::from_iterator(k, basis.iter().map(|&j| lp.c[j]));
    let y = bm
        .transpose()
        .lu()
        .solve(&cb)
        .ok_or_else(|| MmtError::CertificateRejected("singular basis".into()))?;
    let mut min_rc = f64::INFINITY;
    for j in 0..lp.n {
        let rc = lp.c[j] - (0..k).map(|r| y[r] * lp.at(rows[r], j)).sum::<f64>();
        min_rc = min_rc.min(rc);
    }
    if min_rc < -REDUCED_COST_TOL {
        return Err(MmtError::CertificateRejected(format!(
            "negative reduced cost {min_rc:e}"
        )));
    }
    Ok((x, min_rc))
}
