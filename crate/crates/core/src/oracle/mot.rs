//! Martingale transport and shadow programs on finite grids.

use log::debug;
use serde::{Deserialize, Serialize};

use super::simplex::{self, Certificate, StandardLp};
use crate::builders::{barcode, left_curtain, monge_approximate, DEFAULT_STOP_EPS};
use crate::convex_order::{leq_cx, leq_e, require_cx, ORDER_TOL};
use crate::coupling::{Coupling, Link};
use crate::error::{MmtError, Result};
use crate::measure::{Interval, Measure};

pub const MAX_X_POINTS: usize = 40;
pub const MAX_Y_POINTS: usize = 60;
pub const MAX_SHADOW_POINTS: usize = 40;

/// Entries below this are treated as zero in returned plans.
const PLAN_EPS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpInstance {
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub mu_weights: Vec<f64>,
    pub nu_weights: Vec<f64>,
    /// `objective[i][j] = c(x_i, y_j)`
    pub objective: Vec<Vec<f64>>,
}

impl LpInstance {
    pub fn new<F: Fn(f64, f64) -> f64>(
        x_grid: Vec<f64>,
        y_grid: Vec<f64>,
        mu_weights: Vec<f64>,
        nu_weights: Vec<f64>,
        c: F,
    ) -> Result<Self> {
        let objective = x_grid
            .iter()
            .map(|&x| y_grid.iter().map(|&y| c(x, y)).collect())
            .collect();
        let inst = LpInstance { x_grid, y_grid, mu_weights, nu_weights, objective };
        inst.validate()?;
        Ok(inst)
    }

    /// Instance on the atoms of two purely atomic measures.
    pub fn from_measures<F: Fn(f64, f64) -> f64>(mu: &Measure, nu: &Measure, c: F) -> Result<Self> {
        for m in [mu, nu] {
            if !m.is_purely_atomic() {
                return Err(MmtError::InvalidArgument(
                    "oracle marginals must be purely atomic".into(),
                ));
            }
        }
        LpInstance::new(
            mu.atoms().iter().map(|a| a.x).collect(),
            nu.atoms().iter().map(|a| a.x).collect(),
            mu.atoms().iter().map(|a| a.mass).collect(),
            nu.atoms().iter().map(|a| a.mass).collect(),
            c,
        )
    }

    pub fn mu(&self) -> Result<Measure> {
        grid_measure(&self.x_grid, &self.mu_weights)
    }

    pub fn nu(&self) -> Result<Measure> {
        grid_measure(&self.y_grid, &self.nu_weights)
    }

    fn validate(&self) -> Result<()> {
        let (nx, ny) = (self.x_grid.len(), self.y_grid.len());
        if nx > MAX_X_POINTS {
            return Err(MmtError::SizeCap { what: "x grid points", got: nx, cap: MAX_X_POINTS });
        }
        if ny > MAX_Y_POINTS {
            return Err(MmtError::SizeCap { what: "y grid points", got: ny, cap: MAX_Y_POINTS });
        }
        let bad = |msg: &str| Err(MmtError::InvalidArgument(msg.into()));
        if self.mu_weights.len() != nx || self.nu_weights.len() != ny {
            return bad("weights must match their grids");
        }
        if self.objective.len() != nx || self.objective.iter().any(|r| r.len() != ny) {
            return bad("objective must be an x-by-y matrix");
        }
        for g in [&self.x_grid, &self.y_grid] {
            if g.iter().any(|v| !v.is_finite()) || g.windows(2).any(|w| w[0] >= w[1]) {
                return bad("grids must be finite and strictly increasing");
            }
        }
        let ok = |w: &Vec<f64>| w.iter().all(|v| v.is_finite() && *v >= 0.0);
        if !ok(&self.mu_weights) || !ok(&self.nu_weights) {
            return bad("weights must be finite and nonnegative");
        }
        let (a, b): (f64, f64) = (self.mu_weights.iter().sum(), self.nu_weights.iter().sum());
        if (a - b).abs() > 1e-12 * (1.0 + a) {
            return bad("grid weights must have equal totals");
        }
        Ok(())
    }
}

fn grid_measure(grid: &[f64], w: &[f64]) -> Result<Measure> {
    let atoms: Vec<(f64, f64)> = grid.iter().copied().zip(w.iter().copied()).collect();
    Measure::from_atoms(&atoms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotSolution {
    pub value: f64,
    /// `plan[i][j]` is the mass sent from `x_i` to `y_j`.
    pub plan: Vec<Vec<f64>>,
    pub certificate: Certificate,
}

impl MotSolution {
    pub fn to_coupling(&self, inst: &LpInstance) -> Coupling {
        let links = inst
            .x_grid
            .iter()
            .zip(&self.plan)
            .filter_map(|(&x, row)| {
                let atoms: Vec<(f64, f64)> = inst
                    .y_grid
                    .iter()
                    .copied()
                    .zip(row.iter().copied())
                    .filter(|a| a.1 > 0.0)
                    .collect();
                let t = Measure::from_atoms(&atoms).ok()?;
                (!t.is_zero()).then(|| Link::new(x, t))
            })
            .collect();
        Coupling::new(links)
    }
}

/// Minimum of `Σ c_ij p_ij` over martingale plans between the grid
/// marginals.
pub fn solve_mot(inst: &LpInstance) -> Result<MotSolution> {
    inst.validate()?;
    let (mu, nu) = (inst.mu()?, inst.nu()?);
    if !leq_cx(&mu, &nu, ORDER_TOL).is_ordered() {
        return Err(MmtError::Infeasible("grid marginals are not in convex order".into()));
    }
    let (nx, ny) = (inst.x_grid.len(), inst.y_grid.len());
    let var = |i: usize, j: usize| i * ny + j;
    let mut lp = StandardLp::new(nx * ny, inst.objective.iter().flatten().copied().collect());
    for i in 0..nx {
        lp.push_row((0..ny).map(|j| (var(i, j), 1.0)), inst.mu_weights[i]);
    }
    for j in 0..ny {
        lp.push_row((0..nx).map(|i| (var(i, j), 1.0)), inst.nu_weights[j]);
    }
    for i in 0..nx {
        let x = inst.x_grid[i];
        lp.push_row((0..ny).map(|j| (var(i, j), inst.y_grid[j] - x)), 0.0);
    }
    let sol = simplex::solve(&lp)?;
    debug!("martingale program {nx}x{ny} solved in {} pivots", sol.pivots);
    let plan = (0..nx)
        .map(|i| {
            (0..ny)
                .map(|j| {
                    let p = sol.x[var(i, j)];
                    if p < PLAN_EPS { 0.0 } else { p }
                })
                .collect()
        })
        .collect();
    Ok(MotSolution { value: sol.value, plan, certificate: sol.certificate })
}

/// The shadow of a discrete `μ` in a discrete `ν` as the variance-minimal
/// measure between them.
pub fn solve_shadow_lp(mu: &Measure, nu: &Measure) -> Result<Measure> {
    if !mu.is_purely_atomic() || !nu.is_purely_atomic() {
        return Err(MmtError::InvalidArgument("oracle measures must be purely atomic".into()));
    }
    let mut strikes: Vec<f64> = mu.atoms().iter().chain(nu.atoms()).map(|a| a.x).collect();
    strikes.sort_by(f64::total_cmp);
    strikes.dedup();
    if strikes.len() > MAX_SHADOW_POINTS {
        return Err(MmtError::SizeCap {
            what: "support points",
            got: strikes.len(),
            cap: MAX_SHADOW_POINTS,
        });
    }
    if !leq_e(mu, nu, ORDER_TOL) {
        return Err(MmtError::Infeasible("source not dominated in the extended order".into()));
    }
    let ys: Vec<f64> = nu.atoms().iter().map(|a| a.x).collect();
    let k = ys.len();
    let s = strikes.len();
    // variables: η (k), slack ν − η (k), call surplus (s)
    let mut c = vec![0.0; 2 * k + s];
    for (j, y) in ys.iter().enumerate() {
        c[j] = y * y;
    }
    let mut lp = StandardLp::new(2 * k + s, c);
    for (j, a) in nu.atoms().iter().enumerate() {
        lp.push_row([(j, 1.0), (k + j, 1.0)], a.mass);
    }
    lp.push_row((0..k).map(|j| (j, 1.0)), mu.mass());
    lp.push_row((0..k).map(|j| (j, ys[j])), mu.first_moment());
    for (t, &strike) in strikes.iter().enumerate() {
        let call_mu: f64 = mu.atoms().iter().map(|a| a.mass * (a.x - strike).max(0.0)).sum();
        lp.push_row(
            (0..k)
                .map(|j| (j, (ys[j] - strike).max(0.0)))
                .chain([(2 * k + t, -1.0)]),
            call_mu,
        );
    }
    let sol = simplex::solve(&lp)?;
    let atoms: Vec<(f64, f64)> = ys
        .iter()
        .copied()
        .zip(sol.x[..k].iter().copied())
        .filter(|a| a.1 > PLAN_EPS)
        .collect();
    Measure::from_atoms(&atoms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub eps: f64,
    /// Best cost found among Monge martingale couplings of `(μ, ν)`.
    pub mmt_value: f64,
    /// Optimal cost over all martingale plans on the discretized target.
    pub lp_value: f64,
}

impl GapRow {
    pub fn gap(&self) -> f64 {
        self.mmt_value - self.lp_value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueGap {
    pub rows: Vec<GapRow>,
    /// Widest hull of the target cells the grid points stand for.
    pub grid_width: f64,
}

/// Target grid used by [`value_gap`]: the grid point `y_j` is the barycenter
/// of the part `parts[j]` of `ν`, and the parts sum to `ν`.
struct TargetGrid {
    y: Vec<f64>,
    parts: Vec<Measure>,
}

impl TargetGrid {
    fn from_parts(mut raw: Vec<(f64, Measure)>) -> Result<Self> {
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut y: Vec<f64> = Vec::new();
        let mut parts: Vec<Measure> = Vec::new();
        for (b, m) in raw {
            if y.last() == Some(&b) {
                let last = parts.last_mut().expect("parallel vectors");
                *last = last.add(&m);
            } else {
                y.push(b);
                parts.push(m);
            }
        }
        Ok(TargetGrid { y, parts })
    }

    fn weights(&self) -> Vec<f64> {
        self.parts.iter().map(Measure::mass).collect()
    }

    fn measure(&self) -> Result<Measure> {
        grid_measure(&self.y, &self.weights())
    }

    fn width(&self) -> f64 {
        self.parts
            .iter()
            .filter_map(Measure::support)
            .map(|(l, r)| r - l)
            .fold(0.0, f64::max)
    }
}

fn cells_of(m: &Measure, n: usize) -> Result<Vec<(f64, Measure)>> {
    m.discretize_cells(n)
        .into_iter()
        .map(|cell| {
            let part = Measure::sum(
                cell.spans
                    .iter()
                    .map(|&(l, r)| m.restrict(Interval { left: l, right: r }))
                    .collect::<Vec<_>>()
                    .iter(),
            );
            Ok((cell.x, part))
        })
        .collect()
}

/// Equal-mass cells of `ν` if the discrete `μ` stays below their
/// barycenters in convex order; otherwise cells of each left-curtain target
/// separately, which keeps every barycenter constraint satisfiable.
fn target_grid(mu: &Measure, nu: &Measure) -> Result<TargetGrid> {
    let grid = TargetGrid::from_parts(cells_of(nu, MAX_Y_POINTS)?)?;
    if leq_cx(mu, &grid.measure()?, ORDER_TOL).is_ordered() {
        return Ok(grid);
    }
    debug!("equal-mass grid breaks convex order; splitting along left-curtain targets");
    let lc = left_curtain(mu, nu, 1)?;
    let total = mu.mass();
    let n = lc.links().len();
    let spare = MAX_Y_POINTS - n;
    let mut raw = Vec::new();
    for l in lc.links() {
        let share = 1 + ((spare as f64) * l.mass / total).floor() as usize;
        raw.extend(cells_of(&l.target, share)?);
    }
    TargetGrid::from_parts(raw)
}

/// At most 60 weighted points below the atomless `ν` in convex order and
/// above the purely atomic `μ`.
pub fn discretize_target(mu: &Measure, nu: &Measure) -> Result<Measure> {
    if !mu.is_purely_atomic() {
        return Err(MmtError::InvalidArgument("source must be purely atomic".into()));
    }
    if let Some(a) = nu.atoms().first() {
        return Err(MmtError::AtomicSecondMarginal { at: a.x });
    }
    require_cx(mu, nu, ORDER_TOL, None)?;
    target_grid(mu, nu)?.measure()
}

/// Compares the best Monge martingale cost with the martingale optimum on a
/// discretized target, for each cell width in `eps_list`.
///
/// The martingale optimum is computed on at most 60 target points; its plan
/// is lifted back to `ν` by spreading each grid point over the part of `ν`
/// it stands for, and turned into Monge couplings by
/// [`monge_approximate`]. The reported Monge value at `eps` is the lowest
/// cost among the barcode coupling and the approximations at every width
/// `≥ eps` in the list.
pub fn value_gap<F: Fn(f64, f64) -> f64>(
    mu: &Measure,
    nu: &Measure,
    c: F,
    eps_list: &[f64],
) -> Result<ValueGap> {
    if !mu.is_purely_atomic() {
        return Err(MmtError::InvalidArgument("source must be purely atomic".into()));
    }
    if let Some(a) = nu.atoms().first() {
        return Err(MmtError::AtomicSecondMarginal { at: a.x });
    }
    if mu.atoms().len() > MAX_X_POINTS {
        return Err(MmtError::SizeCap {
            what: "source atoms",
            got: mu.atoms().len(),
            cap: MAX_X_POINTS,
        });
    }
    require_cx(mu, nu, ORDER_TOL, None)?;
    let grid = target_grid(mu, nu)?;
    let inst = LpInstance::new(
        mu.atoms().iter().map(|a| a.x).collect(),
        grid.y.clone(),
        mu.atoms().iter().map(|a| a.mass).collect(),
        grid.weights(),
        &c,
    )?;
    let sol = solve_mot(&inst)?;
    let lifted = Coupling::new(
        inst.x_grid
            .iter()
            .zip(&sol.plan)
            .filter_map(|(&x, row)| {
                let t = Measure::sum(
                    row.iter()
                        .zip(&grid.parts)
                        .filter(|(p, _)| **p > 0.0)
                        .map(|(p, part)| part.scaled(p / part.mass()))
                        .collect::<Vec<_>>()
                        .iter(),
                );
                (!t.is_zero()).then(|| Link::new(x, t))
            })
            .collect(),
    );
    let (bc, _) = barcode(mu, nu, crate::shadow::DEFAULT_RESOLUTION, DEFAULT_STOP_EPS)?;
    let mut best = bc.cost(&c);

    let mut order: Vec<usize> = (0..eps_list.len()).collect();
    order.sort_by(|&a, &b| eps_list[b].total_cmp(&eps_list[a]));
    let mut rows = vec![None; eps_list.len()];
    for i in order {
        let eps = eps_list[i];
        let approx = monge_approximate(&lifted, eps)?;
        best = best.min(approx.cost(&c));
        rows[i] = Some(GapRow { eps, mmt_value: best, lp_value: sol.value });
    }
    Ok(ValueGap {
        rows: rows.into_iter().map(|r| r.expect("every width visited")).collect(),
        grid_width: grid.width(),
    })
}
