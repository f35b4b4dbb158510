//! Transport plans stored as source atoms with target sub-measures.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{MmtError, Result};
use crate::measure::{Measure, QuantileTable, Seg};

/// Tolerance for a link's target mass against its source mass.
const LINK_MASS_TOL: f64 = 1e-9;

/// Source atom `mass·δ_x` and the sub-measure it is sent to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub x: f64,
    #[serde(rename = "m")]
    pub mass: f64,
    pub target: Measure,
}

impl Link {
    pub fn new(x: f64, target: Measure) -> Self {
        Link {
            x,
            mass: target.mass(),
            target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "CouplingRepr")]
pub struct Coupling {
    links: Vec<Link>,
}

#[derive(Deserialize)]
struct CouplingRepr {
    links: Vec<Link>,
}

impl TryFrom<CouplingRepr> for Coupling {
    type Error = MmtError;

    fn try_from(repr: CouplingRepr) -> Result<Self> {
        for l in &repr.links {
            if !l.x.is_finite() || !(l.mass > 0.0) || !l.mass.is_finite() {
                return Err(MmtError::InvalidMeasure(format!(
                    "link ({}, {}) has invalid source",
                    l.x, l.mass
                )));
            }
            let tm = l.target.mass();
            if (tm - l.mass).abs() > LINK_MASS_TOL * (1.0 + l.mass) {
                return Err(MmtError::InvalidMeasure(format!(
                    "link at {} carries mass {} but its target has mass {}",
                    l.x, l.mass, tm
                )));
            }
        }
        Ok(Coupling { links: repr.links })
    }
}

/// Backward-determinism diagnostics of a coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MongeReport {
    /// `E[Var(X | Y)]`, computed exactly on the common refinement of all
    /// targets; zero iff the targets are mutually singular.
    pub score: f64,
    /// Mass of the `bin_width` bins receiving from two or more distinct sources.
    pub overlap_mass: f64,
    pub bin_width: f64,
    /// `E[Var(X | bin of Y)]` with `Y` binned at `bin_width`.
    pub binned_score: f64,
}

/// One cell of the common refinement of all targets: the conditional law of
/// `X` given `Y` is the same for every `y` in it.
#[derive(Debug, Clone, Copy)]
struct BackCell {
    mass: f64,
    mean: f64,
    var: f64,
}

impl Coupling {
    pub fn new(links: Vec<Link>) -> Self {
        Coupling { links }
    }

    /// Each atom of `m` sent to itself.
    pub fn identity(m: &Measure) -> Self {
        let links = m
            .atoms()
            .iter()
            .map(|a| Link::new(a.x, Measure::dirac(a.x, a.mass)))
            .collect();
        Coupling { links }
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn into_links(self) -> Vec<Link> {
        self.links
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    pub fn first_marginal(&self) -> Measure {
        let atoms: Vec<(f64, f64)> = self.links.iter().map(|l| (l.x, l.mass)).collect();
        Measure::from_atoms(&atoms).unwrap_or_default()
    }

    pub fn second_marginal(&self) -> Measure {
        Measure::sum(self.links.iter().map(|l| &l.target))
    }

    /// Fails unless both marginals match within `tol` in total variation.
    pub fn check_marginals(&self, mu: &Measure, nu: &Measure, tol: f64) -> Result<()> {
        let d = Measure::tv_distance(&self.first_marginal(), mu)
            .max(Measure::tv_distance(&self.second_marginal(), nu));
        if d > tol {
            return Err(MmtError::MarginalMismatch { discrepancy: d });
        }
        Ok(())
    }

    /// Link with the largest barycenter deviation, if any exceeds `tol`.
    pub fn martingale_defect(&self, tol: f64) -> Option<(f64, f64)> {
        self.links
            .iter()
            .map(|l| {
                let b = l.target.barycenter().unwrap_or(l.x);
                (l.x, (b - l.x).abs())
            })
            .filter(|&(_, d)| d > tol)
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn check_martingale(&self, tol: f64) -> bool {
        self.martingale_defect(tol).is_none()
    }

    pub fn require_martingale(&self, tol: f64) -> Result<()> {
        match self.martingale_defect(tol) {
            None => Ok(()),
            Some((source_x, deviation)) => Err(MmtError::NotMartingale {
                source_x,
                deviation,
            }),
        }
    }

    /// `(diameter of the second marginal's support) / 4096`.
    pub fn default_bin_width(&self) -> f64 {
        let (lo, hi) = self.target_hull();
        if hi > lo {
            (hi - lo) / 4096.0
        } else {
            1.0
        }
    }

    fn target_hull(&self) -> (f64, f64) {
        self.links
            .iter()
            .filter_map(|l| l.target.support())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (l, r)| {
                (a.min(l), b.max(r))
            })
    }

    /// Conditional law of the source given the target, cell by cell.
    fn backward_cells(&self) -> Vec<BackCell> {
        let mut cells = Vec::new();

        let mut atoms: Vec<(f64, f64, f64)> = self
            .links
            .iter()
            .flat_map(|l| l.target.atoms().iter().map(move |a| (a.x, l.x, a.mass)))
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for group in atoms.chunk_by(|a, b| a.0 == b.0) {
            let w: Vec<(f64, f64)> = group.iter().map(|&(_, x, m)| (x, m)).collect();
            cells.push(weighted_cell(&w, 1.0));
        }

        let mut events: Vec<(f64, usize, f64)> = Vec::new();
        for (i, l) in self.links.iter().enumerate() {
            for p in l.target.pieces() {
                events.push((p.left, i, p.density));
                events.push((p.right, i, -p.density));
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        // link index -> (active piece count, density)
        let mut active: BTreeMap<usize, (i32, f64)> = BTreeMap::new();
        let mut k = 0;
        while k < events.len() {
            let y = events[k].0;
            while k < events.len() && events[k].0 == y {
                let (_, i, d) = events[k];
                let e = active.entry(i).or_insert((0, 0.0));
                if d > 0.0 {
                    e.0 += 1;
                    e.1 += d;
                } else {
                    e.0 -= 1;
                    e.1 += d;
                }
                if e.0 == 0 {
                    active.remove(&i);
                }
                k += 1;
            }
            if k < events.len() && !active.is_empty() {
                let len = events[k].0 - y;
                let w: Vec<(f64, f64)> = active
                    .iter()
                    .map(|(&i, &(_, d))| (self.links[i].x, d))
                    .collect();
                cells.push(weighted_cell(&w, len));
            }
        }
        cells
    }

    /// Per-bin list of `(source, mass)` with `Y` binned at `bin_width` from
    /// the left end of the target hull.
    fn binned_sources(&self, bin_width: f64) -> HashMap<i64, Vec<(f64, f64)>> {
        let (y0, _) = self.target_hull();
        let index = |y: f64| ((y - y0) / bin_width).floor() as i64;
        let mut bins: HashMap<i64, Vec<(f64, f64)>> = HashMap::new();
        let mut deposit = |k: i64, x: f64, m: f64| {
            if m <= 0.0 {
                return;
            }
            let v = bins.entry(k).or_default();
            match v.last_mut() {
                Some(last) if last.0 == x => last.1 += m,
                _ => v.push((x, m)),
            }
        };
        for l in &self.links {
            for a in l.target.atoms() {
                deposit(index(a.x), l.x, a.mass);
            }
            for p in l.target.pieces() {
                let (k0, k1) = (index(p.left), index(p.right));
                for k in k0..=k1 {
                    let lo = p.left.max(y0 + k as f64 * bin_width);
                    let hi = p.right.min(y0 + (k + 1) as f64 * bin_width);
                    if hi > lo {
                        deposit(k, l.x, p.density * (hi - lo));
                    }
                }
            }
        }
        bins
    }

    pub fn monge_report(&self, bin_width: f64) -> MongeReport {
        let cells = self.backward_cells();
        let total: f64 = cells.iter().map(|c| c.mass).sum();
        let score = if total > 0.0 {
            cells.iter().map(|c| c.mass * c.var).sum::<f64>() / total
        } else {
            0.0
        };
        let mut overlap_mass = 0.0;
        let mut binned = 0.0;
        let mut binned_total = 0.0;
        for v in self.binned_sources(bin_width).values() {
            let cell = weighted_cell(v, 1.0);
            binned += cell.mass * cell.var;
            binned_total += cell.mass;
            let first = v[0].0;
            if v.iter().any(|&(x, _)| x != first) {
                overlap_mass += cell.mass;
            }
        }
        MongeReport {
            score,
            overlap_mass,
            bin_width,
            binned_score: if binned_total > 0.0 {
                binned / binned_total
            } else {
                0.0
            },
        }
    }

    /// `∫ c(x, y) π(dx, dy)`; pieces are integrated by 16-point
    /// Gauss–Legendre, split at `y = x` where cost functions typically kink.
    pub fn cost<F: Fn(f64, f64) -> f64>(&self, c: F) -> f64 {
        let mut total = 0.0;
        for l in &self.links {
            for a in l.target.atoms() {
                total += a.mass * c(l.x, a.x);
            }
            for p in l.target.pieces() {
                let mut acc = 0.0;
                if p.left < l.x && l.x < p.right {
                    acc += gauss_legendre(|y| c(l.x, y), p.left, l.x);
                    acc += gauss_legendre(|y| c(l.x, y), l.x, p.right);
                } else {
                    acc += gauss_legendre(|y| c(l.x, y), p.left, p.right);
                }
                total += p.density * acc;
            }
        }
        total
    }

    /// `E[f(E[Y|X] − X) − g(E[X|Y])]`, the backward conditional mean taken
    /// exactly on the common refinement of the targets.
    pub fn weak_cost<F, G>(&self, f: F, g: G) -> f64
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let forward: f64 = self
            .links
            .iter()
            .map(|l| l.mass * f(l.target.barycenter().unwrap_or(l.x) - l.x))
            .sum();
        let backward: f64 = self
            .backward_cells()
            .iter()
            .map(|c| c.mass * g(c.mean))
            .sum();
        forward - backward
    }

    /// One row per target atom or piece: `x,y_left,y_right,density,y_atom,mass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y_left,y_right,density,y_atom,mass\n");
        for l in &self.links {
            for p in l.target.pieces() {
                let _ = writeln!(out, "{},{},{},{},,{}", l.x, p.left, p.right, p.density, p.mass());
            }
            for a in l.target.atoms() {
                let _ = writeln!(out, "{},,,,{},{}", l.x, a.x, a.mass);
            }
        }
        out
    }
}

/// Mass, mean and variance of weighted source positions, where each weight
/// is multiplied by `len` (an interval length, or 1 for atoms).
fn weighted_cell(w: &[(f64, f64)], len: f64) -> BackCell {
    let m: f64 = w.iter().map(|&(_, d)| d).sum();
    let mean = w.iter().map(|&(x, d)| d * x).sum::<f64>() / m;
    let first = w[0].0;
    let var = if w.iter().all(|&(x, _)| x == first) {
        0.0
    } else {
        w.iter().map(|&(x, d)| d * (x - mean) * (x - mean)).sum::<f64>() / m
    };
    BackCell {
        mass: m * len,
        mean: if w.iter().all(|&(x, _)| x == first) { first } else { mean },
        var,
    }
}

/// Upper bound on the W1 distance between two plans with equal marginals.
///
/// Both plans are laid out along a common mass axis in lexicographic
/// `(x, y)` order and matched level by level; the cost `|Δx| + |Δy|` of this
/// explicit coupling bounds the Euclidean W1 from above.
pub fn w1_distance(a: &Coupling, b: &Coupling) -> Result<f64> {
    let d = (a.mass() - b.mass())
        .abs()
        .max(Measure::tv_distance(&a.first_marginal(), &b.first_marginal()))
        .max(Measure::tv_distance(&a.second_marginal(), &b.second_marginal()));
    if d > 1e-6 {
        return Err(MmtError::MarginalMismatch { discrepancy: d });
    }
    let la = lexicographic_layout(a);
    let lb = lexicographic_layout(b);
    let (mut i, mut j) = (0, 0);
    let mut t = 0.0;
    let mut total = 0.0;
    while i < la.len() && j < lb.len() {
        let (sa, sb) = (&la[i], &lb[j]);
        let end = sa.1.t1.min(sb.1.t1);
        if end > t {
            let len = end - t;
            let d0 = sa.1.position(t) - sb.1.position(t);
            let d1 = sa.1.position(end) - sb.1.position(end);
            total += len * (sa.0 - sb.0).abs() + len * abs_linear_mean(d0, d1);
            t = end;
        }
        if sa.1.t1 <= end {
            i += 1;
        }
        if sb.1.t1 <= end {
            j += 1;
        }
    }
    Ok(total)
}

/// Mean of `|d(s)|` for `d` linear from `d0` to `d1` on `[0, 1]`.
fn abs_linear_mean(d0: f64, d1: f64) -> f64 {
    if d0 * d1 >= 0.0 {
        0.5 * (d0.abs() + d1.abs())
    } else {
        0.5 * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
    }
}

/// Quantile segments of the targets, grouped by source and shifted onto one
/// mass axis in increasing source order.
fn lexicographic_layout(c: &Coupling) -> Vec<(f64, Seg)> {
    let mut links: Vec<&Link> = c.links.iter().collect();
    links.sort_by(|a, b| a.x.total_cmp(&b.x));
    let mut out = Vec::new();
    let mut offset = 0.0;
    for group in links.chunk_by(|a, b| a.x == b.x) {
        let target = Measure::sum(group.iter().map(|l| &l.target));
        let table = QuantileTable::new(&target);
        for s in &table.segs {
            let mut s = *s;
            s.t0 += offset;
            s.t1 += offset;
            out.push((group[0].x, s));
        }
        offset += table.total();
    }
    out
}

fn legendre_nodes() -> &'static [(f64, f64); 16] {
    static NODES: OnceLock<[(f64, f64); 16]> = OnceLock::new();
    NODES.get_or_init(|| {
        const N: usize = 16;
        let mut out = [(0.0, 0.0); N];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=N {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        out
    })
}

/// `∫_a^b f` by 16-point Gauss–Legendre.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    half * legendre_nodes()
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn atoms(v: &[(f64, f64)]) -> Measure {
        Measure::from_atoms(v).unwrap()
    }

    fn example_plan() -> Coupling {
        Coupling::new(vec![
            Link::new(2.0, atoms(&[(0.0, 0.25), (4.0, 0.25)])),
            Link::new(5.0, atoms(&[(3.0, 0.25), (7.0, 0.25)])),
        ])
    }

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let nodes = legendre_nodes();
        assert!((nodes.iter().map(|n| n.1).sum::<f64>() - 2.0).abs() < 1e-14);
        // degree 31 is integrated exactly
        let v = gauss_legendre(|x| x.powi(30), -1.0, 1.0);
        assert!((v - 2.0 / 31.0).abs() < 1e-14);
        let v = gauss_legendre(|x| x * x, 0.0, 3.0);
        assert!((v - 9.0).abs() < 1e-13);
    }

    #[test]
    fn martingale_examples() {
        let m = Measure::new(vec![(0.0, 0.5), (1.0, 0.5)], vec![]).unwrap();
        assert!(Coupling::identity(&m).check_martingale(1e-9));
        assert!(example_plan().check_martingale(1e-9));
        let c = Coupling::new(vec![Link::new(0.0, Measure::dirac(1.0, 1.0))]);
        assert!(!c.check_martingale(1e-9));
        assert!(matches!(
            c.require_martingale(1e-9),
            Err(MmtError::NotMartingale { .. })
        ));
    }

    #[test]
    fn monge_report_examples() {
        assert_eq!(example_plan().monge_report(0.5).score, 0.0);
        assert_eq!(example_plan().monge_report(0.5).overlap_mass, 0.0);

        let single = Coupling::new(vec![Link::new(0.0, atoms(&[(-1.0, 0.5), (1.0, 0.5)]))]);
        assert_eq!(single.monge_report(0.1).score, 0.0);

        let nu = Measure::uniform(0.0, 1.0, 0.5);
        let shared = Coupling::new(vec![Link::new(2.0, nu.clone()), Link::new(3.0, nu)]);
        let r = shared.monge_report(0.25);
        assert!((r.score - 0.25).abs() < 1e-15);
        assert!((r.binned_score - 0.25).abs() < 1e-15);
        assert!((r.overlap_mass - 1.0).abs() < 1e-15);
    }

    #[test]
    fn binned_score_sees_interleaving_that_the_exact_score_does_not() {
        // two sources alternate on a fine comb; each bin of width 1 sees both
        let mut links = Vec::new();
        for k in 0..10 {
            let y = k as f64 * 0.1;
            let x = if k % 2 == 0 { 0.0 } else { 1.0 };
            links.push(Link::new(x, Measure::uniform(y, y + 0.1, 0.1)));
        }
        let r = Coupling::new(links).monge_report(1.0);
        assert_eq!(r.score, 0.0);
        assert!((r.binned_score - 0.25).abs() < 1e-12);
    }

    #[test]
    fn cost_examples() {
        let m = Measure::new(vec![(0.0, 0.5), (1.0, 0.5)], vec![]).unwrap();
        assert_eq!(Coupling::identity(&m).cost(|x, y| (x - y).abs()), 0.0);
        assert_eq!(example_plan().cost(|x, y| (x - y).abs()), 2.0);
        assert!(example_plan().cost(|x, y| y - x).abs() < 1e-12);

        // ½δ_{-½} → U[-1,0], ½δ_{½} → U[0,1]; E|X − Y| = ¼
        let c = Coupling::new(vec![
            Link::new(-0.5, Measure::uniform(-1.0, 0.0, 0.5)),
            Link::new(0.5, Measure::uniform(0.0, 1.0, 0.5)),
        ]);
        assert!((c.cost(|x, y| (x - y).abs()) - 0.25).abs() < 1e-14);
        assert!((c.cost(|x, y| (x - y).powi(2)) - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn weak_cost_examples() {
        let sq = |t: f64| t * t;
        assert!((example_plan().weak_cost(sq, sq) + 14.5).abs() < 1e-12);

        let m = Measure::new(vec![(-1.0, 0.25), (2.0, 0.75)], vec![]).unwrap();
        let second = m.second_moment();
        assert!((Coupling::identity(&m).weak_cost(sq, sq) + second).abs() < 1e-12);

        // 2 → δ_3: f(1) − g(2) = 1 − 4 exceeds the bound f(0) − g(2) = −4
        let c = Coupling::new(vec![Link::new(2.0, Measure::dirac(3.0, 1.0))]);
        assert!((c.weak_cost(sq, sq) + 3.0).abs() < 1e-12);
    }

    #[test]
    fn w1_examples() {
        let p = example_plan();
        assert_eq!(w1_distance(&p, &p).unwrap(), 0.0);

        // the two sources of a exchange the mass on [1 − ε, 1 + ε]; the
        // level-wise matching moves mass ε/2 by ε on each side: total ε²
        let eps = 0.125;
        let pieces = |v: &[(f64, f64)]| {
            Measure::new(vec![], v.iter().map(|&(l, r)| (l, r, 0.5)).collect()).unwrap()
        };
        let a = Coupling::new(vec![
            Link::new(0.0, pieces(&[(0.0, 1.0)])),
            Link::new(1.0, pieces(&[(1.0, 2.0)])),
        ]);
        let b = Coupling::new(vec![
            Link::new(0.0, pieces(&[(0.0, 1.0 - eps), (1.0, 1.0 + eps)])),
            Link::new(1.0, pieces(&[(1.0 - eps, 1.0), (1.0 + eps, 2.0)])),
        ]);
        let d = w1_distance(&a, &b).unwrap();
        assert!((d - eps * eps).abs() < 1e-15, "{d}");

        let c = Coupling::new(vec![Link::new(0.0, Measure::dirac(5.0, 1.0))]);
        assert!(matches!(
            w1_distance(&p, &c),
            Err(MmtError::MarginalMismatch { .. })
        ));
    }

    #[test]
    fn csv_has_one_row_per_component() {
        let c = Coupling::new(vec![Link::new(
            0.0,
            Measure::new(vec![(0.0, 0.5)], vec![(-1.0, 1.0, 0.25)]).unwrap(),
        )]);
        let csv = c.to_csv();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "x,y_left,y_right,density,y_atom,mass");
        assert_eq!(rows[1], "0,-1,1,0.25,,0.5");
        assert_eq!(rows[2], "0,,,,0,0.5");
    }

    #[test]
    fn json_round_trip_and_validation() {
        let p = example_plan();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"m\":0.5"));
        let back: Coupling = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"links": [{"x": 0, "m": 1, "target": {"atoms": [[0, 0.5]]}}]}"#;
        assert!(serde_json::from_str::<Coupling>(bad).is_err());
    }

    /// Random martingale plan: each source spreads to a symmetric pair of
    /// pieces or atoms around itself.
    fn arb_martingale() -> impl Strategy<Value = Coupling> {
        prop::collection::vec((-3.0..3.0f64, 0.05..1.0f64, 0.05..1.0f64, any::<bool>()), 1..6)
            .prop_map(|v| {
                let links = v
                    .into_iter()
                    .map(|(x, m, h, atomic)| {
                        let target = if atomic {
                            atoms(&[(x - h, m / 2.0), (x + h, m / 2.0)])
                        } else {
                            Measure::uniform(x - h, x + h, m)
                        };
                        Link::new(x, target)
                    })
                    .collect();
                Coupling::new(links)
            })
    }

    proptest! {
        #[test]
        fn martingale_plans_have_zero_drift_cost(c in arb_martingale()) {
            prop_assert!(c.check_martingale(1e-9));
            prop_assert!(c.cost(|x, y| y - x).abs() < 1e-9);
        }

        #[test]
        fn marginals_reassemble(c in arb_martingale()) {
            let mu = c.first_marginal();
            let nu = c.second_marginal();
            prop_assert!(c.check_marginals(&mu, &nu, 1e-9).is_ok());
            prop_assert!((mu.mass() - nu.mass()).abs() < 1e-12);
        }

        #[test]
        fn weak_cost_lower_bound(c in arb_martingale()) {
            let sq = |t: f64| t * t;
            let bound = -c.first_marginal().second_moment();
            let v = c.weak_cost(sq, sq);
            prop_assert!(v >= bound - 1e-9);
            // for a martingale the gap is exactly E[Var(X|Y)]
            let r = c.monge_report(c.default_bin_width());
            prop_assert!((v - bound - r.score * c.mass()).abs() < 1e-9);
        }

        #[test]
        fn w1_vanishes_on_identical_plans(c in arb_martingale()) {
            prop_assert!(w1_distance(&c, &c).unwrap() < 1e-12);
        }
    }
}
