//! Martingale couplings built from shadows: left-curtain, barcode, the
//! Monge approximation of a given martingale coupling, and the uniqueness
//! test for atomless targets.

use log::{debug, info};
use serde::Serialize;

use crate::convex_order::{require_cx, ORDER_TOL};
use crate::coupling::{Coupling, Link};
use crate::error::{MmtError, Result};
use crate::measure::{refine, Atom, Cell, Interval, Measure, Piece};
use crate::shadow::{atom_shadow, Residual};

/// Iteration cap of [`barcode`].
pub const BARCODE_MAX_ITERATIONS: usize = 64;
/// Default residual mass at which [`barcode`] stops.
pub const DEFAULT_STOP_EPS: f64 = 1e-12;

/// Relative slack under which two densities count as equal.
const TIE_REL_EPS: f64 = 1e-12;

/// Left-curtain coupling of `μ ≤cx ν`, with `μ` discretized into
/// `resolution` cells.
pub fn left_curtain(mu: &Measure, nu: &Measure, resolution: usize) -> Result<Coupling> {
    Ok(Coupling::new(
        left_curtain_cells(mu, nu, resolution)?
            .into_iter()
            .map(|(l, _)| l)
            .collect(),
    ))
}

/// Left-curtain links, each with the part of `μ` its source atom stands for.
pub fn left_curtain_cells(
    mu: &Measure,
    nu: &Measure,
    resolution: usize,
) -> Result<Vec<(Link, Cell)>> {
    require_cx(mu, nu, ORDER_TOL, None)?;
    let mut res = Residual::new(nu);
    curtain(mu.discretize_cells(resolution), &mut res)
}

fn curtain(cells: Vec<Cell>, res: &mut Residual) -> Result<Vec<(Link, Cell)>> {
    let mut out = Vec::with_capacity(cells.len());
    for cell in cells {
        let target = res.shadow_atom(cell.mass, cell.x)?;
        if !target.is_zero() {
            out.push((Link::new(cell.x, target), cell));
        }
    }
    Ok(out)
}

/// One peeling step of the barcode construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarcodeIteration {
    /// Closure of the region where the current source density dominates.
    pub region: Vec<Interval>,
    pub mu_slice: Measure,
    pub shadow_slice: Measure,
    /// Source mass still to be transported after this step.
    pub residual_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BarcodeTrace {
    pub iterations: Vec<BarcodeIteration>,
}

/// Barcode coupling of `μ ≤cx ν`.
///
/// Repeatedly takes the part of the remaining source where its density
/// (relative to the sum of the remaining source and target) is at least the
/// target's, transports it to its shadow in the remaining target by a
/// left-curtain pass, and removes both. Each slice is discretized with a
/// share of `resolution` proportional to its mass.
pub fn barcode(
    mu: &Measure,
    nu: &Measure,
    resolution: usize,
    stop_eps: f64,
) -> Result<(Coupling, BarcodeTrace)> {
    let (links, trace) = barcode_cells(mu, nu, resolution, stop_eps)?;
    Ok((
        Coupling::new(links.into_iter().map(|(l, _)| l).collect()),
        trace,
    ))
}

pub fn barcode_cells(
    mu: &Measure,
    nu: &Measure,
    resolution: usize,
    stop_eps: f64,
) -> Result<(Vec<(Link, Cell)>, BarcodeTrace)> {
    require_cx(mu, nu, ORDER_TOL, None)?;
    let total = mu.mass();
    let mut res = Residual::new(nu);
    let mut rest = mu.clone();
    let mut links = Vec::new();
    let mut trace = BarcodeTrace::default();
    while rest.mass() > stop_eps {
        if trace.iterations.len() == BARCODE_MAX_ITERATIONS {
            return Err(MmtError::NoConvergence {
                iterations: BARCODE_MAX_ITERATIONS,
                residual_mass: rest.mass(),
            });
        }
        let (mut slice, mut outside, mut region) = split_dominant(&rest, &res.to_measure());
        if slice.is_zero() {
            // only possible through rounding; finish with a single pass
            region = hull(&rest).into_iter().collect();
            slice = rest.clone();
            outside = Measure::zero();
        }
        let n = ((resolution as f64) * slice.mass() / total).ceil().max(1.0) as usize;
        let step = curtain(slice.discretize_cells(n), &mut res)?;
        let shadow_slice = Measure::sum(step.iter().map(|(l, _)| &l.target));
        debug!(
            "barcode iteration {}: slice mass {:.3e}, {} cells, remaining {:.3e}",
            trace.iterations.len(),
            slice.mass(),
            n,
            outside.mass()
        );
        trace.iterations.push(BarcodeIteration {
            region,
            mu_slice: slice,
            shadow_slice,
            residual_mass: outside.mass(),
        });
        links.extend(step);
        rest = outside;
    }
    if !rest.is_zero() {
        match curtain(rest.discretize_cells(1), &mut res) {
            Ok(step) => links.extend(step),
            Err(e) => debug!("dropping residual source mass {:.3e}: {e}", rest.mass()),
        }
    }
    info!("barcode finished after {} iterations", trace.iterations.len());
    Ok((links, trace))
}

fn hull(m: &Measure) -> Option<Interval> {
    m.support().map(|(left, right)| Interval { left, right })
}

/// Splits `μ` into its part on `{d_μ ≥ d_ν}` (densities relative to `μ + ν`)
/// and the rest, and returns the closure of that set as intervals.
fn split_dominant(mu: &Measure, nu: &Measure) -> (Measure, Measure, Vec<Interval>) {
    let mut in_atoms = Vec::new();
    let mut out_atoms = Vec::new();
    let mut region: Vec<Interval> = Vec::new();
    let mut j = 0;
    for a in mu.atoms() {
        while j < nu.atoms().len() && nu.atoms()[j].x < a.x {
            j += 1;
        }
        let b = nu
            .atoms()
            .get(j)
            .filter(|b| b.x == a.x)
            .map_or(0.0, |b| b.mass);
        if a.mass >= b * (1.0 - TIE_REL_EPS) {
            in_atoms.push(*a);
            region.push(Interval {
                left: a.x,
                right: a.x,
            });
        } else {
            out_atoms.push(*a);
        }
    }
    let mut in_pieces = Vec::new();
    let mut out_pieces = Vec::new();
    for c in refine(mu.pieces(), nu.pieces()) {
        if c.da <= 0.0 {
            continue;
        }
        let p = Piece {
            left: c.left,
            right: c.right,
            density: c.da,
        };
        if c.da >= c.db * (1.0 - TIE_REL_EPS) {
            in_pieces.push(p);
            region.push(Interval {
                left: c.left,
                right: c.right,
            });
        } else {
            out_pieces.push(p);
        }
    }
    region.sort_by(|a, b| a.left.total_cmp(&b.left));
    let mut merged: Vec<Interval> = Vec::with_capacity(region.len());
    for iv in region {
        match merged.last_mut() {
            Some(last) if iv.left <= last.right + 1e-12 * (1.0 + last.right.abs()) => {
                last.right = last.right.max(iv.right)
            }
            _ => merged.push(iv),
        }
    }
    (
        Measure::from_raw(in_atoms, in_pieces),
        Measure::from_raw(out_atoms, out_pieces),
        merged,
    )
}

/// Monge martingale coupling within `eps` of the martingale coupling `pi`.
///
/// The target axis is cut into cells of width `eps` starting at the left end
/// of the second marginal's support. Inside each cell the sources' target
/// parts are replaced by mutually singular parts with the same masses and
/// barycenters via [`decompose_singular`], so every bit of mass moves by
/// less than `eps`.
pub fn monge_approximate(pi: &Coupling, eps: f64) -> Result<Coupling> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(MmtError::InvalidArgument(format!(
            "cell width must be positive, got {eps}"
        )));
    }
    pi.require_martingale(1e-9)?;
    let nu = pi.second_marginal();
    if let Some(a) = nu.atoms().first() {
        return Err(MmtError::AtomicSecondMarginal { at: a.x });
    }
    let Some((y0, y1)) = nu.support() else {
        return Ok(pi.clone());
    };

    let mut sources: Vec<(f64, Measure)> = Vec::new();
    let mut links: Vec<&Link> = pi.links().iter().collect();
    links.sort_by(|a, b| a.x.total_cmp(&b.x));
    for group in links.chunk_by(|a, b| a.x == b.x) {
        sources.push((group[0].x, Measure::sum(group.iter().map(|l| &l.target))));
    }

    let n_cells = (((y1 - y0) / eps).ceil() as usize).max(1);
    let edge = |k: usize| if k == n_cells { y1.max(y0 + k as f64 * eps) } else { y0 + k as f64 * eps };
    // cell -> per-source pieces
    let mut cells: Vec<Vec<Vec<Piece>>> = vec![vec![Vec::new(); sources.len()]; n_cells];
    for (i, (_, target)) in sources.iter().enumerate() {
        for p in target.pieces() {
            let k0 = (((p.left - y0) / eps).floor() as usize).min(n_cells - 1);
            let k1 = (((p.right - y0) / eps).ceil() as usize).clamp(k0 + 1, n_cells);
            for (k, cell) in cells.iter_mut().enumerate().take(k1).skip(k0) {
                let (l, r) = (p.left.max(edge(k)), p.right.min(edge(k + 1)));
                if r > l {
                    cell[i].push(Piece { left: l, right: r, ..*p });
                }
            }
        }
    }

    let mut rebuilt: Vec<Vec<Measure>> = vec![Vec::new(); sources.len()];
    for cell in cells {
        let parts: Vec<Measure> = cell
            .into_iter()
            .map(|p| Measure::from_raw(Vec::new(), p))
            .collect();
        let total = Measure::sum(&parts);
        if total.is_zero() {
            continue;
        }
        for (i, part) in decompose_singular(&parts, &total)?.into_iter().enumerate() {
            if !part.is_zero() {
                rebuilt[i].push(part);
            }
        }
    }
    Ok(Coupling::new(
        sources
            .iter()
            .zip(rebuilt)
            .filter(|(_, parts)| !parts.is_empty())
            .map(|((x, _), parts)| Link::new(*x, Measure::sum(&parts)))
            .collect(),
    ))
}

/// Mutually singular replacement of a decomposition `total = Σ parts`.
///
/// The first nonzero part plays the role of the remainder; every later part
/// keeps its mass and barycenter and is replaced by the shadow of its
/// barycenter atom, shadowed in index order in what the earlier ones left.
/// The remainder becomes what is left at the end and dominates the original
/// first part in convex order.
pub fn decompose_singular(parts: &[Measure], total: &Measure) -> Result<Vec<Measure>> {
    let order: Vec<usize> = (0..parts.len()).collect();
    decompose_singular_ordered(parts, total, &order)
}

/// [`decompose_singular`] with the parts visited in the order `order`
/// (a permutation of the part indices).
pub fn decompose_singular_ordered(
    parts: &[Measure],
    total: &Measure,
    order: &[usize],
) -> Result<Vec<Measure>> {
    if let Some(a) = total.atoms().first() {
        return Err(MmtError::AtomicInput { at: a.x });
    }
    let mut seen = vec![false; parts.len()];
    if order.len() != parts.len() || order.iter().any(|&i| i >= parts.len() || std::mem::replace(&mut seen[i], true)) {
        return Err(MmtError::InvalidArgument(
            "order must be a permutation of the part indices".into(),
        ));
    }
    let discrepancy = Measure::tv_distance(&Measure::sum(parts), total);
    if discrepancy > 1e-9 * (1.0 + total.mass()) {
        return Err(MmtError::NotDecomposition { discrepancy });
    }
    let nonzero: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| !parts[i].is_zero())
        .collect();
    if nonzero.len() <= 1 {
        return Ok(parts.to_vec());
    }
    let mut out = vec![Measure::zero(); parts.len()];
    let mut res = Residual::new(total);
    for &i in &nonzero[1..] {
        let b = parts[i].barycenter()?;
        out[i] = res.shadow_atom(parts[i].mass(), b)?;
    }
    out[nonzero[0]] = res.to_measure();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Uniqueness {
    Unique,
    NotUnique,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum UniquenessWitness {
    None,
    /// Shadows of the atoms at `first` and `second` overlap by `mass`.
    Overlap { first: f64, second: f64, mass: f64 },
    /// `ν − Σ shadows` differs from the continuous part of `μ` by `tv`.
    ResidualMismatch { tv: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub verdict: Uniqueness,
    pub witness: UniquenessWitness,
    /// Each atom of `μ` with the hull of its shadow in `ν`.
    pub shadows: Vec<(Atom, Interval)>,
    pub max_overlap: f64,
    pub residual_tv: f64,
}

/// Overlap and residual thresholds: at or below the first number the
/// criterion holds, above the second it fails, in between is undecided.
const OVERLAP_BAND: (f64, f64) = (1e-8, 1e-6);
const RESIDUAL_BAND: (f64, f64) = (1e-7, 1e-5);

/// Decides whether `μ ≤cx ν` (with `ν` atomless) admits a single martingale
/// coupling: the shadows of the atoms of `μ`, taken independently in `ν`,
/// must be mutually singular and leave exactly the continuous part of `μ`.
pub fn uniqueness_check(mu: &Measure, nu: &Measure) -> Result<UniquenessReport> {
    require_cx(mu, nu, ORDER_TOL, None)?;
    if let Some(a) = nu.atoms().first() {
        return Err(MmtError::AtomicSecondMarginal { at: a.x });
    }
    let mut shadows = Vec::with_capacity(mu.atoms().len());
    for a in mu.atoms() {
        shadows.push((*a, atom_shadow(a.mass, a.x, nu)?.shadow));
    }
    let mut max_overlap = 0.0;
    let mut overlap_pair = (f64::NAN, f64::NAN);
    for (i, (a, s)) in shadows.iter().enumerate() {
        for (b, t) in &shadows[i + 1..] {
            let o = Measure::overlap(s, t);
            if o > max_overlap {
                max_overlap = o;
                overlap_pair = (a.x, b.x);
            }
        }
    }
    let covered = Measure::sum(shadows.iter().map(|(_, s)| s)).add(&mu.continuous_part());
    let residual_tv = Measure::tv_distance(nu, &covered);

    let band = |v: f64, (lo, hi): (f64, f64)| {
        if v <= lo {
            Uniqueness::Unique
        } else if v > hi {
            Uniqueness::NotUnique
        } else {
            Uniqueness::Inconclusive
        }
    };
    let (vo, vr) = (band(max_overlap, OVERLAP_BAND), band(residual_tv, RESIDUAL_BAND));
    let overlap = UniquenessWitness::Overlap {
        first: overlap_pair.0,
        second: overlap_pair.1,
        mass: max_overlap,
    };
    let mismatch = UniquenessWitness::ResidualMismatch { tv: residual_tv };
    let (verdict, witness) = match (vo, vr) {
        (Uniqueness::NotUnique, _) => (Uniqueness::NotUnique, overlap),
        (_, Uniqueness::NotUnique) => (Uniqueness::NotUnique, mismatch),
        (Uniqueness::Inconclusive, _) => (Uniqueness::Inconclusive, overlap),
        (_, Uniqueness::Inconclusive) => (Uniqueness::Inconclusive, mismatch),
        _ => (Uniqueness::Unique, UniquenessWitness::None),
    };
    Ok(UniquenessReport {
        verdict,
        witness,
        shadows: shadows
            .iter()
            .map(|(a, s)| {
                let (l, r) = s.support().unwrap_or((a.x, a.x));
                (*a, Interval { left: l, right: r })
            })
            .collect(),
        max_overlap,
        residual_tv,
    })
}

/// A configuration `x < x'` where a target point `y'` of `x'` lies strictly
/// inside the hull of the targets of `x`, if one exists (up to `tol`).
/// Links sharing a source are merged first.
pub fn left_monotone_violation(c: &Coupling, tol: f64) -> Option<(f64, f64, f64)> {
    let mut links: Vec<&Link> = c.links().iter().collect();
    links.sort_by(|a, b| a.x.total_cmp(&b.x));
    let groups: Vec<(f64, Measure)> = links
        .chunk_by(|a, b| a.x == b.x)
        .map(|g| (g[0].x, Measure::sum(g.iter().map(|l| &l.target))))
        .collect();
    for (i, (x, t)) in groups.iter().enumerate() {
        let Some((lo, hi)) = t.support() else { continue };
        let (lo, hi) = (lo + tol, hi - tol);
        if hi <= lo {
            continue;
        }
        for (xp, tp) in &groups[i + 1..] {
            if let Some(a) = tp.atoms().iter().find(|a| lo < a.x && a.x < hi) {
                return Some((*x, *xp, a.x));
            }
            if let Some(p) = tp.pieces().iter().find(|p| p.left < hi && p.right > lo) {
                return Some((*x, *xp, p.left.max(lo).midpoint(p.right.min(hi))));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_order::leq_cx;
    use crate::coupling::w1_distance;
    use proptest::prelude::*;

    fn atoms(v: &[(f64, f64)]) -> Measure {
        Measure::from_atoms(v).unwrap()
    }

    fn close(a: &Measure, b: &Measure, tol: f64) -> bool {
        Measure::tv_distance(a, b) <= tol
    }

    fn two_atoms() -> Measure {
        atoms(&[(-0.5, 0.5), (0.5, 0.5)])
    }

    #[test]
    fn left_curtain_of_equal_marginals_is_the_identity() {
        let m = atoms(&[(-1.0, 0.2), (0.5, 0.3), (2.0, 0.5)]);
        let c = left_curtain(&m, &m, 16).unwrap();
        assert_eq!(c, Coupling::identity(&m));
    }

    #[test]
    fn left_curtain_of_the_two_point_example() {
        // the left-curtain sends 2 to the lowest-variance window of mass ½
        // and mean 2 (see the shadow tests), and 5 to what is left
        let mu = atoms(&[(2.0, 0.5), (5.0, 0.5)]);
        let nu = atoms(&[(0.0, 0.25), (3.0, 0.25), (4.0, 0.25), (7.0, 0.25)]);
        let c = left_curtain(&mu, &nu, 1).unwrap();
        assert_eq!(c.links().len(), 2);
        let e1 = atoms(&[(0.0, 3.0 / 16.0), (3.0, 0.25), (4.0, 1.0 / 16.0)]);
        let e2 = atoms(&[(0.0, 1.0 / 16.0), (4.0, 3.0 / 16.0), (7.0, 0.25)]);
        assert!(close(&c.links()[0].target, &e1, 1e-15));
        assert!(close(&c.links()[1].target, &e2, 1e-15));
        assert!(c.check_martingale(1e-12));
        assert!(left_monotone_violation(&c, 0.0).is_none());
    }

    #[test]
    fn left_curtain_rejects_unordered_marginals() {
        let err = left_curtain(&two_atoms(), &Measure::dirac(0.0, 1.0), 4).unwrap_err();
        assert!(matches!(err, MmtError::NotInConvexOrder { .. }));
    }

    #[test]
    fn barcode_of_equal_marginals_takes_one_iteration() {
        let m = Measure::uniform(-1.0, 1.0, 1.0);
        let (c, trace) = barcode(&m, &m, 64, DEFAULT_STOP_EPS).unwrap();
        assert_eq!(trace.iterations.len(), 1);
        assert_eq!(trace.iterations[0].region, vec![Interval { left: -1.0, right: 1.0 }]);
        assert!(close(&c.second_marginal(), &m, 1e-12));
        // every cell is sent to itself
        for l in c.links() {
            let (lo, hi) = l.target.support().unwrap();
            assert!(lo <= l.x && l.x <= hi && hi - lo <= 2.0 / 64.0 + 1e-12);
        }
    }

    #[test]
    fn barcode_equals_left_curtain_for_atomic_source_and_atomless_target() {
        let mu = atoms(&[(-0.7, 0.3), (-0.2, 0.4), (0.3, 0.3)]);
        let nu = Measure::new(vec![], vec![(-2.0, 0.0, 0.3), (0.0, 2.0, 0.2)]).unwrap();
        let (bc, trace) = barcode(&mu, &nu, 16, DEFAULT_STOP_EPS).unwrap();
        assert_eq!(trace.iterations.len(), 1);
        let lc = left_curtain(&mu, &nu, 16).unwrap();
        assert_eq!(bc, lc);
    }

    /// Piecewise-uniform Gaussian-like bump: `n` equal-width pieces on
    /// `[-3σ, 3σ]`, total mass 1.
    fn bump(sigma: f64, n: usize) -> Measure {
        let h = 6.0 * sigma / n as f64;
        let raw: Vec<(f64, f64, f64)> = (0..n)
            .map(|k| {
                let l = -3.0 * sigma + k as f64 * h;
                let z = (l + 0.5 * h) / sigma;
                (l, l + h, (-0.5 * z * z).exp())
            })
            .collect();
        let mass: f64 = raw.iter().map(|&(l, r, d)| d * (r - l)).sum();
        Measure::new(vec![], raw.into_iter().map(|(l, r, d)| (l, r, d / mass)).collect()).unwrap()
    }

    #[test]
    fn barcode_on_gaussian_like_marginals() {
        let mu = bump(0.55, 64);
        let nu = bump(1.0, 64);
        assert!(leq_cx(&mu, &nu, ORDER_TOL).is_ordered());
        let (c, trace) = barcode(&mu, &nu, 512, DEFAULT_STOP_EPS).unwrap();
        assert!(trace.iterations.len() >= 2);
        // first region: one central interval
        let first = &trace.iterations[0].region;
        assert_eq!(first.len(), 1);
        assert!((first[0].left + first[0].right).abs() < 1e-9);
        assert!(c.check_martingale(1e-9));
        assert!(close(&c.second_marginal(), &nu, 1e-9));
        // slices on the target side never overlap
        let its = &trace.iterations;
        for i in 0..its.len() {
            for j in i + 1..its.len() {
                assert!(Measure::overlap(&its[i].shadow_slice, &its[j].shadow_slice) <= 1e-8);
            }
        }
        // residual mass strictly decreases
        assert!(its.windows(2).all(|w| w[1].residual_mass < w[0].residual_mass));
    }

    #[test]
    fn decompose_singular_examples() {
        let nu = Measure::uniform(0.0, 1.0, 1.0);
        let out = decompose_singular(std::slice::from_ref(&nu), &nu).unwrap();
        assert_eq!(out, vec![nu.clone()]);

        let half = Measure::uniform(0.0, 1.0, 0.5);
        let out = decompose_singular(&[half.clone(), half.clone()], &nu).unwrap();
        assert!(close(&out[1], &Measure::uniform(0.25, 0.75, 0.5), 1e-15));
        let outer = Measure::new(vec![], vec![(0.0, 0.25, 1.0), (0.75, 1.0, 1.0)]).unwrap();
        assert!(close(&out[0], &outer, 1e-15));
        assert!(leq_cx(&half, &out[0], ORDER_TOL).is_ordered());
    }

    #[test]
    fn decompose_singular_rejects_bad_input() {
        let nu = Measure::uniform(0.0, 1.0, 1.0);
        let half = Measure::uniform(0.0, 1.0, 0.5);
        assert!(matches!(
            decompose_singular(std::slice::from_ref(&half), &nu),
            Err(MmtError::NotDecomposition { .. })
        ));
        let atomic = Measure::dirac(0.5, 1.0);
        assert!(matches!(
            decompose_singular(std::slice::from_ref(&atomic), &atomic),
            Err(MmtError::AtomicInput { .. })
        ));
    }

    /// The martingale coupling sending each of ½δ_{∓½} to a mixture of its
    /// own half of U[-1,1] and a central uniform piece shared with the other.
    fn overlapping_plan() -> Coupling {
        let d = 0.5; // density of U[-1,1]
        let left = Measure::new(vec![], vec![(-1.0, -0.5, d), (-0.5, 0.0, 0.75 * d), (0.0, 0.5, 0.25 * d)]).unwrap();
        let right = Measure::new(vec![], vec![(-0.5, 0.0, 0.25 * d), (0.0, 0.5, 0.75 * d), (0.5, 1.0, d)]).unwrap();
        // barycenter of `left`: (-0.75·0.25 - 0.25·0.1875 + 0.25·0.0625)/0.5 = -0.4375
        Coupling::new(vec![Link::new(-0.4375, left), Link::new(0.4375, right)])
    }

    #[test]
    fn monge_approximate_on_an_overlapping_plan() {
        let pi = overlapping_plan();
        assert!(pi.check_martingale(1e-12));
        assert!(pi.monge_report(0.01).score > 0.01);
        for eps in [0.5, 0.25, 0.125] {
            let out = monge_approximate(&pi, eps).unwrap();
            assert!(out.check_martingale(1e-9));
            assert!(out.monge_report(eps).score <= 1e-8);
            assert!(close(&out.second_marginal(), &pi.second_marginal(), 1e-9));
            assert!(close(&out.first_marginal(), &pi.first_marginal(), 1e-12));
            assert!(w1_distance(&pi, &out).unwrap() <= eps * pi.mass() + 1e-9);
        }
    }

    #[test]
    fn monge_approximate_leaves_monge_plans_monge() {
        let nu = Measure::uniform(-1.0, 1.0, 1.0);
        let pi = left_curtain(&two_atoms(), &nu, 2).unwrap();
        let out = monge_approximate(&pi, 10.0).unwrap();
        assert_eq!(out.monge_report(0.1).score, 0.0);
        assert!(close(&out.second_marginal(), &nu, 1e-12));
    }

    #[test]
    fn monge_approximate_preconditions() {
        let c = Coupling::new(vec![Link::new(0.0, Measure::uniform(0.5, 1.5, 1.0))]);
        assert!(matches!(monge_approximate(&c, 0.1), Err(MmtError::NotMartingale { .. })));
        let c = Coupling::new(vec![Link::new(0.0, atoms(&[(-1.0, 0.5), (1.0, 0.5)]))]);
        assert!(matches!(monge_approximate(&c, 0.1), Err(MmtError::AtomicSecondMarginal { .. })));
    }

    #[test]
    fn uniqueness_examples() {
        let nu = Measure::uniform(-1.0, 1.0, 1.0);
        let r = uniqueness_check(&nu, &nu).unwrap();
        assert_eq!(r.verdict, Uniqueness::Unique);

        let r = uniqueness_check(&two_atoms(), &nu).unwrap();
        assert_eq!(r.verdict, Uniqueness::Unique);
        assert_eq!(r.shadows[0].1, Interval { left: -1.0, right: 0.0 });
        assert_eq!(r.shadows[1].1, Interval { left: 0.0, right: 1.0 });

        // the shadow of ½δ_0 is ν|[-⅔,⅔], which leaves too little of ν near ±1
        let mu = Measure::dirac(0.0, 0.5).add(&Measure::uniform(-2.0, 2.0, 0.5));
        let nu2 = Measure::uniform(-1.0, 1.0, 0.5).add(&Measure::uniform(-2.0, 2.0, 0.5));
        let r = uniqueness_check(&mu, &nu2).unwrap();
        assert_eq!(r.verdict, Uniqueness::NotUnique);
        assert!(matches!(r.witness, UniquenessWitness::ResidualMismatch { tv } if tv > 0.1));

        let mu = atoms(&[(-0.1, 0.5), (0.1, 0.5)]);
        let r = uniqueness_check(&mu, &nu).unwrap();
        assert_eq!(r.verdict, Uniqueness::NotUnique);
        // shadows [-0.6, 0.4] and [-0.4, 0.6] share ν|[-0.4, 0.4]
        match r.witness {
            UniquenessWitness::Overlap { mass, .. } => assert!((mass - 0.4).abs() < 1e-12),
            w => panic!("{w:?}"),
        }

        let r = uniqueness_check(&Measure::uniform(-0.5, 0.5, 1.0), &nu).unwrap();
        assert_eq!(r.verdict, Uniqueness::NotUnique);
    }

    #[test]
    fn left_monotone_detects_crossing() {
        let c = Coupling::new(vec![
            Link::new(0.0, atoms(&[(-1.0, 0.5), (1.0, 0.5)])),
            Link::new(0.5, atoms(&[(0.0, 0.25), (1.0, 0.25)])),
        ]);
        assert_eq!(left_monotone_violation(&c, 0.0), Some((0.0, 0.5, 0.0)));
    }

    /// Discrete `μ ≤cx ν` with up to ~20 atoms each.
    fn arb_discrete_pair() -> impl Strategy<Value = (Measure, Measure)> {
        let base = prop::collection::vec((-5.0..5.0f64, 0.05..1.0f64), 1..8);
        let spreads = prop::collection::vec((0usize..100, 0.1..1.0f64, 0.1..3.0f64, 0.1..3.0f64), 1..8);
        (base, spreads).prop_map(|(base, spreads)| {
            let mu = Measure::from_atoms(&base).unwrap();
            let mut nu: Vec<(f64, f64)> = mu.atoms().iter().map(|a| (a.x, a.mass)).collect();
            for (i, frac, dl, dr) in spreads {
                let i = i % nu.len();
                let (x, m) = nu[i];
                let moved = m * frac;
                let wl = dr / (dl + dr);
                nu[i].1 = m - moved;
                nu.push((x - dl, moved * wl));
                nu.push((x + dr, moved * (1.0 - wl)));
            }
            nu.retain(|a| a.1 > 0.0);
            (mu, Measure::from_atoms(&nu).unwrap())
        })
    }

    proptest! {
        #[test]
        fn left_curtain_invariants((mu, nu) in arb_discrete_pair()) {
            let c = left_curtain(&mu, &nu, 1).unwrap();
            prop_assert!(c.check_martingale(1e-9));
            prop_assert!(c.check_marginals(&mu, &nu, 1e-9).is_ok());
            prop_assert_eq!(left_monotone_violation(&c, 1e-12), None);
        }

        #[test]
        fn barcode_invariants((mu, nu) in arb_discrete_pair()) {
            let (c, trace) = barcode(&mu, &nu, 1, DEFAULT_STOP_EPS).unwrap();
            prop_assert!(c.check_martingale(1e-9));
            prop_assert!(c.check_marginals(&mu, &nu, 1e-9).is_ok());
            prop_assert!(!trace.iterations.is_empty());
        }

        #[test]
        fn decomposition_keeps_masses_and_barycenters(
            cuts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.05..1.0f64), 2..5)
        ) {
            // parts: uniform pieces inside [0, 2], summed into the total
            let parts: Vec<Measure> = cuts.iter().map(|&(a, b, d)| {
                let (l, r) = (a.min(b) * 2.0, a.max(b) * 2.0 + 0.01);
                Measure::new(vec![], vec![(l, r, d)]).unwrap()
            }).collect();
            let total = Measure::sum(&parts);
            let out = decompose_singular(&parts, &total).unwrap();
            prop_assert!(close(&Measure::sum(&out), &total, 1e-9));
            for i in 0..parts.len() {
                prop_assert!((out[i].mass() - parts[i].mass()).abs() < 1e-9);
                prop_assert!((out[i].barycenter().unwrap() - parts[i].barycenter().unwrap()).abs() < 1e-9);
                for j in i + 1..parts.len() {
                    prop_assert!(Measure::overlap(&out[i], &out[j]) <= 1e-9);
                }
            }
            prop_assert!(leq_cx(&parts[0], &out[0], 1e-9).is_ordered());
        }
    }
}
