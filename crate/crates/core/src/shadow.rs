//! Shadows `S^ν(μ)`: the convex-order smallest `η ≤ ν` with `μ ≤cx η`.
//!
//! The shadow of an atom `a·δ_x` is the part of `ν` sitting at quantile levels
//! `[s, s + a]`, with `s` fixed by the mean condition. Shadows of general
//! measures are assembled atom by atom, each atom shadowed in what the
//! previous ones left over; by associativity the aggregate does not depend
//! on the order.

use serde::Serialize;

use crate::convex_order::{leq_e_witness, ORDER_TOL};
use crate::coupling::Link;
use crate::error::{MmtError, Result};
use crate::measure::{Atom, Measure, Piece, QuantileTable, Seg, SegKind, MASS_EPS, SUB_EPS};

/// Default number of cells used to discretize a non-atomic source.
pub const DEFAULT_RESOLUTION: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowResult {
    pub shadow: Measure,
    /// `ν − shadow`.
    pub residual: Measure,
    /// One link per (discretized) source atom, in processing order.
    pub links: Vec<Link>,
}

/// Order in which the atoms of a discretized source are shadowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShadowOrder {
    #[default]
    LeftToRight,
    RightToLeft,
}

/// Quantile table of a measure from which windows are cut out in place.
#[derive(Debug, Clone)]
pub(crate) struct Residual {
    segs: Vec<Seg>,
}

impl Residual {
    pub fn new(nu: &Measure) -> Self {
        Residual {
            segs: QuantileTable::new(nu).segs,
        }
    }

    pub fn total(&self) -> f64 {
        self.segs.last().map_or(0.0, |s| s.t1)
    }

    pub fn to_measure(&self) -> Measure {
        let mut atoms = Vec::new();
        let mut pieces = Vec::new();
        for s in &self.segs {
            match s.kind {
                SegKind::Atom { x } => atoms.push(Atom {
                    x,
                    mass: s.t1 - s.t0,
                }),
                SegKind::Piece {
                    left,
                    right,
                    density,
                } => pieces.push(Piece {
                    left,
                    right,
                    density,
                }),
            }
        }
        Measure::from_raw(atoms, pieces)
    }

    fn locate(&self, t: f64) -> usize {
        self.segs
            .partition_point(|s| s.t1 <= t)
            .min(self.segs.len().saturating_sub(1))
    }

    /// `∫_s^{s+a} (G(t) − x) dt`, nondecreasing in `s`.
    fn phi(&self, s: f64, a: f64, x: f64) -> f64 {
        let e = s + a;
        let mut acc = 0.0;
        for seg in &self.segs[self.locate(s)..] {
            if seg.t0 >= e {
                break;
            }
            acc += seg.integral(s.max(seg.t0), e.min(seg.t1), x);
        }
        acc
    }

    /// Lower level `s` of the window of mass `a` and mean `x`, plus the mass
    /// actually available (clamped to the total when within [`SUB_EPS`]).
    fn solve(&self, a: f64, x: f64) -> Result<(f64, f64)> {
        let total = self.total();
        if a > total + SUB_EPS {
            return Err(MmtError::NotDominatedE {
                point: x,
                slack: total - a,
            });
        }
        let a = a.min(total);
        let smax = total - a;
        let tol = 1e-9 * a * (1.0 + x.abs());
        let at_left = self.phi(0.0, a, x);
        if at_left >= 0.0 {
            if at_left > tol {
                return Err(MmtError::NotDominatedE {
                    point: x,
                    slack: -at_left,
                });
            }
            return Ok((0.0, a));
        }
        let at_right = self.phi(smax, a, x);
        if at_right <= 0.0 {
            if at_right < -tol {
                return Err(MmtError::NotDominatedE {
                    point: x,
                    slack: at_right,
                });
            }
            return Ok((smax, a));
        }

        // φ is quadratic between consecutive points of {t_k} ∪ {t_k − a};
        // bracket the root among the t_k first, then among the t_k − a.
        let ends: Vec<f64> = self.segs.iter().map(|s| s.t0).collect();
        let k_hi = ends.partition_point(|&t| t < smax);
        let k = last_nonpositive(0, k_hi, |i| self.phi(ends[i], a, x));
        let mut lo = ends[k];
        let mut hi = if k + 1 < ends.len() { ends[k + 1].min(smax) } else { smax };
        let m0 = ends.partition_point(|&t| t - a <= lo);
        let m1 = ends.partition_point(|&t| t - a < hi);
        if m0 < m1 {
            let shifted = |i: usize| ends[i] - a;
            let phi_at = |i: usize| self.phi(shifted(i), a, x);
            if phi_at(m0) <= 0.0 {
                let m = last_nonpositive(m0, m1, phi_at);
                lo = shifted(m);
                if m + 1 < m1 {
                    hi = shifted(m + 1);
                }
            } else {
                hi = shifted(m0);
            }
        }

        let mid = 0.5 * (lo + hi);
        let s_seg = &self.segs[self.locate(mid)];
        let e_seg = &self.segs[self.locate(mid + a)];
        let phi0 = self.phi(lo, a, x).min(0.0);
        let b = (e_seg.position(lo + a) - s_seg.position(lo)).max(0.0);
        let q = 0.5 * (e_seg.slope() - s_seg.slope());
        let denom = b + (b * b - 4.0 * q * phi0).max(0.0).sqrt();
        let tau = if phi0 == 0.0 || denom <= 0.0 {
            0.0
        } else {
            -2.0 * phi0 / denom
        };
        Ok(((lo + tau).clamp(lo, hi), a))
    }

    /// Cuts out levels `[s, s + a]` and returns them as a measure.
    fn take(&mut self, s: f64, a: f64) -> Measure {
        let e = s + a;
        let mut kept = Vec::with_capacity(self.segs.len() + 2);
        let mut w_atoms = Vec::new();
        let mut w_pieces = Vec::new();
        for seg in &self.segs {
            if seg.t1 <= s || seg.t0 >= e {
                kept.push(*seg);
                continue;
            }
            let (u0, u1) = (s.max(seg.t0), e.min(seg.t1));
            match seg.kind {
                SegKind::Atom { x } => {
                    w_atoms.push(Atom { x, mass: u1 - u0 });
                    let rest = (u0 - seg.t0) + (seg.t1 - u1);
                    if rest > 0.0 {
                        kept.push(Seg {
                            t0: 0.0,
                            t1: rest,
                            kind: seg.kind,
                        });
                    }
                }
                SegKind::Piece {
                    left,
                    right,
                    density,
                } => {
                    let (p0, p1) = (seg.position(u0), seg.position(u1));
                    if p1 > p0 {
                        w_pieces.push(Piece {
                            left: p0,
                            right: p1,
                            density,
                        });
                    }
                    for (l, r) in [(left, p0), (p1, right)] {
                        if r > l {
                            kept.push(Seg {
                                t0: 0.0,
                                t1: 0.0,
                                kind: SegKind::Piece {
                                    left: l,
                                    right: r,
                                    density,
                                },
                            });
                        }
                    }
                }
            }
        }
        // Relevel: piece masses from geometry, atom masses from the old levels.
        let mut t = 0.0;
        for seg in &mut kept {
            let m = match seg.kind {
                SegKind::Atom { .. } => seg.t1 - seg.t0,
                SegKind::Piece {
                    left,
                    right,
                    density,
                } => density * (right - left),
            };
            seg.t0 = t;
            t += m;
            seg.t1 = t;
        }
        kept.retain(|s| s.t1 > s.t0);
        self.segs = kept;
        Measure::from_raw(w_atoms, w_pieces)
    }

    /// Shadow of `a·δ_x` in the residual, which loses it.
    pub fn shadow_atom(&mut self, a: f64, x: f64) -> Result<Measure> {
        let (s, a) = self.solve(a, x)?;
        Ok(self.take(s, a))
    }

    /// Sequential shadows of `(x, mass)` atoms in the given order.
    pub fn shadow_atoms<I>(&mut self, atoms: I) -> Result<Vec<Link>>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut links = Vec::new();
        for (x, a) in atoms {
            if a < MASS_EPS {
                continue;
            }
            let target = self.shadow_atom(a, x)?;
            if !target.is_zero() {
                links.push(Link::new(x, target));
            }
        }
        Ok(links)
    }
}

/// Largest `i` in `[lo, hi)` with `f(i) ≤ 0`, assuming `f(lo) ≤ 0` and `f`
/// nondecreasing.
fn last_nonpositive<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: F) -> usize {
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Shadow of the atom `a·δ_x` in `ν`.
pub fn atom_shadow(a: f64, x: f64, nu: &Measure) -> Result<ShadowResult> {
    if !(a > 0.0) || !a.is_finite() || !x.is_finite() {
        return Err(MmtError::InvalidArgument(format!(
            "atom ({x}, {a}) must have finite position and positive mass"
        )));
    }
    let mut res = Residual::new(nu);
    let shadow = res.shadow_atom(a, x)?;
    Ok(ShadowResult {
        links: vec![Link::new(x, shadow.clone())],
        shadow,
        residual: res.to_measure(),
    })
}

/// `S^ν(μ)` with `μ` discretized into `resolution` cells, processed left to right.
pub fn shadow(mu: &Measure, nu: &Measure, resolution: usize) -> Result<ShadowResult> {
    shadow_ordered(mu, nu, resolution, ShadowOrder::LeftToRight)
}

pub fn shadow_ordered(
    mu: &Measure,
    nu: &Measure,
    resolution: usize,
    order: ShadowOrder,
) -> Result<ShadowResult> {
    let w = leq_e_witness(mu, nu, ORDER_TOL);
    if !w.verdict.is_ordered() {
        return Err(MmtError::NotDominatedE {
            point: w.point,
            slack: w.slack,
        });
    }
    let mut atoms: Vec<(f64, f64)> = mu
        .discretize(resolution)
        .atoms()
        .iter()
        .map(|a| (a.x, a.mass))
        .collect();
    if order == ShadowOrder::RightToLeft {
        atoms.reverse();
    }
    let mut res = Residual::new(nu);
    let links = res.shadow_atoms(atoms)?;
    Ok(ShadowResult {
        shadow: Measure::sum(links.iter().map(|l| &l.target)),
        residual: res.to_measure(),
        links,
    })
}
