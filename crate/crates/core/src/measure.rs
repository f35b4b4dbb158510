//! Finite positive measures on the real line.
//!
//! A [`Measure`] is a finite sum of point masses and uniform densities on
//! bounded intervals. That class is closed under everything the transport
//! constructions need: restriction to intervals, removal of interval-shaped
//! shadows, and sums. Every public constructor returns the canonical form:
//!
//! * atoms sorted by position, positions strictly increasing;
//! * pieces sorted, pairwise disjoint up to endpoints, with adjacent touching
//!   pieces of equal density merged;
//! * atoms and pieces carrying less than [`MASS_EPS`] dropped.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{MmtError, Result};

/// Atoms and pieces lighter than this are dropped during canonicalization.
pub const MASS_EPS: f64 = 1e-13;
/// Negative residues of a subtraction up to this mass are clamped to zero.
pub const SUB_EPS: f64 = 1e-10;

const DENSITY_REL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub left: f64,
    pub right: f64,
    pub density: f64,
}

impl Piece {
    pub fn len(&self) -> f64 {
        self.right - self.left
    }

    pub fn mass(&self) -> f64 {
        self.density * (self.right - self.left)
    }

    fn first_moment(&self) -> f64 {
        self.density * (self.right - self.left) * 0.5 * (self.left + self.right)
    }

    fn second_moment(&self) -> f64 {
        let (l, r) = (self.left, self.right);
        self.density * (r - l) * (l * l + l * r + r * r) / 3.0
    }
}

/// A closed interval `[left, right]`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub left: f64,
    pub right: f64,
}

impl Interval {
    pub fn new(left: f64, right: f64) -> Result<Self> {
        if left.is_nan() || right.is_nan() || left > right {
            return Err(MmtError::InvalidArgument(format!(
                "interval [{left}, {right}] is empty or malformed"
            )));
        }
        Ok(Interval { left, right })
    }

    pub fn whole_line() -> Self {
        Interval {
            left: f64::NEG_INFINITY,
            right: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.left <= x && x <= self.right
    }

    pub fn len(&self) -> f64 {
        self.right - self.left
    }
}

/// Finite positive measure on ℝ in canonical form.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct Measure {
    atoms: Vec<Atom>,
    pieces: Vec<Piece>,
}

/// Wire format: `{"atoms": [[x, m], ...], "pieces": [[l, r, d], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MeasureRepr {
    #[serde(default)]
    atoms: Vec<(f64, f64)>,
    #[serde(default)]
    pieces: Vec<(f64, f64, f64)>,
}

impl TryFrom<MeasureRepr> for Measure {
    type Error = MmtError;

    fn try_from(repr: MeasureRepr) -> Result<Self> {
        Measure::new(repr.atoms, repr.pieces)
    }
}

impl From<Measure> for MeasureRepr {
    fn from(m: Measure) -> Self {
        MeasureRepr {
            atoms: m.atoms.iter().map(|a| (a.x, a.mass)).collect(),
            pieces: m
                .pieces
                .iter()
                .map(|p| (p.left, p.right, p.density))
                .collect(),
        }
    }
}

impl Measure {
    /// Validates raw atoms `(x, mass)` and pieces `(left, right, density)` and
    /// normalizes them. Overlapping pieces are summed.
    pub fn new(atoms: Vec<(f64, f64)>, pieces: Vec<(f64, f64, f64)>) -> Result<Self> {
        for &(x, m) in &atoms {
            if !x.is_finite() || !m.is_finite() {
                return Err(MmtError::InvalidMeasure(format!(
                    "atom ({x}, {m}) is not finite"
                )));
            }
            if m <= 0.0 {
                return Err(MmtError::InvalidMeasure(format!(
                    "atom at {x} has nonpositive mass {m}"
                )));
            }
        }
        for &(l, r, d) in &pieces {
            if !l.is_finite() || !r.is_finite() || !d.is_finite() {
                return Err(MmtError::InvalidMeasure(format!(
                    "piece ({l}, {r}, {d}) is not finite"
                )));
            }
            if d <= 0.0 {
                return Err(MmtError::InvalidMeasure(format!(
                    "piece [{l}, {r}] has nonpositive density {d}"
                )));
            }
            if l >= r {
                return Err(MmtError::InvalidMeasure(format!(
                    "piece [{l}, {r}] has nonpositive length"
                )));
            }
        }
        Ok(Self::from_raw(
            atoms.into_iter().map(|(x, mass)| Atom { x, mass }).collect(),
            pieces
                .into_iter()
                .map(|(left, right, density)| Piece {
                    left,
                    right,
                    density,
                })
                .collect(),
        ))
    }

    pub fn zero() -> Self {
        Measure::default()
    }

    pub fn dirac(x: f64, mass: f64) -> Self {
        Self::from_raw(vec![Atom { x, mass }], Vec::new())
    }

    /// Uniform law of total `mass` on `[left, right]`.
    pub fn uniform(left: f64, right: f64, mass: f64) -> Self {
        Self::from_raw(
            Vec::new(),
            vec![Piece {
                left,
                right,
                density: mass / (right - left),
            }],
        )
    }

    /// Purely atomic measure from `(x, mass)` pairs.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::new(atoms.to_vec(), Vec::new())
    }

    /// Canonicalizes without validation; nonpositive or non-finite entries
    /// are silently discarded.
    pub(crate) fn from_raw(atoms: Vec<Atom>, pieces: Vec<Piece>) -> Self {
        Measure {
            atoms: canonical_atoms(atoms),
            pieces: canonical_pieces(pieces),
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.pieces.is_empty()
    }

    pub fn is_atomless(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_purely_atomic(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn atomic_part(&self) -> Measure {
        Measure {
            atoms: self.atoms.clone(),
            pieces: Vec::new(),
        }
    }

    pub fn continuous_part(&self) -> Measure {
        Measure {
            atoms: Vec::new(),
            pieces: self.pieces.clone(),
        }
    }

    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>()
            + self.pieces.iter().map(Piece::mass).sum::<f64>()
    }

    pub fn first_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass * a.x).sum::<f64>()
            + self.pieces.iter().map(Piece::first_moment).sum::<f64>()
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass * a.x * a.x).sum::<f64>()
            + self.pieces.iter().map(Piece::second_moment).sum::<f64>()
    }

    /// First moment divided by mass.
    pub fn barycenter(&self) -> Result<f64> {
        let m = self.mass();
        if m <= 0.0 {
            return Err(MmtError::ZeroMass);
        }
        Ok(self.first_moment() / m)
    }

    /// Variance of the normalized measure.
    pub fn variance(&self) -> Result<f64> {
        let m = self.mass();
        if m <= 0.0 {
            return Err(MmtError::ZeroMass);
        }
        let b = self.first_moment() / m;
        Ok((self.second_moment() / m - b * b).max(0.0))
    }

    /// Smallest closed interval carrying all the mass.
    pub fn support(&self) -> Option<(f64, f64)> {
        let lo = self
            .atoms
            .first()
            .map(|a| a.x)
            .into_iter()
            .chain(self.pieces.first().map(|p| p.left))
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .atoms
            .last()
            .map(|a| a.x)
            .into_iter()
            .chain(self.pieces.last().map(|p| p.right))
            .fold(f64::NEG_INFINITY, f64::max);
        (lo <= hi).then_some((lo, hi))
    }

    /// Mass of `(-∞, x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        // Accumulated along the quantile table so that `quantile(cdf(x)) ≤ x`
        // holds exactly, with no rounding mismatch between the two.
        let table = QuantileTable::new(self);
        let mut level = 0.0;
        for s in &table.segs {
            match s.kind {
                SegKind::Atom { x: a } if a <= x => level = s.t1,
                SegKind::Piece { left, right, .. } if left < x => {
                    level = if right <= x {
                        s.t1
                    } else {
                        s.t0 + (s.t1 - s.t0) * ((x - left) / (right - left))
                    };
                }
                _ => break,
            }
        }
        level
    }

    /// Left-continuous generalized inverse of the cdf:
    /// `inf { x : cdf(x) ≥ q }` for `0 < q ≤ mass`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        let total = self.mass();
        if !(q > 0.0) || q > total * (1.0 + 1e-12) {
            return Err(MmtError::OutOfRange {
                level: q,
                mass: total,
            });
        }
        let table = QuantileTable::new(self);
        Ok(table.quantile(q.min(table.total())))
    }

    /// Restriction to the closed interval `iv`; atoms on finite endpoints are kept.
    pub fn restrict(&self, iv: Interval) -> Measure {
        let atoms = self
            .atoms
            .iter()
            .filter(|a| iv.contains(a.x))
            .copied()
            .collect();
        let pieces = self
            .pieces
            .iter()
            .filter_map(|p| {
                let left = p.left.max(iv.left);
                let right = p.right.min(iv.right);
                (left < right).then_some(Piece {
                    left,
                    right,
                    density: p.density,
                })
            })
            .collect();
        Self::from_raw(atoms, pieces)
    }

    /// Restriction to the open interval `(left, right)`.
    pub fn restrict_open(&self, left: f64, right: f64) -> Measure {
        let mut out = self.restrict(Interval { left, right });
        out.atoms.retain(|a| a.x != left && a.x != right);
        out
    }

    /// Splits at `x` into the parts on `(-∞, x]` and `[x, ∞)`. An atom sitting
    /// exactly at `x` is divided, `left_fraction` of it going to the left part.
    pub fn split_at(&self, x: f64, left_fraction: f64) -> (Measure, Measure) {
        let f = left_fraction.clamp(0.0, 1.0);
        let mut left = self.restrict(Interval {
            left: f64::NEG_INFINITY,
            right: x,
        });
        let mut right = self.restrict(Interval {
            left: x,
            right: f64::INFINITY,
        });
        if let Some(a) = self.atoms.iter().find(|a| a.x == x) {
            left.atoms.retain(|b| b.x != x);
            right.atoms.retain(|b| b.x != x);
            left = left.add(&Measure::dirac(x, a.mass * f));
            right = right.add(&Measure::dirac(x, a.mass * (1.0 - f)));
        }
        (left, right)
    }

    pub fn scaled(&self, factor: f64) -> Measure {
        Self::from_raw(
            self.atoms
                .iter()
                .map(|a| Atom {
                    x: a.x,
                    mass: a.mass * factor,
                })
                .collect(),
            self.pieces
                .iter()
                .map(|p| Piece {
                    density: p.density * factor,
                    ..*p
                })
                .collect(),
        )
    }

    pub fn add(&self, other: &Measure) -> Measure {
        Measure::sum([self, other])
    }

    /// Sum of many measures in one sweep.
    pub fn sum<'a, I>(measures: I) -> Measure
    where
        I: IntoIterator<Item = &'a Measure>,
    {
        let mut atoms = Vec::new();
        let mut pieces = Vec::new();
        for m in measures {
            atoms.extend_from_slice(&m.atoms);
            pieces.extend_from_slice(&m.pieces);
        }
        Self::from_raw(atoms, pieces)
    }

    /// `self − other`, failing when `other` is not dominated setwise up to
    /// [`SUB_EPS`] on some elementary region.
    pub fn subtract(&self, other: &Measure) -> Result<Measure> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        let mut j = 0;
        for a in &self.atoms {
            while j < other.atoms.len() && other.atoms[j].x < a.x {
                check_excess(other.atoms[j].x, other.atoms[j].mass)?;
                j += 1;
            }
            let mut mass = a.mass;
            if j < other.atoms.len() && other.atoms[j].x == a.x {
                mass -= other.atoms[j].mass;
                j += 1;
                if mass < 0.0 {
                    check_excess(a.x, -mass)?;
                    mass = 0.0;
                }
            }
            atoms.push(Atom { x: a.x, mass });
        }
        for b in &other.atoms[j..] {
            check_excess(b.x, b.mass)?;
        }

        let mut pieces = Vec::new();
        for cell in refine(&self.pieces, &other.pieces) {
            let mut d = cell.da - cell.db;
            if d.abs() <= DENSITY_REL_EPS * cell.da.max(cell.db) {
                d = 0.0;
            }
            if d < 0.0 {
                check_excess(cell.left, -d * (cell.right - cell.left))?;
                continue;
            }
            if d > 0.0 {
                pieces.push(Piece {
                    left: cell.left,
                    right: cell.right,
                    density: d,
                });
            }
        }
        Ok(Self::from_raw(atoms, pieces))
    }

    /// Total-variation norm of `a − b` on the common refinement.
    pub fn tv_distance(a: &Measure, b: &Measure) -> f64 {
        let mut tv = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < a.atoms.len() || j < b.atoms.len() {
            let xa = a.atoms.get(i).map_or(f64::INFINITY, |t| t.x);
            let xb = b.atoms.get(j).map_or(f64::INFINITY, |t| t.x);
            match xa.partial_cmp(&xb) {
                Some(Ordering::Less) => {
                    tv += a.atoms[i].mass;
                    i += 1;
                }
                Some(Ordering::Greater) => {
                    tv += b.atoms[j].mass;
                    j += 1;
                }
                _ => {
                    tv += (a.atoms[i].mass - b.atoms[j].mass).abs();
                    i += 1;
                    j += 1;
                }
            }
        }
        for cell in refine(&a.pieces, &b.pieces) {
            tv += (cell.da - cell.db).abs() * (cell.right - cell.left);
        }
        tv
    }

    /// Mass of `min(a, b)`: the part of the common refinement where both
    /// measures are charged.
    pub fn overlap(a: &Measure, b: &Measure) -> f64 {
        let mut ov = 0.0;
        let mut j = 0;
        for t in &a.atoms {
            while j < b.atoms.len() && b.atoms[j].x < t.x {
                j += 1;
            }
            if j < b.atoms.len() && b.atoms[j].x == t.x {
                ov += t.mass.min(b.atoms[j].mass);
            }
        }
        for cell in refine(&a.pieces, &b.pieces) {
            ov += cell.da.min(cell.db) * (cell.right - cell.left);
        }
        ov
    }

    /// Atomic measure replacing each continuous part of mass `total / n_atoms`
    /// (in quantile order) by a point mass at its barycenter.
    pub fn discretize(&self, n_atoms: usize) -> Measure {
        let cells = self.discretize_cells(n_atoms);
        Self::from_raw(
            cells
                .iter()
                .map(|c| Atom {
                    x: c.x,
                    mass: c.mass,
                })
                .collect(),
            Vec::new(),
        )
    }

    /// Like [`Measure::discretize`], but keeps track of which part of the
    /// measure each atom stands for.
    pub fn discretize_cells(&self, n_atoms: usize) -> Vec<Cell> {
        let n = n_atoms.max(1);
        let mut cells: Vec<Cell> = self
            .atoms
            .iter()
            .map(|a| Cell {
                x: a.x,
                mass: a.mass,
                spans: Vec::new(),
            })
            .collect();
        if !self.pieces.is_empty() {
            let table = QuantileTable::new(&self.continuous_part());
            let total = table.total();
            let h = total / n as f64;
            for k in 0..n {
                let t0 = h * k as f64;
                let t1 = if k + 1 == n { total } else { h * (k + 1) as f64 };
                if t1 <= t0 {
                    continue;
                }
                let mass = t1 - t0;
                let x = table.integral(t0, t1) / mass;
                let spans = table.position_spans(t0, t1);
                cells.push(Cell { x, mass, spans });
            }
        }
        cells.sort_by(|a, b| a.x.total_cmp(&b.x));
        cells
    }
}

/// One atom of a discretization together with the region it replaces.
/// `spans` is empty when the cell is an original atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub x: f64,
    pub mass: f64,
    pub spans: Vec<(f64, f64)>,
}

impl Cell {
    pub fn is_atom(&self) -> bool {
        self.spans.is_empty()
    }
}

fn check_excess(at: f64, excess: f64) -> Result<()> {
    if excess > SUB_EPS {
        Err(MmtError::NotDominated { at, excess })
    } else {
        Ok(())
    }
}

fn canonical_atoms(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.retain(|a| a.x.is_finite() && a.mass.is_finite() && a.mass > 0.0);
    atoms.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.mass.total_cmp(&b.mass)));
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(last) if last.x == a.x => last.mass += a.mass,
            _ => out.push(a),
        }
    }
    out.retain(|a| a.mass >= MASS_EPS);
    out
}

fn canonical_pieces(mut pieces: Vec<Piece>) -> Vec<Piece> {
    pieces.retain(|p| {
        p.left.is_finite() && p.right.is_finite() && p.density.is_finite()
            && p.left < p.right
            && p.density > 0.0
    });
    pieces.sort_by(|a, b| {
        a.left
            .total_cmp(&b.left)
            .then(a.right.total_cmp(&b.right))
            .then(a.density.total_cmp(&b.density))
    });
    let disjoint = pieces.windows(2).all(|w| w[0].right <= w[1].left);
    let pieces = if disjoint { pieces } else { sweep(&pieces) };

    let mut out: Vec<Piece> = Vec::with_capacity(pieces.len());
    for p in pieces {
        if let Some(last) = out.last_mut() {
            let close = (last.density - p.density).abs()
                <= DENSITY_REL_EPS * last.density.max(p.density);
            if last.right == p.left && close {
                let mass = last.mass() + p.mass();
                last.right = p.right;
                last.density = mass / (last.right - last.left);
                continue;
            }
        }
        out.push(p);
    }
    out.retain(|p| p.mass() >= MASS_EPS);
    out
}

/// Sums overlapping pieces into disjoint elementary pieces.
fn sweep(pieces: &[Piece]) -> Vec<Piece> {
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(2 * pieces.len());
    let mut dmax = 0.0f64;
    for p in pieces {
        events.push((p.left, p.density));
        events.push((p.right, -p.density));
        dmax = dmax.max(p.density);
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out = Vec::new();
    let mut density = 0.0;
    let mut i = 0;
    while i < events.len() {
        let x = events[i].0;
        while i < events.len() && events[i].0 == x {
            density += events[i].1;
            i += 1;
        }
        if density.abs() <= DENSITY_REL_EPS * dmax {
            density = 0.0;
        }
        if i < events.len() && density > 0.0 {
            out.push(Piece {
                left: x,
                right: events[i].0,
                density,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RefinedCell {
    pub left: f64,
    pub right: f64,
    pub da: f64,
    pub db: f64,
}

/// Common refinement of two canonical piece lists, restricted to where at
/// least one of them has density.
pub(crate) fn refine(a: &[Piece], b: &[Piece]) -> Vec<RefinedCell> {
    let mut cuts: Vec<f64> = a
        .iter()
        .chain(b.iter())
        .flat_map(|p| [p.left, p.right])
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    for w in cuts.windows(2) {
        let (l, r) = (w[0], w[1]);
        while i < a.len() && a[i].right <= l {
            i += 1;
        }
        while j < b.len() && b[j].right <= l {
            j += 1;
        }
        let da = match a.get(i) {
            Some(p) if p.left <= l && p.right >= r => p.density,
            _ => 0.0,
        };
        let db = match b.get(j) {
            Some(p) if p.left <= l && p.right >= r => p.density,
            _ => 0.0,
        };
        if da > 0.0 || db > 0.0 {
            out.push(RefinedCell {
                left: l,
                right: r,
                da,
                db,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum SegKind {
    Atom { x: f64 },
    Piece { left: f64, right: f64, density: f64 },
}

/// One atom or piece, placed on the cumulative-mass ("level") axis.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Seg {
    pub t0: f64,
    pub t1: f64,
    pub kind: SegKind,
}

impl Seg {
    /// Position at level `t ∈ [t0, t1]`.
    #[inline]
    pub fn position(&self, t: f64) -> f64 {
        match self.kind {
            SegKind::Atom { x } => x,
            SegKind::Piece { left, right, .. } => {
                if t <= self.t0 {
                    left
                } else if t >= self.t1 {
                    right
                } else {
                    left + (right - left) * ((t - self.t0) / (self.t1 - self.t0))
                }
            }
        }
    }

    /// Slope of the quantile function on this segment.
    #[inline]
    pub fn slope(&self) -> f64 {
        match self.kind {
            SegKind::Atom { .. } => 0.0,
            SegKind::Piece { left, right, .. } => (right - left) / (self.t1 - self.t0),
        }
    }

    /// `∫_{a}^{b} (G(t) − shift) dt` for `t0 ≤ a ≤ b ≤ t1`.
    #[inline]
    pub fn integral(&self, a: f64, b: f64, shift: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self.kind {
            SegKind::Atom { x } => (x - shift) * (b - a),
            SegKind::Piece { .. } => {
                (b - a) * (0.5 * (self.position(a) + self.position(b)) - shift)
            }
        }
    }
}

/// The quantile function of a measure, segment by segment.
#[derive(Debug, Clone)]
pub(crate) struct QuantileTable {
    pub segs: Vec<Seg>,
}

impl QuantileTable {
    pub fn new(m: &Measure) -> Self {
        let mut segs = Vec::with_capacity(m.atoms.len() + m.pieces.len() + 4);
        let mut t = 0.0;
        let mut push = |kind: SegKind, mass: f64, segs: &mut Vec<Seg>| {
            if mass > 0.0 {
                segs.push(Seg {
                    t0: t,
                    t1: t + mass,
                    kind,
                });
                t += mass;
            }
        };
        let mut ai = 0;
        for p in &m.pieces {
            while ai < m.atoms.len() && m.atoms[ai].x <= p.left {
                push(SegKind::Atom { x: m.atoms[ai].x }, m.atoms[ai].mass, &mut segs);
                ai += 1;
            }
            let mut cursor = p.left;
            while ai < m.atoms.len() && m.atoms[ai].x < p.right {
                let x = m.atoms[ai].x;
                push(
                    SegKind::Piece {
                        left: cursor,
                        right: x,
                        density: p.density,
                    },
                    p.density * (x - cursor),
                    &mut segs,
                );
                push(SegKind::Atom { x }, m.atoms[ai].mass, &mut segs);
                cursor = x;
                ai += 1;
            }
            push(
                SegKind::Piece {
                    left: cursor,
                    right: p.right,
                    density: p.density,
                },
                p.density * (p.right - cursor),
                &mut segs,
            );
        }
        while ai < m.atoms.len() {
            push(SegKind::Atom { x: m.atoms[ai].x }, m.atoms[ai].mass, &mut segs);
            ai += 1;
        }
        QuantileTable { segs }
    }

    pub fn total(&self) -> f64 {
        self.segs.last().map_or(0.0, |s| s.t1)
    }

    /// Index of the segment containing level `t` (the first one whose upper
    /// level reaches `t`).
    pub fn locate(&self, t: f64) -> usize {
        self.segs
            .partition_point(|s| s.t1 < t)
            .min(self.segs.len().saturating_sub(1))
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let i = self.locate(q);
        self.segs[i].position(q)
    }

    /// `∫_{a}^{b} G(t) dt`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut acc = 0.0;
        for s in &self.segs[self.locate(a)..] {
            if s.t0 >= b {
                break;
            }
            acc += s.integral(a.max(s.t0), b.min(s.t1), 0.0);
        }
        acc
    }

    /// Position intervals covered by the levels `[a, b]` (atoms give
    /// degenerate spans).
    pub fn position_spans(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let mut spans: Vec<(f64, f64)> = Vec::new();
        for s in &self.segs[self.locate(a)..] {
            if s.t0 >= b {
                break;
            }
            let (u0, u1) = (a.max(s.t0), b.min(s.t1));
            if u1 <= u0 {
                continue;
            }
            let (lo, hi) = (s.position(u0), s.position(u1));
            match spans.last_mut() {
                Some(last) if last.1 == lo => last.1 = hi,
                _ => spans.push((lo, hi)),
            }
        }
        spans
    }
}
