//! Potential functions `u(x) = ∫|y − x| dμ(y)` and the orders they decide.

use crate::error::{MmtError, Result};
use crate::measure::{Atom, Interval, Measure};

/// Default tolerance of the order checks.
pub const ORDER_TOL: f64 = 1e-9;

/// Exact piecewise-quadratic potential of a measure.
///
/// `coeffs[k] = (a, b, c)` describes `a·x² + b·x + c` on the `k`-th segment:
/// segment 0 is the left tail `(-∞, breaks[0]]`, segment `breaks.len()` the
/// right tail.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    breaks: Vec<f64>,
    coeffs: Vec<(f64, f64, f64)>,
    mass: f64,
    first_moment: f64,
}

impl Potential {
    pub fn new(m: &Measure) -> Self {
        let mut breaks: Vec<f64> = m
            .atoms()
            .iter()
            .map(|a| a.x)
            .chain(m.pieces().iter().flat_map(|p| [p.left, p.right]))
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let mass = m.mass();
        let first = m.first_moment();
        let atoms = m.atoms();
        let pieces = m.pieces();
        let (mut ml, mut fl) = (0.0, 0.0);
        let (mut ai, mut pi) = (0, 0);
        let mut coeffs = Vec::with_capacity(breaks.len() + 1);
        for k in 0..=breaks.len() {
            let z = if breaks.is_empty() {
                0.0
            } else if k == 0 {
                breaks[0] - 1.0
            } else if k == breaks.len() {
                breaks[k - 1] + 1.0
            } else {
                0.5 * (breaks[k - 1] + breaks[k])
            };
            while ai < atoms.len() && atoms[ai].x < z {
                ml += atoms[ai].mass;
                fl += atoms[ai].mass * atoms[ai].x;
                ai += 1;
            }
            while pi < pieces.len() && pieces[pi].right < z {
                ml += pieces[pi].mass();
                fl += pieces[pi].mass() * 0.5 * (pieces[pi].left + pieces[pi].right);
                pi += 1;
            }
            let (mut a, mut mp, mut fp, mut cq, mut bq) = (0.0, 0.0, 0.0, 0.0, 0.0);
            if let Some(p) = pieces.get(pi).filter(|p| p.left < z) {
                a = p.density;
                mp = p.mass();
                fp = mp * 0.5 * (p.left + p.right);
                bq = -p.density * (p.left + p.right);
                cq = 0.5 * p.density * (p.left * p.left + p.right * p.right);
            }
            let mr = mass - ml - mp;
            let fr = first - fl - fp;
            coeffs.push((a, ml - mr + bq, fr - fl + cq));
        }
        Potential {
            breaks,
            coeffs,
            mass,
            first_moment: first,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    /// Coefficients `(a, b, c)` per segment, tails included.
    pub fn segments(&self) -> &[(f64, f64, f64)] {
        &self.coeffs
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn first_moment(&self) -> f64 {
        self.first_moment
    }

    fn segment_of(&self, x: f64) -> usize {
        self.breaks.partition_point(|&b| b < x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (a, b, c) = self.coeffs[self.segment_of(x)];
        (a * x + b) * x + c
    }

    /// `∫(y − k)_+ dμ(y)`.
    pub fn call(&self, k: f64) -> f64 {
        0.5 * (self.eval(k) + self.first_moment - k * self.mass)
    }

    /// `∫(k − y)_+ dμ(y)`.
    pub fn put(&self, k: f64) -> f64 {
        0.5 * (self.eval(k) - self.first_moment + k * self.mass)
    }
}

pub fn potential(m: &Measure) -> Potential {
    Potential::new(m)
}

/// Outcome of a convex-order test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
    /// The order holds only up to the tolerance: the potentials cross by a
    /// margin too small to call either way.
    Boundary,
}

impl Verdict {
    /// True for `Holds` and `Boundary`.
    pub fn is_ordered(self) -> bool {
        self != Verdict::Violated
    }
}

/// Worst point of a potential comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderWitness {
    pub verdict: Verdict,
    /// Where the minimum of the checked difference sits.
    pub point: f64,
    /// The minimum itself (negative means a violation).
    pub slack: f64,
    pub reason: &'static str,
}

/// Minimum over all merged segments of
/// `scale·(u_ν − u_μ)(k) + β + γ·k`, inspecting breakpoints and interior
/// parabola vertices only. The tails are affine and are left to the caller.
fn min_difference(pu: &Potential, pv: &Potential, beta: f64, gamma: f64, scale: f64) -> (f64, f64) {
    let mut pts: Vec<f64> = pu.breaks.iter().chain(&pv.breaks).copied().collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let f = |k: f64| scale * (pv.eval(k) - pu.eval(k)) + beta + gamma * k;
    let mut best = (f64::NAN, f64::INFINITY);
    let mut consider = |k: f64, v: f64| {
        if v < best.1 {
            best = (k, v);
        }
    };
    for &k in &pts {
        consider(k, f(k));
    }
    for w in pts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let (au, bu, _) = pu.coeffs[pu.segment_of(mid)];
        let (av, bv, _) = pv.coeffs[pv.segment_of(mid)];
        let a = scale * (av - au);
        let b = scale * (bv - bu) + gamma;
        if a > 0.0 {
            let vertex = -b / (2.0 * a);
            if w[0] < vertex && vertex < w[1] {
                consider(vertex, f(vertex));
            }
        }
    }
    if pts.is_empty() {
        best = (0.0, beta);
    }
    best
}

/// Scale of potential values, used to size the rounding floor.
fn value_scale(mu: &Measure, nu: &Measure) -> f64 {
    let span = |m: &Measure| m.support().map_or(0.0, |(l, r)| l.abs().max(r.abs()));
    (mu.mass() + nu.mass()) * (1.0 + span(mu).max(span(nu)))
}

fn rounding_floor(mu: &Measure, nu: &Measure) -> f64 {
    1e-13 * value_scale(mu, nu)
}

fn classify(slack: f64, tol: f64, floor: f64) -> Verdict {
    if slack < -tol {
        Verdict::Violated
    } else if slack < -floor {
        Verdict::Boundary
    } else {
        Verdict::Holds
    }
}

/// `μ ≤cx ν` with the worst point of `u_ν − u_μ`.
pub fn leq_cx_witness(mu: &Measure, nu: &Measure, tol: f64) -> OrderWitness {
    let dm = nu.mass() - mu.mass();
    if dm.abs() > tol {
        return OrderWitness {
            verdict: Verdict::Violated,
            point: f64::NAN,
            slack: -dm.abs(),
            reason: "masses differ",
        };
    }
    let df = nu.first_moment() - mu.first_moment();
    if df.abs() > tol {
        return OrderWitness {
            verdict: Verdict::Violated,
            point: f64::NAN,
            slack: -df.abs(),
            reason: "barycenters differ",
        };
    }
    let (pu, pv) = (Potential::new(mu), Potential::new(nu));
    let (point, slack) = min_difference(&pu, &pv, 0.0, 0.0, 1.0);
    OrderWitness {
        verdict: classify(slack, tol, rounding_floor(mu, nu)),
        point,
        slack,
        reason: "potential of the first measure exceeds that of the second",
    }
}

pub fn leq_cx(mu: &Measure, nu: &Measure, tol: f64) -> Verdict {
    leq_cx_witness(mu, nu, tol).verdict
}

/// Extended order `μ ≤_E ν`: calls and puts of `μ` are dominated by those of
/// `ν` at every strike. Returns the worst strike on failure.
pub fn leq_e_witness(mu: &Measure, nu: &Measure, tol: f64) -> OrderWitness {
    let dm = nu.mass() - mu.mass();
    if dm < -tol {
        return OrderWitness {
            verdict: Verdict::Violated,
            point: f64::NAN,
            slack: dm,
            reason: "mass exceeds",
        };
    }
    let df = nu.first_moment() - mu.first_moment();
    let (pu, pv) = (Potential::new(mu), Potential::new(nu));
    // calls: ½(Δu + Δf − kΔm), puts: ½(Δu − Δf + kΔm)
    let calls = min_difference(&pu, &pv, 0.5 * df, -0.5 * dm, 0.5);
    let puts = min_difference(&pu, &pv, -0.5 * df, 0.5 * dm, 0.5);
    let ((point, slack), reason) = if calls.1 <= puts.1 {
        (calls, "call price exceeds")
    } else {
        (puts, "put price exceeds")
    };
    OrderWitness {
        verdict: classify(slack, tol, rounding_floor(mu, nu)),
        point,
        slack,
        reason,
    }
}

pub fn leq_e(mu: &Measure, nu: &Measure, tol: f64) -> bool {
    leq_e_witness(mu, nu, tol).verdict.is_ordered()
}

/// Fails with [`MmtError::NotInConvexOrder`] unless `μ ≤cx ν` within `tol`.
pub fn require_cx(mu: &Measure, nu: &Measure, tol: f64, index: Option<usize>) -> Result<()> {
    let w = leq_cx_witness(mu, nu, tol);
    if w.verdict.is_ordered() {
        Ok(())
    } else {
        Err(MmtError::NotInConvexOrder {
            index,
            point: w.point,
            slack: w.slack,
            reason: w.reason.to_string(),
        })
    }
}

/// One irreducible component: the open interval where `u_μ < u_ν` and the
/// parts of both measures living on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub interval: Interval,
    pub mu: Measure,
    pub nu: Measure,
}

/// Splits `μ ≤cx ν` into irreducible components.
///
/// `μ` never charges a component endpoint inside a component. An atom of `ν`
/// at an endpoint is shared between the adjacent components in whatever
/// proportions their mass and mean balance forces; if no admissible split
/// exists the input is rejected with [`MmtError::AtomAtComponentEndpoint`].
pub fn irreducible_components(mu: &Measure, nu: &Measure, tol: f64) -> Result<Vec<Component>> {
    require_cx(mu, nu, tol, None)?;
    let Some((lo, hi)) = nu.support() else {
        return Ok(Vec::new());
    };
    let (pu, pv) = (Potential::new(mu), Potential::new(nu));
    let floor = 1e-12 * value_scale(mu, nu);
    let diff = |x: f64| pv.eval(x) - pu.eval(x);

    let mut pts: Vec<f64> = pu
        .breaks
        .iter()
        .chain(&pv.breaks)
        .copied()
        .filter(|&x| lo <= x && x <= hi)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    // Since u_ν ≥ u_μ, the zero set of the difference consists of whole
    // segments, breakpoints, and tangency points at parabola vertices; the
    // components are what lies between them.
    let mut runs: Vec<(f64, f64)> = Vec::new();
    let mut open: Option<f64> = None;
    for w in pts.windows(2) {
        let (p, q) = (w[0], w[1]);
        let mid = 0.5 * (p + q);
        if diff(p) <= floor && diff(mid) <= floor && diff(q) <= floor {
            if let Some(l) = open.take() {
                runs.push((l, p));
            }
            continue;
        }
        if diff(p) <= floor {
            if let Some(l) = open.take() {
                runs.push((l, p));
            }
        }
        let start = *open.get_or_insert(p);
        let (au, bu, _) = pu.coeffs[pu.segment_of(mid)];
        let (av, bv, _) = pv.coeffs[pv.segment_of(mid)];
        let a = av - au;
        if a > 0.0 {
            let vertex = -(bv - bu) / (2.0 * a);
            if p < vertex && vertex < q && diff(vertex) <= floor {
                runs.push((start, vertex));
                open = Some(vertex);
            }
        }
        if diff(q) <= floor {
            if let Some(l) = open.take() {
                runs.push((l, q));
            }
        }
    }
    if let (Some(l), Some(&r)) = (open, pts.last()) {
        runs.push((l, r));
    }
    runs.retain(|r| r.1 > r.0);

    let nu_atom = |x: f64| -> f64 {
        nu.atoms()
            .iter()
            .find(|a| a.x == x)
            .map_or(0.0, |a| a.mass)
    };
    let mu_atom = |x: f64| -> f64 {
        mu.atoms()
            .iter()
            .find(|a| a.x == x)
            .map_or(0.0, |a| a.mass)
    };

    let mut components = Vec::with_capacity(runs.len());
    // Mass of each endpoint atom of ν already handed out.
    let mut used: Vec<(f64, f64)> = Vec::new();
    for &(l, r) in &runs {
        let mu_i = mu.restrict_open(l, r);
        let inner = nu.restrict_open(l, r);
        // α δ_l + β δ_r closes the mass and mean gap between mu_i and inner.
        let dm = mu_i.mass() - inner.mass();
        let df = mu_i.first_moment() - inner.first_moment();
        let (al, ar) = (nu_atom(l), nu_atom(r));
        let (alpha, beta) = match (al > 0.0, ar > 0.0) {
            (false, false) => (0.0, 0.0),
            (true, false) => (dm, 0.0),
            (false, true) => (0.0, dm),
            (true, true) => {
                let beta = (df - l * dm) / (r - l);
                (dm - beta, beta)
            }
        };
        let atol = tol.max(1e-9 * mu_i.mass());
        for (x, w, avail) in [(l, alpha, al), (r, beta, ar)] {
            let taken = used.iter().find(|u| u.0 == x).map_or(0.0, |u| u.1);
            let free = avail - mu_atom(x) - taken;
            if w < -atol || w > free + atol {
                return Err(MmtError::AtomAtComponentEndpoint { at: x });
            }
        }
        for (x, w) in [(l, alpha), (r, beta)] {
            if w > 0.0 {
                match used.iter_mut().find(|u| u.0 == x) {
                    Some(u) => u.1 += w,
                    None => used.push((x, w)),
                }
            }
        }
        let ends = Measure::from_raw(
            vec![
                Atom { x: l, mass: alpha },
                Atom { x: r, mass: beta },
            ],
            Vec::new(),
        );
        components.push(Component {
            interval: Interval { left: l, right: r },
            mu: mu_i,
            nu: inner.add(&ends),
        });
    }

    let mu0 = mu.subtract(&Measure::sum(components.iter().map(|c| &c.mu)))?;
    let nu0 = nu.subtract(&Measure::sum(components.iter().map(|c| &c.nu)))?;
    let tv = Measure::tv_distance(&mu0, &nu0);
    if tv > 1e-7 * (1.0 + nu.mass()) {
        return Err(MmtError::NotInConvexOrder {
            index: None,
            point: f64::NAN,
            slack: -tv,
            reason: "mass outside the components does not stay in place".into(),
        });
    }
    Ok(components)
}
