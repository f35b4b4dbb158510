//! Backward-deterministic martingales through a sequence of marginals
//! increasing in convex order, and sampling of their paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::builders::{barcode_cells, DEFAULT_STOP_EPS};
use crate::convex_order::{require_cx, ORDER_TOL};
use crate::coupling::{Coupling, Link};
use crate::error::{MmtError, Result};
use crate::measure::{Cell, Measure};

/// Two consecutive marginals closer than this in total variation are
/// treated as equal and joined by the identity.
const SAME_MARGINAL_TV: f64 = 1e-12;

/// Forward sampling table of one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ForwardKernel {
    /// The next value equals the current one.
    Identity,
    /// Each cell of the current marginal with the law of the next value
    /// given the current one lies in it.
    Cells(Vec<KernelCell>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCell {
    pub source: Cell,
    pub target: Measure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeacockChain {
    pub marginals: Vec<Measure>,
    pub couplings: Vec<Coupling>,
    pub forward_kernels: Vec<ForwardKernel>,
}

/// Joins consecutive marginals by barcode couplings.
pub fn build_chain(marginals: &[Measure], resolution: usize) -> Result<PeacockChain> {
    if marginals.is_empty() {
        return Err(MmtError::InvalidArgument("a chain needs at least one marginal".into()));
    }
    for (n, w) in marginals.windows(2).enumerate() {
        require_cx(&w[0], &w[1], ORDER_TOL, Some(n))?;
    }
    let mut couplings = Vec::with_capacity(marginals.len() - 1);
    let mut kernels = Vec::with_capacity(marginals.len() - 1);
    for (n, w) in marginals.windows(2).enumerate() {
        let (links, _) = barcode_cells(&w[0], &w[1], resolution, DEFAULT_STOP_EPS).map_err(|e| {
            match e {
                MmtError::NotInConvexOrder { point, slack, reason, .. } => {
                    MmtError::NotInConvexOrder { index: Some(n), point, slack, reason }
                }
                e => e,
            }
        })?;
        couplings.push(Coupling::new(links.iter().map(|(l, _)| l.clone()).collect()));
        kernels.push(if Measure::tv_distance(&w[0], &w[1]) <= SAME_MARGINAL_TV {
            ForwardKernel::Identity
        } else {
            ForwardKernel::Cells(
                links
                    .into_iter()
                    .map(|(Link { target, .. }, source)| KernelCell { source, target })
                    .collect(),
            )
        });
    }
    Ok(PeacockChain {
        marginals: marginals.to_vec(),
        couplings,
        forward_kernels: kernels,
    })
}

/// Sampled paths, one row per path and one column per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMatrix {
    pub n_paths: usize,
    pub n_periods: usize,
    data: Vec<f64>,
}

impl PathMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_periods..(i + 1) * self.n_periods]
    }

    pub fn column(&self, n: usize) -> Vec<f64> {
        (0..self.n_paths).map(|i| self.data[i * self.n_periods + n]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.n_periods).map(|n| format!("x{n}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.n_paths {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Lookup of the cell of a kernel containing a point.
struct CellIndex<'a> {
    cells: &'a [KernelCell],
    /// (left, right, cell) for every span, sorted by left end
    spans: Vec<(f64, f64, usize)>,
    /// (x, cell) for every atom cell, sorted by x
    atoms: Vec<(f64, usize)>,
}

impl<'a> CellIndex<'a> {
    fn new(cells: &'a [KernelCell]) -> Self {
        let mut spans = Vec::new();
        let mut atoms = Vec::new();
        for (k, c) in cells.iter().enumerate() {
            if c.source.is_atom() {
                atoms.push((c.source.x, k));
            }
            spans.extend(c.source.spans.iter().map(|&(l, r)| (l, r, k)));
        }
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        CellIndex { cells, spans, atoms }
    }

    fn find(&self, x: f64) -> &'a KernelCell {
        if let Ok(i) = self.atoms.binary_search_by(|a| a.0.total_cmp(&x)) {
            return &self.cells[self.atoms[i].1];
        }
        let i = self.spans.partition_point(|s| s.0 <= x);
        // the span starting at or before x, unless x falls in a gap closer
        // to the next one
        let dist = |j: usize| {
            let (l, r, _) = self.spans[j];
            if x < l { l - x } else if x > r { x - r } else { 0.0 }
        };
        let mut best = None;
        for j in [i.checked_sub(1), (i < self.spans.len()).then_some(i)].into_iter().flatten() {
            if best.is_none_or(|b: usize| dist(j) < dist(b)) {
                best = Some(j);
            }
        }
        match best {
            Some(j) => &self.cells[self.spans[j].2],
            None => {
                let j = self
                    .atoms
                    .iter()
                    .min_by(|a, b| (a.0 - x).abs().total_cmp(&(b.0 - x).abs()))
                    .expect("kernel has at least one cell");
                &self.cells[j.1]
            }
        }
    }
}

/// Draws `n_paths` paths of the chain. Path `i` uses its own stream of a
/// ChaCha8 generator seeded with `seed`, so paths do not depend on how many
/// others are drawn.
pub fn sample_paths(chain: &PeacockChain, n_paths: usize, seed: u64) -> Result<PathMatrix> {
    let n_periods = chain.marginals.len();
    let first = &chain.marginals[0];
    if first.is_zero() {
        return Err(MmtError::ZeroMass);
    }
    let indices: Vec<Option<CellIndex>> = chain
        .forward_kernels
        .iter()
        .map(|k| match k {
            ForwardKernel::Identity => None,
            ForwardKernel::Cells(cells) => Some(CellIndex::new(cells)),
        })
        .collect();
    let mut data = Vec::with_capacity(n_paths * n_periods);
    for i in 0..n_paths {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut x = draw(first, &mut rng)?;
        data.push(x);
        for index in &indices {
            if let Some(index) = index {
                x = draw(&index.find(x).target, &mut rng)?;
            }
            data.push(x);
        }
    }
    Ok(PathMatrix { n_paths, n_periods, data })
}

fn draw(m: &Measure, rng: &mut ChaCha8Rng) -> Result<f64> {
    // open-closed uniform so the level stays in (0, mass]
    let u: f64 = 1.0 - rng.gen::<f64>();
    m.quantile(u * m.mass())
}

/// For each period after the first: bin the values of that period with
/// width `bin_width`, regress the previous period's values on the current
/// ones within each bin, and report the path-weighted mean of the residual
/// variance. Zero when the previous value is a locally affine function of
/// the current one.
pub fn backward_determinism_score(paths: &PathMatrix, bin_width: f64) -> Result<Vec<f64>> {
    if !(bin_width > 0.0) {
        return Err(MmtError::InvalidArgument(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    let mut scores = Vec::with_capacity(paths.n_periods.saturating_sub(1));
    for n in 1..paths.n_periods {
        let cur = paths.column(n);
        let prev = paths.column(n - 1);
        let lo = cur.iter().copied().fold(f64::INFINITY, f64::min);
        let mut keyed: Vec<(i64, f64, f64)> = cur
            .iter()
            .zip(&prev)
            .map(|(&y, &x)| (((y - lo) / bin_width).floor() as i64, y, x))
            .collect();
        keyed.sort_by_key(|k| k.0);
        let total: f64 = keyed.chunk_by(|a, b| a.0 == b.0).map(residual_ss).sum();
        scores.push(if keyed.is_empty() { 0.0 } else { total / keyed.len() as f64 });
    }
    Ok(scores)
}

/// Residual sum of squares of the least-squares line through `(y, x)`.
fn residual_ss(bin: &[(i64, f64, f64)]) -> f64 {
    if bin.iter().all(|b| b.1 == b.2) {
        return 0.0;
    }
    let k = bin.len() as f64;
    let my = bin.iter().map(|b| b.1).sum::<f64>() / k;
    let mx = bin.iter().map(|b| b.2).sum::<f64>() / k;
    let (mut syy, mut sxy, mut sxx) = (0.0, 0.0, 0.0);
    for &(_, y, x) in bin {
        let (dy, dx) = (y - my, x - mx);
        syy += dy * dy;
        sxy += dx * dy;
        sxx += dx * dx;
    }
    let fit = if syy > 0.0 { sxy * sxy / syy } else { 0.0 };
    (sxx - fit).max(0.0)
}

/// Maps samples `y` of the atomless `ν` to samples of `μ` such that each
/// output is the barycenter of the `y`s mapped to it: every `y` is sent to
/// the source of the barcode link whose target contains it.
pub fn strassen_refine(
    y_samples: &[f64],
    mu: &Measure,
    nu: &Measure,
    resolution: usize,
) -> Result<Vec<f64>> {
    require_cx(mu, nu, ORDER_TOL, None)?;
    if let Some(a) = nu.atoms().first() {
        return Err(MmtError::AtomicSecondMarginal { at: a.x });
    }
    if Measure::tv_distance(mu, nu) <= SAME_MARGINAL_TV {
        return Ok(y_samples.to_vec());
    }
    let (links, _) = barcode_cells(mu, nu, resolution, DEFAULT_STOP_EPS)?;
    let mut spans: Vec<(f64, f64, f64)> = links
        .iter()
        .flat_map(|(l, _)| l.target.pieces().iter().map(|p| (p.left, p.right, l.x)))
        .collect();
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    if spans.is_empty() {
        return Err(MmtError::ZeroMass);
    }
    Ok(y_samples
        .iter()
        .map(|&y| {
            let i = spans.partition_point(|s| s.0 <= y);
            let below = i.checked_sub(1).map(|j| spans[j]);
            let above = spans.get(i).copied();
            match (below, above) {
                (Some(b), Some(a)) if y > b.1 && a.0 - y < y - b.1 => a.2,
                (Some(b), _) => b.2,
                (None, Some(a)) => a.2,
                (None, None) => unreachable!(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> Measure {
        Measure::from_atoms(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    #[test]
    fn constant_chain_gives_constant_paths() {
        let m = Measure::uniform(-1.0, 1.0, 1.0);
        let chain = build_chain(&[m.clone(), m.clone(), m.clone()], 64).unwrap();
        assert!(chain.forward_kernels.iter().all(|k| *k == ForwardKernel::Identity));
        let paths = sample_paths(&chain, 100, 7).unwrap();
        for i in 0..100 {
            let r = paths.row(i);
            assert!(r.iter().all(|&v| v == r[0]));
        }
        assert_eq!(backward_determinism_score(&paths, 0.01).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn chain_from_a_point_mass() {
        let ms = [
            Measure::dirac(0.0, 1.0),
            Measure::uniform(-1.0, 1.0, 1.0),
            Measure::uniform(-2.0, 2.0, 1.0),
        ];
        let chain = build_chain(&ms, 256).unwrap();
        assert_eq!(chain.couplings.len(), 2);
        let first = &chain.couplings[0];
        assert_eq!(first.links().len(), 1);
        assert!(Measure::tv_distance(&first.links()[0].target, &ms[1]) < 1e-15);
        for c in &chain.couplings {
            assert!(c.check_martingale(1e-9));
        }
    }

    #[test]
    fn unordered_chain_reports_its_index() {
        let ms = [Measure::dirac(0.0, 1.0), Measure::uniform(-1.0, 1.0, 1.0), Measure::dirac(0.0, 1.0)];
        match build_chain(&ms, 8) {
            Err(MmtError::NotInConvexOrder { index, .. }) => assert_eq!(index, Some(1)),
            r => panic!("{r:?}"),
        }
        match build_chain(&ms[1..], 8) {
            Err(MmtError::NotInConvexOrder { index, .. }) => assert_eq!(index, Some(0)),
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn two_point_split_has_binomial_frequencies() {
        let chain = build_chain(&[Measure::dirac(0.0, 1.0), two_point()], 4).unwrap();
        let n = 10_000;
        let paths = sample_paths(&chain, n, 42).unwrap();
        let last = paths.column(1);
        assert!(last.iter().all(|&v| v == -1.0 || v == 1.0));
        let up = last.iter().filter(|&&v| v == 1.0).count() as f64 / n as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((up - 0.5).abs() <= 3.0 * sigma, "{up}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let ms = [Measure::uniform(-1.0, 1.0, 1.0), Measure::uniform(-2.0, 2.0, 1.0)];
        let chain = build_chain(&ms, 128).unwrap();
        let a = sample_paths(&chain, 50, 3).unwrap();
        let b = sample_paths(&chain, 50, 3).unwrap();
        assert_eq!(a, b);
        let c = sample_paths(&chain, 80, 3).unwrap();
        assert_eq!(a.row(17), c.row(17));
        assert_ne!(a, sample_paths(&chain, 50, 4).unwrap());
    }

    #[test]
    fn randomized_kernel_is_not_backward_deterministic() {
        // the second period forgets the sign of the first
        let cells = vec![
            KernelCell {
                source: Cell { x: -0.5, mass: 0.5, spans: vec![] },
                target: Measure::uniform(-1.0, 1.0, 0.5),
            },
            KernelCell {
                source: Cell { x: 0.5, mass: 0.5, spans: vec![] },
                target: Measure::uniform(-1.0, 1.0, 0.5),
            },
        ];
        let m1 = Measure::from_atoms(&[(-0.5, 0.5), (0.5, 0.5)]).unwrap();
        let chain = PeacockChain {
            marginals: vec![m1, Measure::uniform(-1.0, 1.0, 1.0)],
            couplings: vec![],
            forward_kernels: vec![ForwardKernel::Cells(cells)],
        };
        let paths = sample_paths(&chain, 20_000, 1).unwrap();
        for bw in [0.2, 0.1, 0.05] {
            let s = backward_determinism_score(&paths, bw).unwrap()[0];
            // the first period is ±½ independently of the second
            assert!((s - 0.25).abs() < 0.02, "{bw}: {s}");
        }
    }

    #[test]
    fn strassen_examples() {
        let nu = Measure::uniform(-1.0, 1.0, 1.0);
        let y = [-0.9, -0.1, 0.1, 0.9];
        assert_eq!(strassen_refine(&y, &nu, &nu, 16).unwrap(), y.to_vec());
        let mu = Measure::from_atoms(&[(-0.5, 0.5), (0.5, 0.5)]).unwrap();
        assert_eq!(strassen_refine(&y, &mu, &nu, 16).unwrap(), vec![-0.5, -0.5, 0.5, 0.5]);
    }

    #[test]
    fn strassen_frequencies_match_atom_masses() {
        let nu = Measure::uniform(-1.0, 1.0, 1.0);
        let mu = Measure::from_atoms(&[(-0.75, 0.25), (0.25, 0.75)]).unwrap();
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = strassen_refine(&y, &mu, &nu, 16).unwrap();
        let low: Vec<f64> = y.iter().zip(&x).filter(|p| *p.1 == -0.75).map(|p| *p.0).collect();
        let freq = low.len() as f64 / n as f64;
        assert!((freq - 0.25).abs() <= 3.0 * (0.25f64 * 0.75 / n as f64).sqrt());
        // conditional mean of y given x' = -¾ is -¾
        let mean = low.iter().sum::<f64>() / low.len() as f64;
        assert!((mean + 0.75).abs() < 0.02, "{mean}");
    }
}
