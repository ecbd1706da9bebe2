//! Subspace direction finding: MUSIC with the full array geometry and
//! spectral RARE with only the intra-subarray geometry.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::linalg;
use crate::signal::SnapshotSet;
use crate::C64;

/// `(1/T) sum_t y(t) y(t)^H`, Hermitian by construction.
pub fn sample_covariance(y: &SnapshotSet) -> Result<DMatrix<C64>> {
    let t = y.snapshots();
    if t == 0 || y.n_elements() == 0 {
        return Err(Error::InvalidScenario("empty snapshot set".into()));
    }
    let r = &y.data * y.data.adjoint() * C64::from(1.0 / t as f64);
    Ok(linalg::hermitianize(&r))
}

/// Eigen split of a covariance into `L` signal and `N - L` noise directions.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceDecomposition {
    pub covariance: DMatrix<C64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// N x L, eigenvectors of the L largest eigenvalues.
    pub signal: DMatrix<C64>,
    /// N x (N - L).
    pub noise: DMatrix<C64>,
}

impl SubspaceDecomposition {
    pub fn new(covariance: &DMatrix<C64>, n_sources: usize) -> Result<Self> {
        let n = covariance.nrows();
        if covariance.ncols() != n {
            return Err(Error::DimensionMismatch("covariance must be square".into()));
        }
        if n_sources == 0 || n_sources >= n {
            return Err(Error::InvalidScenario(format!(
                "{n_sources} sources cannot be separated with {n} elements"
            )));
        }
        let cov = linalg::hermitianize(covariance);
        let (eigenvalues, vectors) = linalg::hermitian_eigen_descending(&cov);
        Ok(Self {
            signal: vectors.columns(0, n_sources).into_owned(),
            noise: vectors.columns(n_sources, n - n_sources).into_owned(),
            covariance: cov,
            eigenvalues,
        })
    }

    pub fn n_sources(&self) -> usize {
        self.signal.ncols()
    }
}

/// Uniform search grid on spatial frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// Rounds of local parabolic refinement around each grid extremum.
    pub refinements: usize,
}

impl SearchGrid {
    pub const DEFAULT_POINTS: usize = 10_000;

    /// The visible region `(-2 pi / lambda, 2 pi / lambda)`.
    pub fn visible(wavelength: f64) -> Self {
        let w = 2.0 * std::f64::consts::PI / wavelength;
        Self {
            lo: -w,
            hi: w,
            points: Self::DEFAULT_POINTS,
            refinements: 4,
        }
    }

    pub fn window(lo: f64, hi: f64, points: usize) -> Self {
        Self {
            lo,
            hi,
            points,
            refinements: 4,
        }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    fn validate(&self) -> Result<()> {
        if !(self.hi > self.lo) || self.points < 3 {
            return Err(Error::Domain(format!(
                "search grid [{}, {}] with {} points is degenerate",
                self.lo, self.hi, self.points
            )));
        }
        Ok(())
    }

    fn at(&self, i: usize) -> f64 {
        self.lo + self.step() * i as f64
    }
}

/// Finds the `count` deepest interior local minima of `f` on `grid`, each
/// refined by repeated three-point parabolic fits on a shrinking stencil.
/// Results are sorted ascending.
pub fn grid_minima(
    f: impl Fn(f64) -> f64 + Sync,
    grid: &SearchGrid,
    count: usize,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    grid.validate()?;
    let values: Vec<f64> = (0..grid.points).into_par_iter().map(|i| f(grid.at(i))).collect();
    pick_minima(&values, grid, count, f)
}

fn pick_minima(
    values: &[f64],
    grid: &SearchGrid,
    count: usize,
    f: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let mut minima: Vec<(usize, f64)> = (1..grid.points - 1)
        .filter(|&i| values[i] <= values[i - 1] && values[i] < values[i + 1])
        .map(|i| (i, values[i]))
        .collect();
    if minima.len() < count {
        return Err(Error::PeakSearch {
            found: minima.len(),
            wanted: count,
        });
    }
    minima.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut out: Vec<f64> = minima[..count]
        .iter()
        .map(|&(i, _)| refine(&f, grid.at(i), grid.step(), grid.refinements))
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn refine(f: &impl Fn(f64) -> f64, mut x: f64, mut h: f64, rounds: usize) -> f64 {
    for _ in 0..rounds {
        let (a, b, c) = (f(x - h), f(x), f(x + h));
        let den = a - 2.0 * b + c;
        if den > 0.0 {
            let shift = 0.5 * h * (a - c) / den;
            x += shift.clamp(-h, h);
        }
        h /= 4.0;
    }
    x
}

// steering phasors drift by a few ulps per step; re-anchor this often
const CHUNK: usize = 256;

/// `stat(a(w))` at every grid point. Steering vectors are advanced by an
/// element-wise phase step instead of recomputing every exponential.
fn spectrum_on_grid(
    g: &ArrayGeometry,
    grid: &SearchGrid,
    stat: impl Fn(&[C64]) -> f64 + Sync,
) -> Vec<f64> {
    use rayon::prelude::*;
    let pos = g.positions();
    let h = grid.step();
    let step: Vec<C64> = pos.iter().map(|&p| C64::from_polar(1.0, h * p)).collect();
    let starts: Vec<usize> = (0..grid.points).step_by(CHUNK).collect();
    starts
        .par_iter()
        .flat_map_iter(|&s| {
            let w0 = grid.at(s);
            let mut a: Vec<C64> = pos.iter().map(|&p| C64::from_polar(1.0, w0 * p)).collect();
            let end = (s + CHUNK).min(grid.points);
            let mut out = Vec::with_capacity(end - s);
            for i in s..end {
                if i > s {
                    for (v, m) in a.iter_mut().zip(&step) {
                        *v *= m;
                    }
                }
                out.push(stat(&a));
            }
            out
        })
        .collect()
}

fn steering(g: &ArrayGeometry, omega: f64) -> Vec<C64> {
    g.positions()
        .iter()
        .map(|&p| C64::from_polar(1.0, omega * p))
        .collect()
}

/// `sum_c |e_c^H a|^2` over the columns of `es`.
fn signal_energy(es: &DMatrix<C64>, a: &[C64]) -> f64 {
    es.column_iter()
        .map(|col| {
            col.iter()
                .zip(a)
                .fold(C64::new(0.0, 0.0), |acc, (e, v)| acc + e.conj() * v)
                .norm_sqr()
        })
        .sum()
}

fn music_from_steering(es: &DMatrix<C64>, a: &[C64]) -> f64 {
    let n = a.len() as f64;
    // ||a||^2 = N for unit-modulus entries
    ((n - signal_energy(es, a)) / n).max(0.0)
}

/// `||P_n a(w)||^2 / N`, computed as `||a - E_s E_s^H a||^2 / N`.
pub fn music_null_spectrum(g: &ArrayGeometry, es: &DMatrix<C64>, omega: f64) -> f64 {
    music_from_steering(es, &steering(g, omega))
}

fn check_size(g: &ArrayGeometry, d: &SubspaceDecomposition) -> Result<()> {
    if d.covariance.nrows() != g.n_elements() {
        return Err(Error::DimensionMismatch(
            "covariance size does not match the geometry".into(),
        ));
    }
    Ok(())
}

/// MUSIC: the `L` highest peaks of `1 / ||E_n^H a(w)||^2`, found as minima of
/// the null spectrum.
pub fn music_estimate(
    g: &ArrayGeometry,
    decomposition: &SubspaceDecomposition,
    grid: &SearchGrid,
) -> Result<Vec<f64>> {
    check_size(g, decomposition)?;
    grid.validate()?;
    let es = &decomposition.signal;
    let values = spectrum_on_grid(g, grid, |a| music_from_steering(es, a));
    pick_minima(&values, grid, decomposition.n_sources(), |w| {
        music_null_spectrum(g, es, w)
    })
}

/// `lambda_min(Abar^H E_n E_n^H Abar)` where `Abar(w)` is block diagonal with
/// the subarray steering vectors referenced to each subarray's first
/// element, divided by the largest subarray size.
///
/// Re-referencing a block multiplies a column of `Abar` by a unit phase,
/// which is a unitary congruence and leaves the eigenvalues alone, so the
/// global steering vector can be used directly. The subarray offsets never
/// enter the result.
pub fn rare_statistic(g: &ArrayGeometry, es: &DMatrix<C64>, omega: f64) -> f64 {
    rare_from_steering(g, es, &steering(g, omega))
}

fn rare_from_steering(g: &ArrayGeometry, es: &DMatrix<C64>, a: &[C64]) -> f64 {
    let k = g.n_subarrays();
    let l = es.ncols();
    // W = E_s^H Abar, L x K
    let mut w = DMatrix::<C64>::zeros(l, k);
    for (sub, rows) in g.subarrays().iter().enumerate() {
        for c in 0..l {
            let col = es.column(c);
            w[(c, sub)] = rows
                .clone()
                .fold(C64::new(0.0, 0.0), |acc, n| acc + col[n].conj() * a[n]);
        }
    }
    let sizes = g.subarray_sizes();
    let m = *sizes.iter().max().unwrap() as f64;
    if sizes.iter().all(|&s| s == sizes[0]) {
        // Abar^H P_n Abar = m I - W^H W, whose smallest eigenvalue is
        // m - lambda_max(W W^H); W W^H is only L x L
        let wwh = &w * w.adjoint();
        let top = match l {
            1 => wwh[(0, 0)].re,
            2 => {
                let (p, q) = (wwh[(0, 0)].re, wwh[(1, 1)].re);
                0.5 * (p + q) + (0.25 * (p - q).powi(2) + wwh[(0, 1)].norm_sqr()).sqrt()
            }
            _ => linalg::hermitian_eigen_descending(&wwh).0[0],
        };
        ((m - top) / m).max(0.0)
    } else {
        let mut mat = -(w.adjoint() * &w);
        for (i, &s) in sizes.iter().enumerate() {
            mat[(i, i)] += C64::from(s as f64);
        }
        let vals = linalg::hermitian_eigen_descending(&mat).0;
        (vals[vals.len() - 1] / m).max(0.0)
    }
}

/// Spectral RARE: the `L` deepest minima of [`rare_statistic`].
pub fn spectral_rare_estimate(
    g: &ArrayGeometry,
    decomposition: &SubspaceDecomposition,
    grid: &SearchGrid,
) -> Result<Vec<f64>> {
    check_size(g, decomposition)?;
    grid.validate()?;
    let l = decomposition.n_sources();
    if l >= g.min_subarray_size() {
        return Err(Error::InvalidScenario(format!(
            "{l} sources exceed what a {}-element subarray can identify",
            g.min_subarray_size()
        )));
    }
    let es = &decomposition.signal;
    let values = spectrum_on_grid(g, grid, |a| rare_from_steering(g, es, a));
    pick_minima(&values, grid, l, |w| rare_statistic(g, es, w))
}
