//! CRB sweeps over the source separation, declining-slope fits, plateau
//! flatness and turning-point detection.
//!
//! Sweeps run on the normalized axis `x = (dw / (L - 1)) / Omega`, the
//! spacing between neighbouring sources in units of the Rayleigh limit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::crb::{self, CrbReport};
use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::signal::{self, Amplitudes, Placement, SourceScenario};
use crate::{CalibrationMode, C64};

/// Log-spaced grid on the normalized axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points_per_decade: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: 0.01,
            hi: 10.0,
            points_per_decade: 60,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.lo > 0.0 && self.hi > self.lo && self.hi.is_finite()) {
            return Err(Error::Domain(format!(
                "grid bounds must satisfy 0 < lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.points_per_decade == 0 {
            return Err(Error::TooFewPoints { needed: 1, got: 0 });
        }
        Ok(log_grid(self.lo, self.hi, self.points_per_decade))
    }
}

/// `lo .. hi` with `points_per_decade` log-uniform steps per decade; both
/// ends included.
pub fn log_grid(lo: f64, hi: f64, points_per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let steps = ((decades * points_per_decade as f64).round() as usize).max(1);
    let (a, b) = (lo.log10(), hi.log10());
    (0..=steps)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / steps as f64))
        .collect()
}

/// Everything about a sweep scenario except the separation.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepScenario {
    /// Direction of the first source, radians.
    pub theta_min: f64,
    pub n_sources: usize,
    pub amplitudes: Amplitudes,
    pub noise_power: f64,
    pub snapshots: usize,
    pub placement: Placement,
    /// Seed for realizing random amplitudes once per sweep.
    pub seed: u64,
}

impl SweepScenario {
    /// `L` sources with amplitude `exp(j pi / 5)` in a single snapshot.
    pub fn standard(theta_min: f64, n_sources: usize, noise_power: f64) -> Self {
        Self {
            theta_min,
            n_sources,
            amplitudes: Amplitudes::Fixed(vec![
                C64::from_polar(1.0, std::f64::consts::PI / 5.0);
                n_sources
            ]),
            noise_power,
            snapshots: 1,
            placement: Placement::UniformAngle,
            seed: 0,
        }
    }

    pub fn with_noise_power(&self, noise_power: f64) -> Self {
        Self {
            noise_power,
            ..self.clone()
        }
    }

    /// Gaussian amplitudes are drawn here, once, so every grid point of a
    /// sweep conditions on the same amplitudes.
    fn realized_amplitudes(&self) -> Result<Amplitudes> {
        match self.amplitudes {
            Amplitudes::Gaussian => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let sc = SourceScenario::new(
                    (0..self.n_sources).map(|l| l as f64).collect(),
                    Amplitudes::Gaussian,
                    self.noise_power,
                    self.snapshots,
                )?;
                Ok(sc.realize(&mut rng)?.amplitudes().clone())
            }
            ref a => Ok(a.clone()),
        }
    }

    /// Scenario with total spread `delta_omega` between the outer sources.
    pub fn at_separation(
        &self,
        g: &ArrayGeometry,
        delta_omega: f64,
    ) -> Result<SourceScenario> {
        self.build(g, delta_omega, self.realized_amplitudes()?)
    }

    /// Like [`Self::at_separation`] but leaves Gaussian amplitudes unrealized,
    /// so every synthesized data set draws fresh ones.
    pub fn template_at(&self, g: &ArrayGeometry, delta_omega: f64) -> Result<SourceScenario> {
        self.build(g, delta_omega, self.amplitudes.clone())
    }

    fn build(
        &self,
        g: &ArrayGeometry,
        delta_omega: f64,
        amplitudes: Amplitudes,
    ) -> Result<SourceScenario> {
        let freqs = signal::place_sources(
            self.theta_min,
            delta_omega,
            self.n_sources,
            g.wavelength(),
            self.placement,
        )?;
        SourceScenario::new(freqs, amplitudes, self.noise_power, self.snapshots)
    }
}

/// Average CRB of both calibration modes over a grid of separations.
/// `None` marks a grid point whose information matrix failed the
/// condition guard.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbTrace {
    /// Total spread `omega_L - omega_1`, rad/m.
    pub delta_omega: Vec<f64>,
    /// `(dw / (L - 1)) / Omega`.
    pub normalized: Vec<f64>,
    pub fc: Vec<Option<f64>>,
    pub pc: Vec<Option<f64>>,
    pub n_sources: usize,
    /// Rayleigh limit `2 pi / D`.
    pub omega: f64,
}

impl CrbTrace {
    pub fn values(&self, mode: CalibrationMode) -> &[Option<f64>] {
        match mode {
            CalibrationMode::Fully => &self.fc,
            CalibrationMode::Partly => &self.pc,
        }
    }

    pub fn len(&self) -> usize {
        self.normalized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized.is_empty()
    }

    /// `(log10 x, log10 crb)` pairs of non-singular points with `x` in `[lo, hi]`.
    fn log_points(&self, mode: CalibrationMode, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        self.normalized
            .iter()
            .zip(self.values(mode))
            .filter(|(x, _)| **x >= lo * (1.0 - 1e-12) && **x <= hi * (1.0 + 1e-12))
            .filter_map(|(x, c)| c.map(|c| (x.log10(), c.log10())))
            .collect()
    }

    /// Centered-difference log-log slopes at grid points in `[lo, hi]`
    /// whose two neighbours are non-singular.
    pub fn local_slopes(&self, mode: CalibrationMode, lo: f64, hi: f64) -> Vec<f64> {
        let v = self.values(mode);
        let x = &self.normalized;
        (1..x.len().saturating_sub(1))
            .filter(|&i| x[i] >= lo * (1.0 - 1e-12) && x[i] <= hi * (1.0 + 1e-12))
            .filter_map(|i| match (v[i - 1], v[i + 1]) {
                (Some(a), Some(b)) => {
                    Some((b.log10() - a.log10()) / (x[i + 1].log10() - x[i - 1].log10()))
                }
                _ => None,
            })
            .collect()
    }

    /// `10 log10` of every point, `NaN` when singular.
    pub fn db(&self, mode: CalibrationMode) -> Vec<f64> {
        self.values(mode)
            .iter()
            .map(|c| c.map_or(f64::NAN, |c| 10.0 * c.log10()))
            .collect()
    }
}

fn evaluate(g: &ArrayGeometry, sc: &SourceScenario) -> (Option<f64>, Option<f64>) {
    match crb::fim_matrices(g, sc) {
        Ok(fim) => {
            let fc = crb::crb_from_fim(&fim, sc.noise_power(), CalibrationMode::Fully)
                .ok()
                .map(|r| r.average);
            let pc = crb::crb_from_fim(&fim, sc.noise_power(), CalibrationMode::Partly)
                .ok()
                .map(|r| r.average);
            (fc, pc)
        }
        Err(_) => (None, None),
    }
}

/// Average CRB for FC and PC at every grid point.
pub fn crb_sweep(g: &ArrayGeometry, base: &SweepScenario, grid: &GridSpec) -> Result<CrbTrace> {
    sweep_on(g, base, &grid.points()?)
}

/// [`crb_sweep`] on an explicit normalized grid.
pub fn sweep_on(g: &ArrayGeometry, base: &SweepScenario, normalized: &[f64]) -> Result<CrbTrace> {
    if normalized.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("sweep grid must be strictly increasing".into()));
    }
    let omega = g.rayleigh_limit();
    let gaps = base.n_sources.saturating_sub(1).max(1) as f64;
    let amplitudes = base.realized_amplitudes()?;
    let delta_omega: Vec<f64> = normalized.iter().map(|x| x * omega * gaps).collect();
    let points: Vec<(Option<f64>, Option<f64>)> = delta_omega
        .par_iter()
        .map(|&dw| match base.build(g, dw, amplitudes.clone()) {
            Ok(sc) => evaluate(g, &sc),
            Err(_) => (None, None),
        })
        .collect();
    if points.iter().all(|(f, p)| f.is_none() && p.is_none()) {
        return Err(Error::AllSingular);
    }
    let (fc, pc) = points.into_iter().unzip();
    Ok(CrbTrace {
        delta_omega,
        normalized: normalized.to_vec(),
        fc,
        pc,
        n_sources: base.n_sources,
        omega,
    })
}

/// Least-squares line through log-log points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_stderr: f64,
    pub points: usize,
}

impl SlopeFit {
    pub fn eval(&self, log_x: f64) -> f64 {
        self.intercept + self.slope * log_x
    }
}

fn fit_line(pts: &[(f64, f64)]) -> SlopeFit {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = if pts.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    SlopeFit {
        slope,
        intercept,
        slope_stderr: stderr,
        points: pts.len(),
    }
}

/// Minimum number of points for fits and flatness measurements.
pub const MIN_POINTS: usize = 8;

/// Log-log slope of the average CRB over `x` in `[alpha, beta]`.
pub fn fit_declining_slope(
    trace: &CrbTrace,
    mode: CalibrationMode,
    alpha: f64,
    beta: f64,
) -> Result<SlopeFit> {
    let pts = trace.log_points(mode, alpha, beta);
    if pts.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS,
            got: pts.len(),
        });
    }
    Ok(fit_line(&pts))
}

/// Largest `|d log10 CRB / d log10 x|` over `x` in `[lo, hi]`.
pub fn plateau_flatness(trace: &CrbTrace, mode: CalibrationMode, lo: f64, hi: f64) -> Result<f64> {
    let slopes = trace.local_slopes(mode, lo, hi);
    if slopes.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS,
            got: slopes.len(),
        });
    }
    Ok(slopes.iter().fold(0.0, |m, s| m.max(s.abs())))
}

/// Mean `|local slope|` over `x` in `[lo, hi]`.
pub fn mean_abs_slope(trace: &CrbTrace, mode: CalibrationMode, lo: f64, hi: f64) -> Result<f64> {
    let slopes = trace.local_slopes(mode, lo, hi);
    if slopes.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS,
            got: slopes.len(),
        });
    }
    Ok(slopes.iter().map(|s| s.abs()).sum::<f64>() / slopes.len() as f64)
}

/// Regions used by [`detect_turning_point`], on the normalized axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurningPointRegions {
    pub declining: (f64, f64),
    pub plateau: (f64, f64),
}

impl Default for TurningPointRegions {
    fn default() -> Self {
        Self {
            declining: (0.01, 0.1),
            // the fluctuation zone [1, 1.5] is excluded
            plateau: (1.5, 10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurningPointReport {
    pub mode: CalibrationMode,
    pub fitted_declining_slope: f64,
    pub slope_stderr: f64,
    pub plateau_flatness: f64,
    /// Median log10 CRB over the plateau region.
    pub plateau_level: f64,
    /// Neighbour spacing at the turning point, rad/m.
    pub detected_turning_point: f64,
    /// `2 pi / D`.
    pub analytic_omega: f64,
    pub ratio: f64,
    /// The fitted line met the plateau level outside the grid and was
    /// clamped to the nearest edge.
    pub clamped: bool,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Intersection of the declining fit with the plateau median level.
pub fn detect_turning_point(trace: &CrbTrace, mode: CalibrationMode) -> Result<TurningPointReport> {
    detect_turning_point_in(trace, mode, &TurningPointRegions::default())
}

pub fn detect_turning_point_in(
    trace: &CrbTrace,
    mode: CalibrationMode,
    regions: &TurningPointRegions,
) -> Result<TurningPointReport> {
    let (Some(&first), Some(&last)) = (trace.normalized.first(), trace.normalized.last()) else {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS,
            got: 0,
        });
    };
    if first > 0.05 * (1.0 + 1e-9) || last < 5.0 * (1.0 - 1e-9) {
        return Err(Error::Domain(format!(
            "trace spans [{first}, {last}], needs at least [0.05, 5]"
        )));
    }
    let fit = fit_declining_slope(trace, mode, regions.declining.0, regions.declining.1)?;
    let (plo, phi) = regions.plateau;
    let mut plateau: Vec<f64> = trace.log_points(mode, plo, phi).iter().map(|p| p.1).collect();
    if plateau.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS,
            got: plateau.len(),
        });
    }
    let level = median(&mut plateau);
    let flatness = plateau_flatness(trace, mode, plo, phi)?;
    if !(fit.slope < 0.0) {
        return Err(Error::Domain(format!(
            "declining fit has non-negative slope {}",
            fit.slope
        )));
    }
    let mut log_x = (level - fit.intercept) / fit.slope;
    let mut clamped = false;
    if log_x < first.log10() {
        log_x = first.log10();
        clamped = true;
    } else if log_x > last.log10() {
        log_x = last.log10();
        clamped = true;
    }
    let ratio = 10f64.powf(log_x);
    Ok(TurningPointReport {
        mode,
        fitted_declining_slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        plateau_flatness: flatness,
        plateau_level: level,
        detected_turning_point: ratio * trace.omega,
        analytic_omega: trace.omega,
        ratio,
        clamped,
    })
}

/// Smith resolution limit: the separation solving `dw = sqrt(u^T CRB(dw) u)`,
/// bracketed on the grid and refined by bisection. Returns total `dw` in rad/m.
pub fn smith_srl_sweep(
    g: &ArrayGeometry,
    base: &SweepScenario,
    grid: &GridSpec,
    mode: CalibrationMode,
) -> Result<f64> {
    if base.n_sources != 2 {
        return Err(Error::DimensionMismatch(format!(
            "Smith criterion needs two sources, got {}",
            base.n_sources
        )));
    }
    let amplitudes = base.realized_amplitudes()?;
    let residual = |dw: f64| -> Option<f64> {
        let sc = base.build(g, dw, amplitudes.clone()).ok()?;
        let r: CrbReport = crb::crb(g, &sc, mode).ok()?;
        Some(dw - r.smith_srl?)
    };
    let omega = g.rayleigh_limit();
    let pts: Vec<f64> = grid.points()?.iter().map(|x| x * omega).collect();
    let values: Vec<Option<f64>> = pts.par_iter().map(|&dw| residual(dw)).collect();
    let mut bracket = None;
    for i in 1..pts.len() {
        if let (Some(a), Some(b)) = (values[i - 1], values[i]) {
            if a <= 0.0 && b > 0.0 {
                bracket = Some((pts[i - 1], pts[i]));
                break;
            }
        }
    }
    let (mut lo, mut hi) = bracket.ok_or_else(|| {
        Error::Domain("Smith fixed point has no sign change on the sweep grid".into())
    })?;
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        match residual(mid) {
            Some(v) if v > 0.0 => hi = mid,
            Some(_) => lo = mid,
            None => break,
        }
        if hi / lo - 1.0 < 1e-10 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}
