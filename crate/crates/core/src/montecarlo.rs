//! RMSE and resolution-probability experiments over a separation grid.
//!
//! Every trial synthesizes fresh snapshots from a seed derived from the
//! master seed, the separation index and the trial index, so results do not
//! depend on the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{self, SearchGrid, SubspaceDecomposition};
use crate::geometry::ArrayGeometry;
use crate::signal::{self, derive_seed};
use crate::sweep::SweepScenario;
use crate::CalibrationMode;

pub const DEFAULT_TRIALS: usize = 300;
pub const FC_THRESHOLD_DB: f64 = -30.0;
pub const PC_THRESHOLD_DB: f64 = -13.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Music,
    SpectralRare,
}

impl Estimator {
    pub fn mode(self) -> CalibrationMode {
        match self {
            Estimator::Music => CalibrationMode::Fully,
            Estimator::SpectralRare => CalibrationMode::Partly,
        }
    }

    pub fn for_mode(mode: CalibrationMode) -> Self {
        match mode {
            CalibrationMode::Fully => Estimator::Music,
            CalibrationMode::Partly => Estimator::SpectralRare,
        }
    }

    pub fn default_threshold_db(self) -> f64 {
        match self.mode() {
            CalibrationMode::Fully => FC_THRESHOLD_DB,
            CalibrationMode::Partly => PC_THRESHOLD_DB,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Music => "music",
            Estimator::SpectralRare => "rare",
        }
    }

    pub fn estimate(
        self,
        g: &ArrayGeometry,
        d: &SubspaceDecomposition,
        grid: &SearchGrid,
    ) -> Result<Vec<f64>> {
        match self {
            Estimator::Music => estimators::music_estimate(g, d, grid),
            Estimator::SpectralRare => estimators::spectral_rare_estimate(g, d, grid),
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "music" => Ok(Estimator::Music),
            "rare" | "spectral-rare" | "spectral_rare" => Ok(Estimator::SpectralRare),
            other => Err(Error::Domain(format!("unknown estimator {other:?}"))),
        }
    }
}

/// Where the estimator searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchWindow {
    /// The whole visible region.
    Visible { points: usize },
    /// `[w_1 - h Omega, w_L + h Omega]`, clipped to the visible region.
    AroundSources { half_width: f64, points: usize },
}

impl Default for SearchWindow {
    fn default() -> Self {
        SearchWindow::AroundSources {
            half_width: 5.0,
            points: SearchGrid::DEFAULT_POINTS,
        }
    }
}

impl SearchWindow {
    pub fn grid(&self, g: &ArrayGeometry, truth: &[f64]) -> SearchGrid {
        let visible = SearchGrid::visible(g.wavelength());
        match *self {
            SearchWindow::Visible { points } => SearchGrid { points, ..visible },
            SearchWindow::AroundSources { half_width, points } => {
                let h = half_width * g.rayleigh_limit();
                let lo = (truth[0] - h).max(visible.lo);
                let hi = (truth[truth.len() - 1] + h).min(visible.hi);
                SearchGrid::window(lo, hi, points)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    pub trials: usize,
    pub seed: u64,
    /// Squared error threshold in dB relative to `Omega^2`. `None` picks the
    /// estimator's default.
    pub threshold_db: Option<f64>,
    pub window: SearchWindow,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            seed: 0,
            threshold_db: None,
            window: SearchWindow::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McPoint {
    pub normalized: f64,
    pub delta_omega: f64,
    pub rmse: f64,
    pub prob_resolve: f64,
    /// Trials whose estimator failed and were charged the capped error.
    pub n_capped: usize,
    /// More than half of the trials were capped.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub estimator: Estimator,
    pub trials: usize,
    pub threshold_db: f64,
    pub seed: u64,
    pub omega: f64,
    pub points: Vec<McPoint>,
}

impl McResult {
    pub fn mode(&self) -> CalibrationMode {
        self.estimator.mode()
    }

    /// `10 log10(RMSE^2 / Omega^2)` per point.
    pub fn rmse_db(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| error_db(p.rmse * p.rmse, self.omega))
            .collect()
    }

    /// Half width of a one-sigma band on a probability estimate.
    pub fn probability_band(&self) -> f64 {
        1.0 / (self.trials as f64).sqrt()
    }

    /// RMSE linearly interpolated in log-log coordinates at `normalized`.
    pub fn rmse_at(&self, normalized: f64) -> Option<f64> {
        interpolate_log(&self.points, normalized, |p| p.rmse)
    }

    /// Least-squares slope of `log10 RMSE` against `log10(dw / Omega)` over
    /// the points in `[lo, hi]`.
    pub fn log_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| p.normalized >= lo && p.normalized <= hi && p.rmse > 0.0)
            .map(|p| (p.normalized.log10(), p.rmse.log10()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

fn interpolate_log(points: &[McPoint], x: f64, f: impl Fn(&McPoint) -> f64) -> Option<f64> {
    let i = points.iter().position(|p| p.normalized >= x)?;
    if (points[i].normalized - x).abs() <= 1e-12 * x {
        return Some(f(&points[i]));
    }
    if i == 0 {
        return None;
    }
    let (a, b) = (&points[i - 1], &points[i]);
    let (ya, yb) = (f(a), f(b));
    if ya <= 0.0 || yb <= 0.0 {
        return None;
    }
    let t = (x.ln() - a.normalized.ln()) / (b.normalized.ln() - a.normalized.ln());
    Some((ya.ln() + t * (yb.ln() - ya.ln())).exp())
}

/// `10 log10(err2 / Omega^2)`.
pub fn error_db(squared_error: f64, omega: f64) -> f64 {
    10.0 * (squared_error / (omega * omega)).log10()
}

/// Squared error and whether it was capped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub squared_error: f64,
    pub capped: bool,
}

/// One trial: synthesize, decompose, estimate, and score against the truth
/// with sorted assignment.
pub fn run_trial(
    g: &ArrayGeometry,
    template: &SweepScenario,
    estimator: Estimator,
    delta_omega: f64,
    window: &SearchWindow,
    seed: u64,
) -> Result<TrialOutcome> {
    let sc = template.template_at(g, delta_omega)?;
    let truth = sc.frequencies();
    let grid = window.grid(g, truth);
    let cap = (grid.hi - grid.lo).powi(2);
    let y = signal::synthesize_snapshots(g, &sc, seed)?;
    let cov = estimators::sample_covariance(&y)?;
    let d = SubspaceDecomposition::new(&cov, sc.n_sources())?;
    match estimator.estimate(g, &d, &grid) {
        Ok(est) => {
            let err: f64 = est.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).sum();
            Ok(TrialOutcome {
                squared_error: err,
                capped: false,
            })
        }
        Err(Error::PeakSearch { .. }) => Ok(TrialOutcome {
            squared_error: cap,
            capped: true,
        }),
        Err(e) => Err(e),
    }
}

/// Runs `options.trials` trials at every `normalized` separation
/// (`dw / Omega`) and summarizes RMSE and resolution probability.
pub fn run(
    g: &ArrayGeometry,
    template: &SweepScenario,
    estimator: Estimator,
    normalized: &[f64],
    options: &McOptions,
) -> Result<McResult> {
    if options.trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    if normalized.is_empty() {
        return Err(Error::Domain("empty separation grid".into()));
    }
    if normalized.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::Domain("separations must be positive".into()));
    }
    if estimator == Estimator::SpectralRare && template.n_sources >= g.min_subarray_size() {
        return Err(Error::InvalidScenario(format!(
            "{} sources exceed what a {}-element subarray can identify",
            template.n_sources,
            g.min_subarray_size()
        )));
    }
    let omega = g.rayleigh_limit();
    let threshold_db = options
        .threshold_db
        .unwrap_or_else(|| estimator.default_threshold_db());
    let threshold = omega * omega * 10f64.powf(threshold_db / 10.0);
    let trials = options.trials;

    let jobs: Vec<(usize, usize)> = (0..normalized.len())
        .flat_map(|s| (0..trials).map(move |t| (s, t)))
        .collect();
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(s, t)| {
            let seed = derive_seed(derive_seed(options.seed, s as u64), t as u64);
            run_trial(
                g,
                template,
                estimator,
                normalized[s] * omega,
                &options.window,
                seed,
            )
        })
        .collect::<Result<_>>()?;

    let points = normalized
        .iter()
        .zip(outcomes.chunks(trials))
        .map(|(&x, chunk)| {
            let n_capped = chunk.iter().filter(|o| o.capped).count();
            let mse = chunk.iter().map(|o| o.squared_error).sum::<f64>() / trials as f64;
            let hits = chunk
                .iter()
                .filter(|o| !o.capped && o.squared_error < threshold)
                .count();
            McPoint {
                normalized: x,
                delta_omega: x * omega,
                rmse: mse.sqrt(),
                prob_resolve: hits as f64 / trials as f64,
                n_capped,
                flagged: 2 * n_capped > trials,
            }
        })
        .collect();
    Ok(McResult {
        estimator,
        trials,
        threshold_db,
        seed: options.seed,
        omega,
        points,
    })
}

/// RMSE over the grid with the estimator's default threshold.
pub fn rmse_experiment(
    g: &ArrayGeometry,
    template: &SweepScenario,
    estimator: Estimator,
    normalized: &[f64],
    trials: usize,
    seed: u64,
) -> Result<McResult> {
    run(
        g,
        template,
        estimator,
        normalized,
        &McOptions {
            trials,
            seed,
            ..McOptions::default()
        },
    )
}

/// Fraction of trials whose squared error is below `threshold_db`
/// (relative to `Omega^2`).
pub fn resolution_probability(
    g: &ArrayGeometry,
    template: &SweepScenario,
    estimator: Estimator,
    normalized: &[f64],
    trials: usize,
    threshold_db: f64,
    seed: u64,
) -> Result<McResult> {
    run(
        g,
        template,
        estimator,
        normalized,
        &McOptions {
            trials,
            seed,
            threshold_db: Some(threshold_db),
            ..McOptions::default()
        },
    )
}
