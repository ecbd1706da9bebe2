//! Experiment configuration files.
//!
//! Configs are TOML. Angles are in degrees, distances in meters, subarray
//! intervals in wavelengths, SNR in dB. Every section rejects unknown keys.

use std::path::Path;

use dfcrb::montecarlo::Estimator;
use dfcrb::signal::{self, Amplitudes, Placement};
use dfcrb::sweep::{GridSpec, SweepScenario};
use dfcrb::{ArrayGeometry, CalibrationMode, C64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

// Caps so a config cannot ask for unbounded allocations.
const MAX_POINTS_PER_DECADE: usize = 10_000;
const MAX_SWEEP_RATIO: f64 = 1e12;
const MAX_GRID_POINTS: usize = 10_000_000;

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    pub sweep: Option<SweepConfig>,
    pub mc: Option<McConfig>,
    pub up_check: Option<UpCheckConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Either a uniform distributed layout or explicit positions.
#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub subarrays: Option<usize>,
    pub elements_per_subarray: Option<usize>,
    /// Meters.
    pub element_spacing: Option<f64>,
    /// Wavelengths between the first elements of neighbouring subarrays.
    pub interval: Option<f64>,
    /// Meters; explicit alternative to the uniform layout.
    pub positions: Option<Vec<f64>>,
    pub sizes: Option<Vec<usize>>,
    #[serde(default = "one")]
    pub wavelength: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeKind {
    #[default]
    Fixed,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementKind {
    #[default]
    UniformAngle,
    UniformFrequency,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_theta")]
    pub theta_min_deg: f64,
    /// One or more SNR levels, dB. Ignored when `noise_power` is given.
    #[serde(default = "default_snr")]
    pub snr_db: Vec<f64>,
    /// Linear noise power; alternative to `snr_db`.
    pub noise_power: Option<f64>,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default)]
    pub amplitudes: AmplitudeKind,
    #[serde(default = "one")]
    pub amplitude_magnitude: f64,
    #[serde(default = "default_phase")]
    pub amplitude_phase_deg: f64,
    #[serde(default)]
    pub placement: PlacementKind,
    #[serde(default)]
    pub seed: u64,
}

fn default_theta() -> f64 {
    1.2
}
fn default_snr() -> Vec<f64> {
    vec![20.0]
}
fn default_snapshots() -> usize {
    1
}
fn default_phase() -> f64 {
    36.0
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            theta_min_deg: default_theta(),
            snr_db: default_snr(),
            noise_power: None,
            snapshots: default_snapshots(),
            amplitudes: AmplitudeKind::default(),
            amplitude_magnitude: 1.0,
            amplitude_phase_deg: default_phase(),
            placement: PlacementKind::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Normalized separation range `(dw / (L - 1)) / Omega`.
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
    #[serde(default = "default_ppd")]
    pub points_per_decade: usize,
    #[serde(default = "default_sources")]
    pub sources: Vec<usize>,
    #[serde(default = "default_modes")]
    pub modes: Vec<String>,
    /// Also write per-subarray `|Q_0^k|` from `qstats`.
    #[serde(default)]
    pub per_subarray: bool,
}

fn default_lo() -> f64 {
    0.01
}
fn default_hi() -> f64 {
    10.0
}
fn default_ppd() -> usize {
    60
}
fn default_sources() -> Vec<usize> {
    vec![2]
}
fn default_modes() -> Vec<String> {
    vec!["fully".into(), "partly".into()]
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mc_sources")]
    pub sources: usize,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<String>,
    /// `dw / Omega` values.
    pub separations: Vec<f64>,
    #[serde(default = "default_fc_threshold")]
    pub threshold_fc_db: f64,
    #[serde(default = "default_pc_threshold")]
    pub threshold_pc_db: f64,
    /// Search window half width beyond the outer sources, in Rayleigh cells.
    /// Zero searches the visible region.
    #[serde(default = "default_window")]
    pub window_half_width: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_trials() -> usize {
    dfcrb::montecarlo::DEFAULT_TRIALS
}
fn default_mc_sources() -> usize {
    2
}
fn default_estimators() -> Vec<String> {
    vec!["music".into(), "rare".into()]
}
fn default_fc_threshold() -> f64 {
    dfcrb::montecarlo::FC_THRESHOLD_DB
}
fn default_pc_threshold() -> f64 {
    dfcrb::montecarlo::PC_THRESHOLD_DB
}
fn default_window() -> f64 {
    5.0
}
fn default_grid_points() -> usize {
    dfcrb::estimators::SearchGrid::DEFAULT_POINTS
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct UpCheckConfig {
    #[serde(default = "default_s_tilde")]
    pub s_tilde: Vec<f64>,
    #[serde(default = "default_powers")]
    pub powers: Vec<u32>,
    #[serde(default = "default_mu_lo")]
    pub mu_lo: f64,
    #[serde(default = "default_mu_hi")]
    pub mu_hi: f64,
    #[serde(default = "default_mu_points")]
    pub points: usize,
    #[serde(default = "default_tail")]
    pub tail_mu: f64,
}

fn default_s_tilde() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn default_powers() -> Vec<u32> {
    vec![0, 1, 2, 3]
}
fn default_mu_lo() -> f64 {
    1e-2
}
fn default_mu_hi() -> f64 {
    1e2
}
fn default_mu_points() -> usize {
    4001
}
fn default_tail() -> f64 {
    1e6
}

impl Default for UpCheckConfig {
    fn default() -> Self {
        Self {
            s_tilde: default_s_tilde(),
            powers: default_powers(),
            mu_lo: default_mu_lo(),
            mu_hi: default_mu_hi(),
            points: default_mu_points(),
            tail_mu: default_tail(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

impl ExperimentConfig {
    /// Parses and validates. Parse errors carry the line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| CliError::Parse(format!("{} is not UTF-8", path.display())))?;
        Ok((Self::parse(text)?, bytes))
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        self.scenario.validate()?;
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        if let Some(m) = &self.mc {
            m.validate()?;
        }
        if let Some(u) = &self.up_check {
            u.validate()?;
        }
        if self.output.dir.trim().is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        self.geometry.build()
    }

    pub fn sweep(&self) -> Result<&SweepConfig> {
        self.sweep.as_ref().ok_or(CliError::MissingSection("sweep"))
    }

    pub fn mc(&self) -> Result<&McConfig> {
        self.mc.as_ref().ok_or(CliError::MissingSection("mc"))
    }
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be a positive number, got {v}")))
    }
}

impl GeometryConfig {
    pub fn build(&self) -> Result<ArrayGeometry> {
        positive("geometry.wavelength", self.wavelength)?;
        let uniform = [
            self.subarrays.is_some(),
            self.elements_per_subarray.is_some(),
            self.element_spacing.is_some(),
            self.interval.is_some(),
        ];
        let explicit = self.positions.is_some() || self.sizes.is_some();
        let g = if explicit {
            if uniform.iter().any(|&u| u) {
                return Err(invalid(
                    "geometry",
                    "give either positions/sizes or the uniform layout keys, not both",
                ));
            }
            let (Some(p), Some(s)) = (&self.positions, &self.sizes) else {
                return Err(invalid("geometry", "positions and sizes must be given together"));
            };
            ArrayGeometry::from_positions(p.clone(), s, self.wavelength)
        } else {
            let (Some(k), Some(m), Some(d), Some(i)) = (
                self.subarrays,
                self.elements_per_subarray,
                self.element_spacing,
                self.interval,
            ) else {
                return Err(invalid(
                    "geometry",
                    "uniform layout needs subarrays, elements_per_subarray, element_spacing and interval",
                ));
            };
            positive("geometry.element_spacing", d)?;
            positive("geometry.interval", i)?;
            ArrayGeometry::uniform_distributed(k, m, d, i, self.wavelength)
        };
        g.map_err(|e| invalid("geometry", e.to_string()))
    }
}

impl ScenarioConfig {
    fn validate(&self) -> Result<()> {
        if !(self.theta_min_deg.is_finite() && self.theta_min_deg.abs() < 90.0) {
            return Err(invalid(
                "scenario.theta_min_deg",
                format!("must lie in (-90, 90) degrees, got {}", self.theta_min_deg),
            ));
        }
        match self.noise_power {
            Some(p) => {
                positive("scenario.noise_power", p)?;
            }
            None => {
                if self.snr_db.is_empty() {
                    return Err(invalid("scenario.snr_db", "needs at least one level"));
                }
                if let Some(s) = self.snr_db.iter().find(|s| !(s.is_finite() && (-50.0..=100.0).contains(*s))) {
                    return Err(invalid(
                        "scenario.snr_db",
                        format!("levels must lie in [-50, 100] dB, got {s}"),
                    ));
                }
            }
        }
        if self.snapshots == 0 {
            return Err(invalid("scenario.snapshots", "must be at least 1"));
        }
        positive("scenario.amplitude_magnitude", self.amplitude_magnitude)?;
        if !self.amplitude_phase_deg.is_finite() {
            return Err(invalid("scenario.amplitude_phase_deg", "must be finite"));
        }
        Ok(())
    }

    /// `(label, noise power)` for every configured level.
    pub fn noise_levels(&self, snr_override: Option<&[f64]>) -> Vec<(String, f64)> {
        if let Some(levels) = snr_override {
            return levels
                .iter()
                .map(|&s| (format!("{s}"), signal::noise_power_from_snr_db(s)))
                .collect();
        }
        match self.noise_power {
            Some(p) => vec![(format!("{}", -10.0 * p.log10()), p)],
            None => self
                .snr_db
                .iter()
                .map(|&s| (format!("{s}"), signal::noise_power_from_snr_db(s)))
                .collect(),
        }
    }

    pub fn sweep_scenario(&self, n_sources: usize, noise_power: f64) -> SweepScenario {
        let amplitudes = match self.amplitudes {
            AmplitudeKind::Gaussian => Amplitudes::Gaussian,
            AmplitudeKind::Fixed => Amplitudes::Fixed(vec![
                C64::from_polar(
                    self.amplitude_magnitude,
                    self.amplitude_phase_deg.to_radians(),
                );
                n_sources
            ]),
        };
        SweepScenario {
            theta_min: self.theta_min_deg.to_radians(),
            n_sources,
            amplitudes,
            noise_power,
            snapshots: self.snapshots,
            placement: match self.placement {
                PlacementKind::UniformAngle => Placement::UniformAngle,
                PlacementKind::UniformFrequency => Placement::UniformFrequency,
            },
            seed: self.seed,
        }
    }
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if !(1..=MAX_POINTS_PER_DECADE).contains(&self.points_per_decade) {
            return Err(invalid(
                "sweep.points_per_decade",
                format!("must lie in 1..={MAX_POINTS_PER_DECADE}"),
            ));
        }
        let (lo, hi) = (positive("sweep.lo", self.lo)?, positive("sweep.hi", self.hi)?);
        if hi / lo > MAX_SWEEP_RATIO {
            return Err(invalid("sweep.hi", format!("range may span at most {MAX_SWEEP_RATIO:e}")));
        }
        self.grid()
            .points()
            .map_err(|e| invalid("sweep.lo/hi", e.to_string()))?;
        if self.sources.is_empty() || self.sources.contains(&0) {
            return Err(invalid("sweep.sources", "needs source counts of at least 1"));
        }
        self.modes()?;
        Ok(())
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            lo: self.lo,
            hi: self.hi,
            points_per_decade: self.points_per_decade,
        }
    }

    pub fn modes(&self) -> Result<Vec<CalibrationMode>> {
        if self.modes.is_empty() {
            return Err(invalid("sweep.modes", "needs at least one mode"));
        }
        self.modes
            .iter()
            .map(|m| m.parse().map_err(|_| invalid("sweep.modes", format!("unknown mode {m:?}"))))
            .collect()
    }
}

impl McConfig {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("mc.trials", "must be at least 1"));
        }
        if self.sources == 0 {
            return Err(invalid("mc.sources", "must be at least 1"));
        }
        if self.separations.is_empty() {
            return Err(invalid("mc.separations", "needs at least one separation"));
        }
        for &s in &self.separations {
            positive("mc.separations", s)?;
        }
        if self.window_half_width < 0.0 || !self.window_half_width.is_finite() {
            return Err(invalid("mc.window_half_width", "must be zero or positive"));
        }
        if !(3..=MAX_GRID_POINTS).contains(&self.grid_points) {
            return Err(invalid("mc.grid_points", format!("must lie in 3..={MAX_GRID_POINTS}")));
        }
        for (f, v) in [("mc.threshold_fc_db", self.threshold_fc_db), ("mc.threshold_pc_db", self.threshold_pc_db)] {
            if !v.is_finite() {
                return Err(invalid(f, "must be finite"));
            }
        }
        self.estimators()?;
        Ok(())
    }

    pub fn estimators(&self) -> Result<Vec<Estimator>> {
        if self.estimators.is_empty() {
            return Err(invalid("mc.estimators", "needs at least one estimator"));
        }
        self.estimators
            .iter()
            .map(|e| {
                e.parse()
                    .map_err(|_| invalid("mc.estimators", format!("unknown estimator {e:?}")))
            })
            .collect()
    }

    pub fn threshold_db(&self, estimator: Estimator) -> f64 {
        match estimator.mode() {
            CalibrationMode::Fully => self.threshold_fc_db,
            CalibrationMode::Partly => self.threshold_pc_db,
        }
    }
}

impl UpCheckConfig {
    fn validate(&self) -> Result<()> {
        if self.s_tilde.is_empty() || self.powers.is_empty() {
            return Err(invalid("up_check", "needs at least one s_tilde and one power"));
        }
        for &s in &self.s_tilde {
            positive("up_check.s_tilde", s)?;
        }
        positive("up_check.mu_lo", self.mu_lo)?;
        positive("up_check.tail_mu", self.tail_mu)?;
        if !(self.mu_hi > self.mu_lo && self.mu_hi.is_finite()) {
            return Err(invalid("up_check.mu_hi", "must exceed mu_lo"));
        }
        if !(2..=MAX_GRID_POINTS).contains(&self.points) {
            return Err(invalid("up_check.points", format!("must lie in 2..={MAX_GRID_POINTS}")));
        }
        Ok(())
    }

    /// Log-spaced `mu` values from `mu_lo` to `mu_hi`.
    pub fn mu_grid(&self) -> Vec<f64> {
        let (a, b) = (self.mu_lo.log10(), self.mu_hi.log10());
        let n = self.points - 1;
        (0..=n)
            .map(|i| 10f64.powf(a + (b - a) * i as f64 / n as f64))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[geometry]
subarrays = 4
elements_per_subarray = 3
element_spacing = 0.5
interval = 10
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.scenario.snr_db, vec![20.0]);
        assert_eq!(cfg.scenario.theta_min_deg, 1.2);
        assert_eq!(cfg.output.dir, "out");
        assert_eq!(cfg.geometry().unwrap().n_elements(), 12);
        assert!(matches!(cfg.sweep(), Err(CliError::MissingSection("sweep"))));
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let text = format!("{MINIMAL}\n[scenario]\nsnr = 20\n");
        let e = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(e.contains("snr"), "{e}");
        assert!(e.contains("line"), "{e}");
    }

    #[test]
    fn negative_noise_power_is_rejected() {
        let text = format!("{MINIMAL}\n[scenario]\nnoise_power = -0.01\n");
        let e = ExperimentConfig::parse(&text).unwrap_err();
        assert!(matches!(e, CliError::Invalid { ref field, .. } if field == "scenario.noise_power"));
    }

    #[test]
    fn geometry_forms_are_exclusive() {
        let text = format!("{MINIMAL}positions = [0.0, 1.0]\nsizes = [1, 1]\n");
        assert!(ExperimentConfig::parse(&text).is_err());
        let explicit = "[geometry]\npositions = [0.0, 0.5, 4.0, 4.5]\nsizes = [2, 2]\n";
        let cfg = ExperimentConfig::parse(explicit).unwrap();
        assert_eq!(cfg.geometry().unwrap().n_subarrays(), 2);
        assert!(ExperimentConfig::parse("[geometry]\npositions = [0.0, 0.5]\n").is_err());
    }

    #[test]
    fn modes_and_estimators_are_checked() {
        let text = format!("{MINIMAL}\n[sweep]\nmodes = [\"sideways\"]\n");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = format!("{MINIMAL}\n[mc]\nseparations = [1.0]\nestimators = [\"esprit\"]\n");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = format!("{MINIMAL}\n[mc]\nseparations = [1.0]\n");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg.mc().unwrap().estimators().unwrap().len(), 2);
    }

    #[test]
    fn noise_levels() {
        let mut s = ScenarioConfig::default();
        assert_eq!(s.noise_levels(None), vec![("20".to_string(), 0.01)]);
        let l = s.noise_levels(Some(&[10.0, 30.0]));
        assert_eq!(l[0].0, "10");
        assert!((l[1].1 - 1e-3).abs() < 1e-15);
        s.noise_power = Some(0.1);
        assert_eq!(s.noise_levels(None)[0].0, "10");
    }

    #[test]
    fn mu_grid_spans_range() {
        let u = UpCheckConfig::default();
        let g = u.mu_grid();
        assert_eq!(g.len(), 4001);
        assert!((g[0] - 0.01).abs() < 1e-15 && (g[4000] - 100.0).abs() < 1e-9);
    }
}
