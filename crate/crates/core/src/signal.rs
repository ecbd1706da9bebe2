//! Source scenarios, steering vectors and synthetic snapshots.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::C64;

/// Converts a direction (radians from broadside) to spatial angular frequency
/// `2 pi sin(theta) / lambda` in rad/m.
pub fn angle_to_frequency(theta: f64, wavelength: f64) -> Result<f64> {
    check_angle(theta)?;
    Ok(2.0 * PI * theta.sin() / wavelength)
}

/// Inverse of [`angle_to_frequency`].
pub fn frequency_to_angle(omega: f64, wavelength: f64) -> Result<f64> {
    let s = omega * wavelength / (2.0 * PI);
    if !(s.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "spatial frequency {omega} rad/m is outside the visible region"
        )));
    }
    Ok(s.asin())
}

/// Frequency separation `omega(theta2) - omega(theta1)` written in product
/// form, `(4 pi / lambda) sin(dtheta / 2) cos((theta1 + theta2) / 2)`.
pub fn frequency_separation(theta1: f64, theta2: f64, wavelength: f64) -> Result<f64> {
    check_angle(theta1)?;
    check_angle(theta2)?;
    Ok(4.0 * PI / wavelength
        * ((theta2 - theta1) / 2.0).sin()
        * ((theta1 + theta2) / 2.0).cos())
}

fn check_angle(theta: f64) -> Result<()> {
    if theta.is_finite() && theta.abs() < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::AngleOutOfRange { theta })
    }
}

/// `[exp(j omega phi_n)]_n`.
pub fn steering_vector(g: &ArrayGeometry, omega: f64) -> DVector<C64> {
    DVector::from_iterator(
        g.n_elements(),
        g.positions().iter().map(|&p| C64::from_polar(1.0, omega * p)),
    )
}

/// Derivative of [`steering_vector`] with respect to `omega`:
/// `[j phi_n exp(j omega phi_n)]_n`.
pub fn steering_derivative(g: &ArrayGeometry, omega: f64) -> DVector<C64> {
    DVector::from_iterator(
        g.n_elements(),
        g.positions()
            .iter()
            .map(|&p| C64::new(0.0, p) * C64::from_polar(1.0, omega * p)),
    )
}

/// N x L matrix of steering vectors.
pub fn steering_matrix(g: &ArrayGeometry, omegas: &[f64]) -> DMatrix<C64> {
    DMatrix::from_fn(g.n_elements(), omegas.len(), |n, l| {
        C64::from_polar(1.0, omegas[l] * g.positions()[n])
    })
}

/// How source amplitudes are chosen for each snapshot.
#[derive(Debug, Clone, PartialEq)]
pub enum Amplitudes {
    /// The same complex amplitude per source in every snapshot.
    Fixed(Vec<C64>),
    /// An explicit L x T matrix.
    PerSnapshot(DMatrix<C64>),
    /// Independent standard circular complex Gaussian draws per snapshot.
    Gaussian,
}

/// How L sources are laid out for a requested total separation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Equally spaced in angle between theta_min and theta_max.
    UniformAngle,
    /// Equally spaced in spatial frequency.
    UniformFrequency,
}

/// Frequencies of `n_sources` sources whose first source sits at `theta_min`
/// and whose total spread is `delta_omega` rad/m.
pub fn place_sources(
    theta_min: f64,
    delta_omega: f64,
    n_sources: usize,
    wavelength: f64,
    placement: Placement,
) -> Result<Vec<f64>> {
    if n_sources == 0 {
        return Err(Error::InvalidScenario("need at least one source".into()));
    }
    let omega1 = angle_to_frequency(theta_min, wavelength)?;
    if n_sources == 1 {
        return Ok(vec![omega1]);
    }
    let step = (n_sources - 1) as f64;
    match placement {
        Placement::UniformFrequency => Ok((0..n_sources)
            .map(|l| omega1 + delta_omega * l as f64 / step)
            .collect()),
        Placement::UniformAngle => {
            let theta_max = frequency_to_angle(omega1 + delta_omega, wavelength)?;
            let mut omegas = (0..n_sources)
                .map(|l| {
                    let theta = theta_min + (theta_max - theta_min) * l as f64 / step;
                    2.0 * PI * theta.sin() / wavelength
                })
                .collect::<Vec<_>>();
            // pin the end point exactly so the sweep axis is what was asked for
            omegas[n_sources - 1] = omega1 + delta_omega;
            Ok(omegas)
        }
    }
}

/// Angles `theta_min + (l - 1)(theta_max - theta_min)/(L - 1)` converted to
/// spatial frequencies.
pub fn uniform_angle_frequencies(
    theta_min: f64,
    theta_max: f64,
    n_sources: usize,
    wavelength: f64,
) -> Result<Vec<f64>> {
    if n_sources == 0 {
        return Err(Error::InvalidScenario("need at least one source".into()));
    }
    if n_sources == 1 {
        return Ok(vec![angle_to_frequency(theta_min, wavelength)?]);
    }
    let step = (n_sources - 1) as f64;
    (0..n_sources)
        .map(|l| angle_to_frequency(theta_min + (theta_max - theta_min) * l as f64 / step, wavelength))
        .collect()
}

/// Far-field narrow-band sources observed over `snapshots` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceScenario {
    frequencies: Vec<f64>,
    amplitudes: Amplitudes,
    noise_power: f64,
    snapshots: usize,
}

impl SourceScenario {
    pub fn new(
        frequencies: Vec<f64>,
        amplitudes: Amplitudes,
        noise_power: f64,
        snapshots: usize,
    ) -> Result<Self> {
        let sc = Self {
            frequencies,
            amplitudes,
            noise_power,
            snapshots,
        };
        sc.validate()?;
        Ok(sc)
    }

    /// Every source gets amplitude `amplitude` in every snapshot.
    pub fn with_common_amplitude(
        frequencies: Vec<f64>,
        amplitude: C64,
        noise_power: f64,
        snapshots: usize,
    ) -> Result<Self> {
        let l = frequencies.len();
        Self::new(frequencies, Amplitudes::Fixed(vec![amplitude; l]), noise_power, snapshots)
    }

    fn validate(&self) -> Result<()> {
        let l = self.frequencies.len();
        if l == 0 {
            return Err(Error::InvalidScenario("need at least one source".into()));
        }
        if self.frequencies.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidScenario("non-finite source frequency".into()));
        }
        if self.frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidScenario(
                "source frequencies must be strictly increasing".into(),
            ));
        }
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "noise power must be non-negative, got {}",
                self.noise_power
            )));
        }
        if self.snapshots == 0 {
            return Err(Error::InvalidScenario("need at least one snapshot".into()));
        }
        match &self.amplitudes {
            Amplitudes::Fixed(s) if s.len() != l => Err(Error::DimensionMismatch(format!(
                "{} amplitudes for {l} sources",
                s.len()
            ))),
            Amplitudes::PerSnapshot(s) if s.nrows() != l || s.ncols() != self.snapshots => {
                Err(Error::DimensionMismatch(format!(
                    "amplitude matrix is {}x{}, expected {l}x{}",
                    s.nrows(),
                    s.ncols(),
                    self.snapshots
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn n_sources(&self) -> usize {
        self.frequencies.len()
    }

    /// Delta omega = omega_L - omega_1.
    pub fn separation(&self) -> f64 {
        self.frequencies[self.frequencies.len() - 1] - self.frequencies[0]
    }

    pub fn amplitudes(&self) -> &Amplitudes {
        &self.amplitudes
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn with_noise_power(&self, noise_power: f64) -> Result<Self> {
        Self::new(self.frequencies.clone(), self.amplitudes.clone(), noise_power, self.snapshots)
    }

    /// Same amplitudes and noise with new frequencies. Fixed amplitudes are
    /// kept only if the source count is unchanged.
    pub fn with_frequencies(&self, frequencies: Vec<f64>) -> Result<Self> {
        Self::new(frequencies, self.amplitudes.clone(), self.noise_power, self.snapshots)
    }

    /// The L x T amplitude matrix used by the deterministic bounds.
    pub fn amplitude_matrix(&self) -> Result<DMatrix<C64>> {
        match &self.amplitudes {
            Amplitudes::Fixed(s) => Ok(DMatrix::from_fn(s.len(), self.snapshots, |l, _| s[l])),
            Amplitudes::PerSnapshot(s) => Ok(s.clone()),
            Amplitudes::Gaussian => Err(Error::InvalidScenario(
                "random amplitudes must be realized before evaluating a conditional bound".into(),
            )),
        }
    }

    /// Replaces random amplitudes by a concrete draw; deterministic
    /// amplitudes are returned unchanged.
    pub fn realize(&self, rng: &mut impl Rng) -> Result<Self> {
        match self.amplitudes {
            Amplitudes::Gaussian => {
                let s = DMatrix::from_fn(self.n_sources(), self.snapshots, |_, _| {
                    complex_gaussian(rng, 1.0)
                });
                Self::new(
                    self.frequencies.clone(),
                    Amplitudes::PerSnapshot(s),
                    self.noise_power,
                    self.snapshots,
                )
            }
            _ => Ok(self.clone()),
        }
    }

    /// Checks `L < min_k |N_k|`.
    pub fn check_identifiable(&self, g: &ArrayGeometry) -> Result<()> {
        let min = g.min_subarray_size();
        if self.n_sources() >= min {
            return Err(Error::InvalidScenario(format!(
                "{} sources are not identifiable with a {min}-element subarray",
                self.n_sources()
            )));
        }
        Ok(())
    }
}

/// Noise power for an SNR of `snr_db`, with SNR = 1 / sigma^2.
pub fn noise_power_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Circular complex Gaussian sample with total variance `variance`.
pub fn complex_gaussian(rng: &mut impl Rng, variance: f64) -> C64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * scale, im * scale)
}

/// Derives an independent sub-seed for stream `index` of a master seed
/// (SplitMix64 finalizer over `master + (index + 1) * golden`).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// N x T block of array measurements together with the seed that made it.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub data: DMatrix<C64>,
    /// Amplitudes actually used, L x T.
    pub amplitudes: DMatrix<C64>,
    pub seed: u64,
}

impl SnapshotSet {
    pub fn n_elements(&self) -> usize {
        self.data.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.data.ncols()
    }
}

/// Draws `y(t) = A s(t) + n(t)` for every snapshot. A zero noise power gives
/// noiseless data.
pub fn synthesize_snapshots(
    g: &ArrayGeometry,
    sc: &SourceScenario,
    seed: u64,
) -> Result<SnapshotSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let realized = sc.realize(&mut rng)?;
    let s = realized.amplitude_matrix()?;
    let a = steering_matrix(g, sc.frequencies());
    let mut data = &a * &s;
    let sigma2 = sc.noise_power();
    if sigma2 > 0.0 {
        for v in data.iter_mut() {
            *v += complex_gaussian(&mut rng, sigma2);
        }
    }
    Ok(SnapshotSet {
        data,
        amplitudes: s,
        seed,
    })
}
