//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use dfcrb::signal::{Amplitudes, SourceScenario};
use dfcrb::{ArrayGeometry, C64};
use nalgebra::DMatrix;
use rand::Rng;

/// Ten ten-element half-wavelength subarrays, interval 50 wavelengths.
pub fn reference_geometry() -> ArrayGeometry {
    ArrayGeometry::uniform_distributed(10, 10, 0.5, 50.0, 1.0).unwrap()
}

pub const THETA_MIN_DEG: f64 = 1.2;

pub fn theta_min() -> f64 {
    THETA_MIN_DEG.to_radians()
}

/// A small random geometry: 2 to 4 subarrays with 3 to 5 elements each,
/// irregular intra-subarray spacing and random gaps.
pub fn random_small_geometry(rng: &mut impl Rng, max_elements: usize) -> ArrayGeometry {
    loop {
        let k = rng.random_range(2..=4);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(3..=5)).collect();
        if sizes.iter().sum::<usize>() > max_elements {
            continue;
        }
        let mut pos = Vec::new();
        let mut x = 0.0;
        for (i, &m) in sizes.iter().enumerate() {
            if i > 0 {
                x += rng.random_range(2.0..8.0);
            }
            for j in 0..m {
                if j > 0 {
                    x += rng.random_range(0.3..0.7);
                }
                pos.push(x);
            }
        }
        return ArrayGeometry::from_positions(pos, &sizes, 1.0).unwrap();
    }
}

/// `L < min |N_k|` sources with random, well separated frequencies and
/// random per-snapshot amplitudes.
pub fn random_scenario(rng: &mut impl Rng, g: &ArrayGeometry) -> SourceScenario {
    let max_l = (g.min_subarray_size() - 1).min(3);
    let l = rng.random_range(1..=max_l);
    let t = rng.random_range(1..=3);
    let omega = g.rayleigh_limit();
    let mut w = Vec::with_capacity(l);
    let mut x = rng.random_range(-2.0..1.0);
    for _ in 0..l {
        w.push(x);
        x += omega * rng.random_range(0.3..3.0);
    }
    let s = DMatrix::from_fn(l, t, |_, _| {
        C64::from_polar(rng.random_range(0.5..1.5), rng.random_range(0.0..std::f64::consts::TAU))
    });
    SourceScenario::new(w, Amplitudes::PerSnapshot(s), rng.random_range(0.01..1.0), t).unwrap()
}

/// `||a - b||_F / ||b||_F`.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
