//! Position-weighted exponential sums
//!
//! ```text
//! Q_i(dw)   = sum_n phi_n^i exp(j dw phi_n) / sum_n phi_n^i
//! Q_i^k(dw) = the same sums restricted to subarray k
//! ```
//!
//! together with their expectation under uniformly drawn positions and the
//! Hoeffding-type concentration bound on `|Q_0|`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::signal::derive_seed;
use crate::C64;

fn weighted_sum(positions: &[f64], delta_omega: f64, i: u32) -> Result<C64> {
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    for &p in positions {
        let w = p.powi(i as i32);
        num += C64::from_polar(w, delta_omega * p);
        den += w;
    }
    if den == 0.0 {
        return Err(Error::Domain(format!(
            "sum of phi^{i} vanishes, Q_{i} is undefined"
        )));
    }
    Ok(num / den)
}

/// `Q_i(dw)` over the whole array.
pub fn q_global(g: &ArrayGeometry, delta_omega: f64, i: u32) -> Result<C64> {
    weighted_sum(g.positions(), delta_omega, i)
}

/// `Q_i^k(dw)` over subarray `k` (zero-based).
pub fn q_subarray(g: &ArrayGeometry, delta_omega: f64, i: u32, k: usize) -> Result<C64> {
    if k >= g.n_subarrays() {
        return Err(Error::InvalidGeometry(format!(
            "subarray index {k} out of range for {} subarrays",
            g.n_subarrays()
        )));
    }
    weighted_sum(&g.positions()[g.subarray(k)], delta_omega, i)
}

/// `|sin(x)/x|` with the limit 1 at 0.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `|E Q_0| = |sinc(dw D / 2)|` for positions drawn uniformly on `[0, D]`.
pub fn expected_q0_magnitude(delta_omega: f64, aperture: f64) -> f64 {
    sinc(delta_omega * aperture / 2.0).abs()
}

/// Threshold and probability of the concentration bound
/// `P(|Q_0| >= threshold) <= 4 exp(-N t^2 / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoeffdingBound {
    pub threshold: f64,
    pub probability: f64,
}

/// Concentration bound on `|Q_0|` for `n` positions i.i.d. uniform on
/// `[0, D]`. Only valid for `dw >= 2 pi / D`.
pub fn hoeffding_bound_q0(
    t: f64,
    delta_omega: f64,
    aperture: f64,
    n: usize,
) -> Result<HoeffdingBound> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    if !(aperture > 0.0) || n == 0 {
        return Err(Error::Domain("aperture and element count must be positive".into()));
    }
    let x = delta_omega * aperture;
    // small relative slack so dw = 2 pi / D itself stays in scope
    if x < 2.0 * std::f64::consts::PI * (1.0 - 1e-12) {
        return Err(Error::OutOfScope(format!(
            "dw D = {x:.6} is below 2 pi"
        )));
    }
    let sinc_term = x.sin() / x;
    let t1 = (t + sinc_term).abs().max((-t + sinc_term).abs());
    let t2 = (t + (1.0 - x.cos()) / x).abs();
    Ok(HoeffdingBound {
        threshold: (t1 * t1 + t2 * t2).sqrt(),
        probability: 4.0 * (-(n as f64) * t * t / 2.0).exp(),
    })
}

/// `|dQ_0/d(dw)| = (sum phi / N) |Q_1|`.
pub fn q0_derivative_bound(g: &ArrayGeometry, delta_omega: f64) -> Result<f64> {
    let mean = g.positions().iter().sum::<f64>() / g.n_elements() as f64;
    Ok(mean * q_global(g, delta_omega, 1)?.norm())
}

/// `Q_0, Q_1, Q_2` and optionally every `Q_0^k` over a grid of separations.
#[derive(Debug, Clone, PartialEq)]
pub struct QTrace {
    pub delta_omega: Vec<f64>,
    /// `dw / Omega`.
    pub normalized: Vec<f64>,
    pub q: [Vec<C64>; 3],
    /// `q_sub[k][j]` is `Q_0^k` at grid point `j`; empty unless requested.
    pub q_sub: Vec<Vec<C64>>,
    pub expected_abs_q0: Vec<f64>,
}

pub fn q_trace(g: &ArrayGeometry, grid: &[f64], per_subarray: bool) -> Result<QTrace> {
    let omega = g.rayleigh_limit();
    let d = g.aperture();
    let mut q = [Vec::new(), Vec::new(), Vec::new()];
    for (i, qi) in q.iter_mut().enumerate() {
        *qi = grid
            .iter()
            .map(|&w| q_global(g, w, i as u32))
            .collect::<Result<_>>()?;
    }
    let q_sub = if per_subarray {
        (0..g.n_subarrays())
            .map(|k| grid.iter().map(|&w| q_subarray(g, w, 0, k)).collect())
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    Ok(QTrace {
        delta_omega: grid.to_vec(),
        normalized: grid.iter().map(|w| w / omega).collect(),
        q,
        q_sub,
        expected_abs_q0: grid.iter().map(|&w| expected_q0_magnitude(w, d)).collect(),
    })
}

fn draw_q0(rng: &mut impl Rng, delta_omega: f64, aperture: f64, n: usize) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for _ in 0..n {
        let p: f64 = rng.random_range(0.0..aperture);
        acc += C64::from_polar(1.0, delta_omega * p);
    }
    acc / n as f64
}

/// `Q_0` for `draws` independent geometries with `n` positions uniform on
/// `[0, D]`. Draw `i` uses sub-seed `derive_seed(seed, i)`.
pub fn sample_q0(
    delta_omega: f64,
    aperture: f64,
    n: usize,
    draws: usize,
    seed: u64,
) -> Vec<C64> {
    (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            draw_q0(&mut rng, delta_omega, aperture, n)
        })
        .collect()
}

/// `|mean Q_0|` across random uniform geometries.
pub fn empirical_mean_q0(delta_omega: f64, aperture: f64, n: usize, draws: usize, seed: u64) -> f64 {
    let samples = sample_q0(delta_omega, aperture, n, draws, seed);
    let sum: C64 = samples.iter().sum();
    (sum / draws as f64).norm()
}

/// Fraction of random uniform geometries with `|Q_0| >= threshold`.
pub fn empirical_exceedance(
    threshold: f64,
    delta_omega: f64,
    aperture: f64,
    n: usize,
    draws: usize,
    seed: u64,
) -> f64 {
    let samples = sample_q0(delta_omega, aperture, n, draws, seed);
    samples.iter().filter(|q| q.norm() >= threshold).count() as f64 / draws as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn lattice() -> ArrayGeometry {
        ArrayGeometry::uniform_distributed(10, 10, 0.5, 50.0, 1.0).unwrap()
    }

    #[test]
    fn q_at_zero_is_one() {
        let g = lattice();
        for i in 0..3 {
            assert!((q_global(&g, 0.0, i).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-14);
            assert!((q_subarray(&g, 0.0, i, 3).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn q_bounded_by_one() {
        let g = lattice();
        for j in 0..200 {
            let w = j as f64 * 0.0123;
            for i in 0..3 {
                assert!(q_global(&g, w, i).unwrap().norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn two_element_q0() {
        let d = 3.0;
        let g = ArrayGeometry::from_positions(vec![0.0, d], &[2], 1.0).unwrap();
        let w = 0.37;
        let q = q_global(&g, w, 0).unwrap();
        let expect = (C64::new(1.0, 0.0) + C64::from_polar(1.0, w * d)) / 2.0;
        assert!((q - expect).norm() < 1e-15);
        assert!((q.norm() - (w * d / 2.0).cos().abs()).abs() < 1e-15);
    }

    #[test]
    fn single_element_subarray_is_unit_modulus() {
        let g = ArrayGeometry::from_positions(vec![0.0, 1.0, 2.5], &[2, 1], 1.0).unwrap();
        let q = q_subarray(&g, 0.8, 0, 1).unwrap();
        assert!((q - C64::from_polar(1.0, 0.8 * 2.5)).norm() < 1e-15);
        assert!(q_subarray(&g, 0.8, 0, 2).is_err());
    }

    #[test]
    fn q0_is_size_weighted_mean_of_subarrays() {
        let g = ArrayGeometry::from_positions(vec![0.0, 0.5, 3.0, 3.5, 4.0, 9.0], &[2, 3, 1], 1.0)
            .unwrap();
        let w = 0.61;
        let mut acc = C64::new(0.0, 0.0);
        for (k, r) in g.subarrays().iter().enumerate() {
            acc += q_subarray(&g, w, 0, k).unwrap() * r.len() as f64;
        }
        assert!((acc / 6.0 - q_global(&g, w, 0).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn degenerate_denominator() {
        let g = ArrayGeometry::from_positions(vec![0.0], &[1], 1.0).unwrap();
        assert!(q_global(&g, 0.3, 1).is_err());
        assert!(q_global(&g, 0.3, 0).is_ok());
    }

    #[test]
    fn expectation_examples() {
        assert!(expected_q0_magnitude(2.0 * PI / 5.0, 5.0) < 1e-15);
        assert_eq!(expected_q0_magnitude(0.0, 5.0), 1.0);
    }

    #[test]
    fn hoeffding_pin() {
        let d = 454.5;
        let b = hoeffding_bound_q0(0.25, 2.0 * PI / d, d, 200).unwrap();
        assert!((b.threshold - 0.353_553).abs() < 1e-5, "{}", b.threshold);
        assert!((b.probability - 0.007_720).abs() < 1e-5, "{}", b.probability);
        assert!(matches!(
            hoeffding_bound_q0(0.25, 1.0 / d, d, 200),
            Err(Error::OutOfScope(_))
        ));
        assert!(hoeffding_bound_q0(0.0, 1.0, d, 200).is_err());
        let mut last = f64::INFINITY;
        for n in [10, 50, 100, 200, 400] {
            let p = hoeffding_bound_q0(0.25, 0.1, d, n).unwrap().probability;
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let g = lattice();
        let h = 1e-7;
        for &w in &[0.003, 0.02, 0.1] {
            let fd = (q_global(&g, w + h, 0).unwrap() - q_global(&g, w - h, 0).unwrap()) / (2.0 * h);
            let exact = q0_derivative_bound(&g, w).unwrap();
            assert!((fd.norm() - exact).abs() < 1e-6 * exact, "{w}");
        }
        let mean = g.positions().iter().sum::<f64>() / 100.0;
        assert!((q0_derivative_bound(&g, 0.0).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn derivative_scales_with_positions() {
        let g = lattice();
        let c = 3.0;
        let s = g.scaled(c).unwrap();
        let a = q0_derivative_bound(&g, 0.02).unwrap();
        let b = q0_derivative_bound(&s, 0.02 / c).unwrap();
        assert!((b - c * a).abs() < 1e-10 * b);
    }

    #[test]
    fn sampling_is_deterministic() {
        assert_eq!(sample_q0(0.1, 10.0, 20, 50, 9), sample_q0(0.1, 10.0, 20, 50, 9));
    }

    #[test]
    fn trace_shapes() {
        let g = lattice();
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 * 0.003).collect();
        let t = q_trace(&g, &grid, true).unwrap();
        assert_eq!(t.q[2].len(), 10);
        assert_eq!(t.q_sub.len(), 10);
        assert!((t.normalized[0] * g.rayleigh_limit() - 0.003).abs() < 1e-15);
    }
}
