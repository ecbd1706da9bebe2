//! Fixtures and independent oracles used to check `dfcrb` against quantities
//! it does not compute itself.

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

/// Noiseless snapshot means with frequencies `w`, subarray offsets `xi`
/// added to subarrays 2..K, and amplitudes `s` (L x T).
fn mean(g: &ArrayGeometry, w: &[f64], xi: &[f64], s: &DMatrix<C64>) -> Vec<C64> {
    let mut out = Vec::with_capacity(g.n_elements() * s.ncols());
    for t in 0..s.ncols() {
        for (k, r) in g.subarrays().iter().enumerate() {
            let shift = if k == 0 { 0.0 } else { xi[k - 1] };
            for n in r.clone() {
                let p = g.positions()[n] + shift;
                let v = w
                    .iter()
                    .enumerate()
                    .fold(C64::new(0.0, 0.0), |acc, (l, &wl)| {
                        acc + s[(l, t)] * C64::from_polar(1.0, wl * p)
                    });
                out.push(v);
            }
        }
    }
    out
}

/// Fisher information of the noiseless mean by central differences over
/// `[w, xi, Re s, Im s]`, with the amplitude block concentrated out by a
/// Schur complement. Returns the `(L + K - 1)` square block over `[w, xi]`,
/// scaled by `sigma^2 / 2`.
pub fn finite_difference_fim(g: &ArrayGeometry, w: &[f64], s: &DMatrix<C64>) -> DMatrix<f64> {
    let l = w.len();
    let kk = g.n_subarrays() - 1;
    let na = 2 * s.len();
    let p = l + kk + na;
    let theta0: Vec<f64> = w
        .iter()
        .copied()
        .chain(std::iter::repeat_n(0.0, kk))
        .chain(s.iter().map(|v| v.re))
        .chain(s.iter().map(|v| v.im))
        .collect();
    let unpack = |th: &[f64]| {
        let sm = DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| {
            let idx = i + j * s.nrows();
            C64::new(th[l + kk + idx], th[l + kk + s.len() + idx])
        });
        mean(g, &th[..l], &th[l..l + kk], &sm)
    };
    let jac: Vec<Vec<C64>> = (0..p)
        .map(|i| {
            let h = 1e-6 * theta0[i].abs().max(1.0);
            let mut up = theta0.clone();
            let mut dn = theta0.clone();
            up[i] += h;
            dn[i] -= h;
            unpack(&up)
                .iter()
                .zip(unpack(&dn))
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect()
        })
        .collect();
    let j = DMatrix::from_fn(p, p, |a, b| {
        jac[a]
            .iter()
            .zip(&jac[b])
            .map(|(x, y)| (x.conj() * y).re)
            .sum::<f64>()
    });
    let q = l + kk;
    let jpp = j.view((0, 0), (q, q)).into_owned();
    let jpa = j.view((0, q), (q, na)).into_owned();
    let jaa = j.view((q, q), (na, na)).into_owned();
    let inv = jaa.try_inverse().expect("amplitude block is invertible");
    jpp - &jpa * inv * jpa.transpose()
}

/// `||a - b||_F / ||b||_F`.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
