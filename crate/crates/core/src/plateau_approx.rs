//! Two-source approximation chain for the plateau phase.
//!
//! The fully calibrated information `F` is rewritten exactly in terms of
//! `Q_0, Q_1, Q_2`. The offset coupling `M G^-1 M^T` is approximated by
//! `M^ G^-1^ M^T^`, where `M^` keeps only subarray means and `Q_0^k`, and
//! `G^-1^` is a diagonal-plus-correction inverse of `G~ = diag(B) - Re{b^H b}`.
//!
//! Notation: `w0 = omega_1`, `mu = 1 + dw / w0 = omega_2 / omega_1`,
//! `s~ = |s_2 / s_1|`, `s0^k = Re{conj(s_1) s_2 Q_0^k} / |s_1 s_2|`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::crb;
use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::linalg;
use crate::qstats::{q_global, q_subarray};
use crate::signal::{self, SourceScenario};
use crate::sweep::SweepScenario;
use crate::C64;

/// Smallest accepted `|omega_1|`; `mu` divides by it.
pub const MIN_REFERENCE_FREQUENCY: f64 = 1e-9;

/// Amplitudes, frequencies and separation of a single-snapshot two-source
/// scenario.
#[derive(Debug, Clone, Copy)]
struct TwoSource {
    s1: C64,
    s2: C64,
    w0: f64,
    dw: f64,
}

impl TwoSource {
    fn from(sc: &SourceScenario) -> Result<Self> {
        if sc.n_sources() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "the approximation needs two sources, got {}",
                sc.n_sources()
            )));
        }
        if sc.snapshots() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "the approximation is written for one snapshot, got {}",
                sc.snapshots()
            )));
        }
        let s = sc.amplitude_matrix()?;
        let w = sc.frequencies();
        Ok(Self {
            s1: s[(0, 0)],
            s2: s[(1, 0)],
            w0: w[0],
            dw: w[1] - w[0],
        })
    }

    fn checked(sc: &SourceScenario) -> Result<Self> {
        let t = Self::from(sc)?;
        if t.w0.abs() < MIN_REFERENCE_FREQUENCY {
            return Err(Error::Domain(format!(
                "reference frequency {} is too close to broadside",
                t.w0
            )));
        }
        if t.s1.norm() == 0.0 || t.s2.norm() == 0.0 {
            return Err(Error::Domain("zero source amplitude".into()));
        }
        Ok(t)
    }

    fn mu(&self) -> f64 {
        1.0 + self.dw / self.w0
    }

    fn s_tilde(&self) -> f64 {
        self.s2.norm() / self.s1.norm()
    }

    fn s0(&self, q0k: C64) -> f64 {
        (self.s1.conj() * self.s2 * q0k).re / (self.s1 * self.s2).norm()
    }
}

/// `[[0, Q_0], [conj(Q_0), 0]]`.
pub fn c_q(q0: C64) -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), q0, q0.conj(), C64::new(0.0, 0.0)])
}

fn check_q0(q0: C64) -> Result<f64> {
    let d = 1.0 - q0.norm_sqr();
    if !(d > 1e-14) {
        return Err(Error::SingularModel {
            what: "two-source projector (|Q_0| = 1)",
            condition: f64::INFINITY,
        });
    }
    Ok(d)
}

/// `I - A (I - C_Q) A^H / (N (1 - |Q_0|^2))` for sources at `w0` and `w0 + dw`.
pub fn projection_complement_via_q(
    g: &ArrayGeometry,
    omega0: f64,
    delta_omega: f64,
) -> Result<DMatrix<C64>> {
    let q0 = q_global(g, delta_omega, 0)?;
    let d = check_q0(q0)?;
    let n = g.n_elements();
    let a = signal::steering_matrix(g, &[omega0, omega0 + delta_omega]);
    let core = DMatrix::<C64>::identity(2, 2) - c_q(q0);
    let scale = C64::new(1.0 / (n as f64 * d), 0.0);
    Ok(DMatrix::identity(n, n) - &a * core * a.adjoint() * scale)
}

/// The pieces of `F = Re{(F1 + F2 + F3) .* S}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FViaQ {
    pub f1: DMatrix<C64>,
    pub f2: DMatrix<C64>,
    pub f3: DMatrix<C64>,
    pub s: DMatrix<C64>,
    pub gamma0: f64,
    pub f: DMatrix<f64>,
}

/// Exact two-source `F` written through `Q_0, Q_1, Q_2`.
pub fn fim_f_via_q_parts(g: &ArrayGeometry, sc: &SourceScenario) -> Result<FViaQ> {
    let t = TwoSource::from(sc)?;
    let q0 = q_global(g, t.dw, 0)?;
    let q1 = q_global(g, t.dw, 1)?;
    let q2 = q_global(g, t.dw, 2)?;
    let d = check_q0(q0)?;
    let n = g.n_elements() as f64;
    let sum1: f64 = g.positions().iter().sum();
    let sum2: f64 = g.positions().iter().map(|p| p * p).sum();
    let gamma0 = sum1 * sum1 / (n * d);
    let one = C64::new(1.0, 0.0);
    let f1 = DMatrix::from_row_slice(2, 2, &[one, q2, q2.conj(), one]) * C64::from(sum2);
    let diag = one + q1.norm_sqr();
    let f2 = DMatrix::from_row_slice(2, 2, &[diag, q1 * 2.0, q1.conj() * 2.0, diag])
        * C64::from(-gamma0);
    let cross = q0 * q1.conj() + q0.conj() * q1;
    let f3 = DMatrix::from_row_slice(
        2,
        2,
        &[
            cross,
            q0.conj() * q1 * q1 + q0,
            q0 * q1.conj() * q1.conj() + q0.conj(),
            cross,
        ],
    ) * C64::from(gamma0);
    let (s1, s2) = (t.s1, t.s2);
    let s = DMatrix::from_row_slice(
        2,
        2,
        &[C64::from(s1.norm_sqr()), s1.conj() * s2, s2.conj() * s1, C64::from(s2.norm_sqr())],
    );
    let sum = &f1 + &f2 + &f3;
    let f = sum.component_mul(&s).map(|v| v.re);
    Ok(FViaQ {
        f1,
        f2,
        f3,
        s,
        gamma0,
        f,
    })
}

pub fn fim_f_via_q(g: &ArrayGeometry, sc: &SourceScenario) -> Result<DMatrix<f64>> {
    Ok(fim_f_via_q_parts(g, sc)?.f)
}

/// `u_p(mu) = (-2)^p mu^(p+2) / (1/s~ + s~ mu^2)^(p+1)`.
pub fn u_p(mu: f64, s_tilde: f64, p: u32) -> f64 {
    let base = 1.0 / s_tilde + s_tilde * mu * mu;
    // written as a geometric term so large p does not overflow
    mu * mu / base * (-2.0 * mu / base).powi(p as i32)
}

/// Closed-form derivative of [`u_p`] with respect to `mu`, written in
/// `y = mu s~` as `(-2)^p ((p + 2)/y - p y) / (1/y + y)^(p+2)`.
pub fn u_p_gradient(mu: f64, s_tilde: f64, p: u32) -> f64 {
    let y = mu * s_tilde;
    let pf = p as f64;
    (-2f64).powi(p as i32) * ((pf + 2.0) / y - pf * y) / (1.0 / y + y).powi(p as i32 + 2)
}

/// Gradient summary of `u_p` over `mu_grid`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub max_abs_gradient: f64,
    /// `|u_p'|` at the largest grid value.
    pub tail_gradient: f64,
}

pub fn u_p_gradient_check(s_tilde: f64, p: u32, mu_grid: &[f64]) -> Result<GradientCheck> {
    if !(s_tilde > 0.0) {
        return Err(Error::Domain(format!("s~ must be positive, got {s_tilde}")));
    }
    if mu_grid.is_empty() || mu_grid.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Domain("mu grid must be non-empty and positive".into()));
    }
    let max = mu_grid
        .iter()
        .map(|&m| u_p_gradient(m, s_tilde, p).abs())
        .fold(0.0, f64::max);
    let top = mu_grid.iter().cloned().fold(f64::MIN, f64::max);
    Ok(GradientCheck {
        max_abs_gradient: max,
        tail_gradient: u_p_gradient(top, s_tilde, p).abs(),
    })
}

/// Per-subarray quantities for `k = 2..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubarrayTerms {
    /// `|N_k| (mean phi_k - mean phi)`.
    pub gamma_m: Vec<f64>,
    /// `s0^k`.
    pub s0: Vec<f64>,
    pub sizes: Vec<usize>,
}

pub fn subarray_terms(g: &ArrayGeometry, sc: &SourceScenario) -> Result<SubarrayTerms> {
    let t = TwoSource::checked(sc)?;
    let mean = g.centroid();
    let mut out = SubarrayTerms {
        gamma_m: Vec::new(),
        s0: Vec::new(),
        sizes: Vec::new(),
    };
    for k in 1..g.n_subarrays() {
        let size = g.subarray(k).len();
        out.gamma_m.push(size as f64 * (g.subarray_centroid(k) - mean));
        out.s0.push(t.s0(q_subarray(g, t.dw, 0, k)?));
        out.sizes.push(size);
    }
    Ok(out)
}

/// `M^`, 2 x (K-1).
pub fn approx_m_hat(g: &ArrayGeometry, sc: &SourceScenario) -> Result<DMatrix<f64>> {
    let t = TwoSource::checked(sc)?;
    let terms = subarray_terms(g, sc)?;
    let (a1, a2, a12) = (t.s1.norm_sqr(), t.s2.norm_sqr(), (t.s1 * t.s2).norm());
    let mu = t.mu();
    let kk = terms.gamma_m.len();
    let mut m = DMatrix::zeros(2, kk);
    for c in 0..kk {
        let scale = terms.gamma_m[c] * t.w0;
        let s0 = terms.s0[c];
        m[(0, c)] = scale * (a1 + a12 * s0 * mu);
        m[(1, c)] = scale * (a12 * s0 + a2 * mu);
    }
    Ok(m)
}

/// `B_k = ||B~^k||^2` and `b_k = [A^H H]_{k-1} / sqrt(N)` for `k = 2..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct GTerms {
    pub b_diag: Vec<f64>,
    /// 2 x (K-1); column `k - 2` is `b_k`.
    pub b: DMatrix<C64>,
}

pub fn g_terms(g: &ArrayGeometry, sc: &SourceScenario) -> Result<GTerms> {
    let blocks = crb::fim_blocks(g, sc)?;
    let h = &blocks.h[0];
    let a = signal::steering_matrix(g, sc.frequencies());
    let b = (a.adjoint() * h) * C64::from(1.0 / (g.n_elements() as f64).sqrt());
    let b_diag = (0..h.ncols()).map(|c| h.column(c).norm_squared()).collect();
    Ok(GTerms { b_diag, b })
}

impl GTerms {
    /// `G~ = diag(B) - Re{b^H b}`.
    pub fn g_tilde(&self) -> DMatrix<f64> {
        let kk = self.b_diag.len();
        let bb = (self.b.adjoint() * &self.b).map(|v| v.re);
        DMatrix::from_fn(kk, kk, |i, j| if i == j { self.b_diag[i] } else { 0.0 }) - bb
    }

    /// `G^-1^ = diag(1/B) + Re{b_i^H b_j} / (B_i B_j)`.
    pub fn g_inverse(&self) -> DMatrix<f64> {
        let kk = self.b_diag.len();
        let bb = (self.b.adjoint() * &self.b).map(|v| v.re);
        DMatrix::from_fn(kk, kk, |i, j| {
            let d = if i == j { 1.0 / self.b_diag[i] } else { 0.0 };
            d + bb[(i, j)] / (self.b_diag[i] * self.b_diag[j])
        })
    }

    /// `B- = G~ G^-1^ - I`, entry `(i, j) = -sum_k R_ik R_kj / (B_k B_j)`
    /// with `R = Re{b^H b}`.
    pub fn residual(&self) -> DMatrix<f64> {
        let kk = self.b_diag.len();
        let r = (self.b.adjoint() * &self.b).map(|v| v.re);
        DMatrix::from_fn(kk, kk, |i, j| {
            -(0..kk)
                .map(|k| r[(i, k)] * r[(k, j)] / (self.b_diag[k] * self.b_diag[j]))
                .sum::<f64>()
        })
    }
}

/// `G^-1^`, (K-1) x (K-1).
pub fn approx_g_inverse(g: &ArrayGeometry, sc: &SourceScenario) -> Result<DMatrix<f64>> {
    let terms = g_terms(g, sc)?;
    if let Some(b) = terms.b_diag.iter().find(|&&b| !(b > 0.0)) {
        return Err(Error::Domain(format!("non-positive B_k = {b}")));
    }
    Ok(terms.g_inverse())
}

/// `M^ G^-1^ M^T`, 2 x 2.
pub fn approx_mgmt(g: &ArrayGeometry, sc: &SourceScenario) -> Result<DMatrix<f64>> {
    if g.n_subarrays() < 2 {
        return Ok(DMatrix::zeros(2, 2));
    }
    let m = approx_m_hat(g, sc)?;
    let gi = approx_g_inverse(g, sc)?;
    Ok(linalg::symmetrize(&(&m * gi * m.transpose())))
}

/// Exact `M G^-1 M^T`.
pub fn exact_mgmt(g: &ArrayGeometry, sc: &SourceScenario) -> Result<DMatrix<f64>> {
    crb::fim_matrices(g, sc)?.mgmt()
}

/// `[M^ diag(1/B) M^T]_11` through the closed form
/// `|s_1|^2 sum_k (gamma^2/|N_k|) (1 - s~ (1 - s0^2) mu^2 / (1/s~ + s~ mu^2 + 2 s0 mu))`.
pub fn g1_11_closed_form(g: &ArrayGeometry, sc: &SourceScenario) -> Result<f64> {
    let t = TwoSource::checked(sc)?;
    let terms = subarray_terms(g, sc)?;
    let (st, mu) = (t.s_tilde(), t.mu());
    Ok(t.s1.norm_sqr()
        * terms
            .gamma_m
            .iter()
            .zip(&terms.s0)
            .zip(&terms.sizes)
            .map(|((gm, s0), &n)| {
                let den = 1.0 / st + st * mu * mu + 2.0 * s0 * mu;
                gm * gm / n as f64 * (1.0 - st * (1.0 - s0 * s0) * mu * mu / den)
            })
            .sum::<f64>())
}

/// `v_0..v_5` of the truncated expansion, with `u_p` frozen at `mu_bar`.
pub fn v_coefficients(s1_abs2: f64, s_tilde: f64, mu_bar: f64) -> [f64; 6] {
    let u: Vec<f64> = (0..4).map(|p| u_p(mu_bar, s_tilde, p)).collect();
    let st = s_tilde;
    [
        s1_abs2 * (1.0 - st * u[0]),
        s1_abs2 * (-st * u[1]),
        s1_abs2 * (-st * u[2] + st * u[0]),
        s1_abs2 * (-st * u[3] + st * u[1]),
        s1_abs2 * (st * u[2]),
        s1_abs2 * (st * u[3]),
    ]
}

/// `[G1]_11` from the series in `s0^k`: `terms` powers of `s0` kept and
/// `u_p` evaluated at `mu_bar` (or at the scenario's own `mu` when `None`).
pub fn g1_11_series(
    g: &ArrayGeometry,
    sc: &SourceScenario,
    terms: u32,
    mu_bar: Option<f64>,
) -> Result<f64> {
    let t = TwoSource::checked(sc)?;
    let sub = subarray_terms(g, sc)?;
    let st = t.s_tilde();
    let mu = mu_bar.unwrap_or_else(|| t.mu());
    Ok(t.s1.norm_sqr()
        * sub
            .gamma_m
            .iter()
            .zip(&sub.s0)
            .zip(&sub.sizes)
            .map(|((gm, &s0), &n)| {
                let series: f64 = (0..terms).map(|p| u_p(mu, st, p) * s0.powi(p as i32)).sum();
                gm * gm / n as f64 * (1.0 - st * (1.0 - s0 * s0) * series)
            })
            .sum::<f64>())
}

/// `mu_bar = 1 + Omega / w0`.
pub fn mu_bar(g: &ArrayGeometry, omega0: f64) -> Result<f64> {
    if omega0.abs() < MIN_REFERENCE_FREQUENCY {
        return Err(Error::Domain(format!(
            "reference frequency {omega0} is too close to broadside"
        )));
    }
    Ok(1.0 + g.rayleigh_limit() / omega0)
}

/// `[G1]_11` from the printed six-term polynomial `sum_p v_p (s0^k)^p`.
pub fn g1_11_truncated(g: &ArrayGeometry, sc: &SourceScenario) -> Result<f64> {
    let t = TwoSource::checked(sc)?;
    let sub = subarray_terms(g, sc)?;
    let v = v_coefficients(t.s1.norm_sqr(), t.s_tilde(), mu_bar(g, t.w0)?);
    Ok(sub
        .gamma_m
        .iter()
        .zip(&sub.s0)
        .zip(&sub.sizes)
        .map(|((gm, &s0), &n)| {
            let poly: f64 = v.iter().enumerate().map(|(p, c)| c * s0.powi(p as i32)).sum();
            gm * gm / n as f64 * poly
        })
        .sum())
}

/// Exact and approximate `[M G^-1 M^T]_11` along a separation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxComparison {
    /// `dw / Omega`.
    pub normalized: Vec<f64>,
    pub delta_omega: Vec<f64>,
    pub exact: Vec<f64>,
    pub approx: Vec<f64>,
    /// `|approx - exact| / |exact|`.
    pub rel_error: Vec<f64>,
}

impl ApproxComparison {
    /// Median relative error over points with `lo <= dw/Omega <= hi`.
    pub fn median_error(&self, lo: f64, hi: f64) -> Option<f64> {
        let mut v: Vec<f64> = self
            .normalized
            .iter()
            .zip(&self.rel_error)
            .filter(|(x, e)| **x >= lo && **x <= hi && e.is_finite())
            .map(|(_, e)| *e)
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        })
    }
}

/// Compares `[M^ G^-1^ M^T]_11` with the exact `[M G^-1 M^T]_11` for two
/// sources on a normalized grid `dw / Omega`.
pub fn compare_mgmt(
    g: &ArrayGeometry,
    base: &SweepScenario,
    normalized: &[f64],
) -> Result<ApproxComparison> {
    if base.n_sources != 2 {
        return Err(Error::DimensionMismatch(format!(
            "comparison needs two sources, got {}",
            base.n_sources
        )));
    }
    let omega = g.rayleigh_limit();
    let rows: Vec<(f64, f64, f64)> = normalized
        .par_iter()
        .map(|&x| {
            let dw = x * omega;
            let sc = base.at_separation(g, dw)?;
            let exact = exact_mgmt(g, &sc)?[(0, 0)];
            let approx = approx_mgmt(g, &sc)?[(0, 0)];
            Ok((dw, exact, approx))
        })
        .collect::<Result<_>>()?;
    Ok(ApproxComparison {
        normalized: normalized.to_vec(),
        delta_omega: rows.iter().map(|r| r.0).collect(),
        exact: rows.iter().map(|r| r.1).collect(),
        approx: rows.iter().map(|r| r.2).collect(),
        rel_error: rows
            .iter()
            .map(|r| {
                if r.1 == 0.0 && r.2 == 0.0 {
                    0.0
                } else {
                    (r.2 - r.1).abs() / r.1.abs()
                }
            })
            .collect(),
    })
}
