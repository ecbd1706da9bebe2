//! Fisher information blocks and Cramér-Rao bounds under the conditional
//! (deterministic amplitude) model.
//!
//! For `T` snapshots with steering matrix `A`, the blocks are
//!
//! ```text
//! F = sum_i Re{D_i^H P D_i},  M = sum_i Re{D_i^H P H_i},  G = sum_i Re{H_i^H P H_i}
//! ```
//!
//! with `P` the projector onto the orthogonal complement of `range(A)`,
//! `D_i = [s_1(t_i) da(w_1), ..., s_L(t_i) da(w_L)]` and `H_i` the derivative
//! of the noiseless snapshot with respect to the offsets of subarrays `2..K`.
//! Then `CRB_FC = sigma^2/2 F^-1` and `CRB_PC = sigma^2/2 (F - M G^-1 M^T)^-1`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::linalg;
use crate::signal::{self, SourceScenario};
use crate::{CalibrationMode, C64};

/// `I - A (A^H A)^-1 A^H`, built from a thin QR of `A`.
pub fn projection_complement(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let q = linalg::orthonormal_basis(a, "steering matrix")?;
    let n = a.nrows();
    Ok(DMatrix::identity(n, n) - &q * q.adjoint())
}

/// Real Fisher information blocks without the per-snapshot intermediates.
#[derive(Debug, Clone, PartialEq)]
pub struct FimMatrices {
    /// L x L.
    pub f: DMatrix<f64>,
    /// L x (K-1).
    pub m: DMatrix<f64>,
    /// (K-1) x (K-1).
    pub g: DMatrix<f64>,
}

impl FimMatrices {
    /// `F - M G^-1 M^T`, or `F` itself when there are no offsets.
    pub fn schur_complement(&self) -> Result<DMatrix<f64>> {
        if self.g.nrows() == 0 {
            return Ok(self.f.clone());
        }
        let g_inv = linalg::spd_inverse(&self.g, "offset information G")?;
        Ok(linalg::symmetrize(&(&self.f - &self.m * g_inv * self.m.transpose())))
    }

    /// `M G^-1 M^T` (L x L); zero when there are no offsets.
    pub fn mgmt(&self) -> Result<DMatrix<f64>> {
        let l = self.f.nrows();
        if self.g.nrows() == 0 {
            return Ok(DMatrix::zeros(l, l));
        }
        let g_inv = linalg::spd_inverse(&self.g, "offset information G")?;
        Ok(linalg::symmetrize(&(&self.m * g_inv * self.m.transpose())))
    }
}

/// [`FimMatrices`] together with the projector and the per-snapshot
/// derivative matrices they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct FimBlocks {
    pub f: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub g: DMatrix<f64>,
    /// N x N complement projector.
    pub projector: DMatrix<C64>,
    /// One N x L matrix per snapshot.
    pub d: Vec<DMatrix<C64>>,
    /// One N x (K-1) matrix per snapshot; rows of subarray 1 are zero.
    pub h: Vec<DMatrix<C64>>,
}

impl FimBlocks {
    pub fn matrices(&self) -> FimMatrices {
        FimMatrices {
            f: self.f.clone(),
            m: self.m.clone(),
            g: self.g.clone(),
        }
    }
}

/// `D_i` for snapshot amplitudes `s` (length L).
fn d_matrix(g: &ArrayGeometry, omegas: &[f64], s: &[C64]) -> DMatrix<C64> {
    let n = g.n_elements();
    let mut d = DMatrix::zeros(n, omegas.len());
    for (l, &w) in omegas.iter().enumerate() {
        let da = signal::steering_derivative(g, w);
        d.set_column(l, &(da * s[l]));
    }
    d
}

/// `H_i`: column `k - 1` holds `j sum_l s_l w_l a(w_l)` on the rows of
/// subarray `k` (k = 1..K-1, zero-based) and zeros elsewhere.
fn h_matrix(g: &ArrayGeometry, omegas: &[f64], s: &[C64]) -> DMatrix<C64> {
    let n = g.n_elements();
    let k = g.n_subarrays();
    let mut h = DMatrix::zeros(n, k.saturating_sub(1));
    let pos = g.positions();
    for sub in 1..k {
        for row in g.subarray(sub) {
            let mut acc = C64::new(0.0, 0.0);
            for (l, &w) in omegas.iter().enumerate() {
                acc += s[l] * w * C64::from_polar(1.0, w * pos[row]);
            }
            h[(row, sub - 1)] = C64::new(0.0, 1.0) * acc;
        }
    }
    h
}

struct Projected {
    q: DMatrix<C64>,
    d: Vec<DMatrix<C64>>,
    h: Vec<DMatrix<C64>>,
    matrices: FimMatrices,
}

fn compute(g: &ArrayGeometry, sc: &SourceScenario, keep: bool) -> Result<Projected> {
    sc.check_identifiable(g)?;
    let omegas = sc.frequencies();
    let s = sc.amplitude_matrix()?;
    let a = signal::steering_matrix(g, omegas);
    let q = linalg::orthonormal_basis(&a, "steering matrix")?;
    let l = omegas.len();
    let kk = g.n_subarrays().saturating_sub(1);
    let mut f = DMatrix::zeros(l, l);
    let mut m = DMatrix::zeros(l, kk);
    let mut gm = DMatrix::zeros(kk, kk);
    let mut ds = Vec::new();
    let mut hs = Vec::new();
    for t in 0..sc.snapshots() {
        let st: Vec<C64> = s.column(t).iter().cloned().collect();
        let d = d_matrix(g, omegas, &st);
        let h = h_matrix(g, omegas, &st);
        let pd = linalg::project_out(&q, &d);
        let ph = linalg::project_out(&q, &h);
        f += (pd.adjoint() * &pd).map(|v| v.re);
        m += (pd.adjoint() * &ph).map(|v| v.re);
        gm += (ph.adjoint() * &ph).map(|v| v.re);
        if keep {
            ds.push(d);
            hs.push(h);
        }
    }
    Ok(Projected {
        q,
        d: ds,
        h: hs,
        matrices: FimMatrices {
            f: linalg::symmetrize(&f),
            m,
            g: linalg::symmetrize(&gm),
        },
    })
}

/// F, M and G for `sc` on `g`.
pub fn fim_matrices(g: &ArrayGeometry, sc: &SourceScenario) -> Result<FimMatrices> {
    Ok(compute(g, sc, false)?.matrices)
}

/// F, M and G with the projector and per-snapshot derivative matrices.
pub fn fim_blocks(g: &ArrayGeometry, sc: &SourceScenario) -> Result<FimBlocks> {
    let p = compute(g, sc, true)?;
    let n = g.n_elements();
    let projector = DMatrix::identity(n, n) - &p.q * p.q.adjoint();
    Ok(FimBlocks {
        f: p.matrices.f,
        m: p.matrices.m,
        g: p.matrices.g,
        projector,
        d: p.d,
        h: p.h,
    })
}

/// A bound on the source frequencies for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbReport {
    /// L x L bound, (rad/m)^2.
    pub matrix: DMatrix<f64>,
    pub average: f64,
    pub lee_srl: f64,
    /// Only defined for two sources.
    pub smith_srl: Option<f64>,
    pub mode: CalibrationMode,
    /// Condition number of the inverted information matrix.
    pub condition: f64,
}

impl CrbReport {
    fn from_information(
        info: &DMatrix<f64>,
        noise_power: f64,
        mode: CalibrationMode,
        what: &'static str,
    ) -> Result<Self> {
        let (inv, condition) = linalg::spd_inverse_with_condition(info, what)?;
        let matrix = inv * (noise_power / 2.0);
        let smith = if matrix.nrows() == 2 {
            Some(smith_srl(&matrix)?)
        } else {
            None
        };
        Ok(Self {
            average: average_crb(&matrix),
            lee_srl: lee_srl(&matrix)?,
            smith_srl: smith,
            matrix,
            mode,
            condition,
        })
    }
}

/// Fully calibrated bound `sigma^2/2 F^-1`.
pub fn crb_fc(g: &ArrayGeometry, sc: &SourceScenario) -> Result<CrbReport> {
    let fim = fim_matrices(g, sc)?;
    crb_from_fim(&fim, sc.noise_power(), CalibrationMode::Fully)
}

/// Partly calibrated bound `sigma^2/2 (F - M G^-1 M^T)^-1`.
pub fn crb_pc(g: &ArrayGeometry, sc: &SourceScenario) -> Result<CrbReport> {
    let fim = fim_matrices(g, sc)?;
    crb_from_fim(&fim, sc.noise_power(), CalibrationMode::Partly)
}

pub fn crb(g: &ArrayGeometry, sc: &SourceScenario, mode: CalibrationMode) -> Result<CrbReport> {
    match mode {
        CalibrationMode::Fully => crb_fc(g, sc),
        CalibrationMode::Partly => crb_pc(g, sc),
    }
}

/// Both bounds from one set of information blocks.
pub fn crb_both(g: &ArrayGeometry, sc: &SourceScenario) -> Result<(CrbReport, CrbReport)> {
    let fim = fim_matrices(g, sc)?;
    Ok((
        crb_from_fim(&fim, sc.noise_power(), CalibrationMode::Fully)?,
        crb_from_fim(&fim, sc.noise_power(), CalibrationMode::Partly)?,
    ))
}

pub fn crb_from_fim(
    fim: &FimMatrices,
    noise_power: f64,
    mode: CalibrationMode,
) -> Result<CrbReport> {
    match mode {
        CalibrationMode::Fully => {
            CrbReport::from_information(&fim.f, noise_power, mode, "frequency information F")
        }
        CalibrationMode::Partly => CrbReport::from_information(
            &fim.schur_complement()?,
            noise_power,
            mode,
            "Schur complement F - M G^-1 M^T",
        ),
    }
}

/// Mean of the diagonal.
pub fn average_crb(matrix: &DMatrix<f64>) -> f64 {
    let l = matrix.nrows().min(matrix.ncols());
    if l == 0 {
        return 0.0;
    }
    (0..l).map(|i| matrix[(i, i)]).sum::<f64>() / l as f64
}

/// Smith criterion `sqrt(u^T C u)` with `u = [1, -1]`.
pub fn smith_srl(matrix: &DMatrix<f64>) -> Result<f64> {
    if matrix.nrows() != 2 || matrix.ncols() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "Smith criterion needs a 2x2 bound, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let q = matrix[(0, 0)] + matrix[(1, 1)] - matrix[(0, 1)] - matrix[(1, 0)];
    Ok(q.max(0.0).sqrt())
}

/// Lee criterion `2 max_l sqrt(C_ll)`.
pub fn lee_srl(matrix: &DMatrix<f64>) -> Result<f64> {
    let l = matrix.nrows();
    if l == 0 || l != matrix.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "Lee criterion needs a non-empty square bound, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let max = (0..l).map(|i| matrix[(i, i)]).fold(0.0, f64::max);
    Ok(2.0 * max.sqrt())
}
