//! Measurement ensembles, the `y = A x + e` pipeline and cross-Gram matrices.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::pswf::ProlateBasis;
use crate::rng;
use crate::signal::{reconstruct, PswfCoefficients};

/// Magic prefix of the flat binary matrix layout.
pub const MAGIC: &[u8; 5] = b"BSNS1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    None,
    /// i.i.d. zero-mean Gaussian with standard deviation `sigma` per entry.
    Gaussian { sigma: f64 },
}

/// An `M x N` measurement matrix over canonical coefficients plus a noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble {
    matrix: DMatrix<f64>,
    seed: Option<u64>,
    noise: NoiseModel,
}

impl MeasurementEnsemble {
    /// Wraps a user-supplied matrix.
    pub fn from_matrix(matrix: DMatrix<f64>, noise: NoiseModel) -> Result<Self> {
        if matrix.nrows() == 0 {
            return Err(Error::InvalidArgument("an ensemble needs at least one row".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("ensemble entries must be finite".into()));
        }
        if let NoiseModel::Gaussian { sigma } = noise {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {sigma}")));
            }
        }
        Ok(Self { matrix, seed: None, noise })
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }
}

/// `M x N` matrix of i.i.d. standard normals from a ChaCha8 stream keyed by
/// `seed`, filled row-major.
pub fn gaussian_ensemble(m: usize, n: usize, seed: u64) -> Result<MeasurementEnsemble> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!("ensemble dimensions must be positive, got {m}x{n}")));
    }
    let mut r = rng::seeded(seed);
    let data: Vec<f64> = (0..m * n).map(|_| StandardNormal.sample(&mut r)).collect();
    Ok(MeasurementEnsemble {
        matrix: DMatrix::from_row_slice(m, n, &data),
        seed: Some(seed),
        noise: NoiseModel::None,
    })
}

/// Rows `a_nk` for sampled kernels `phi_n`, from `<phi_n, psi_k>_T = a_nk lambda_k`,
/// truncated to the canonical basis. Also returns, per kernel, the interval
/// energy the truncation discards.
pub fn ensemble_from_kernels(kernels: &[Vec<f64>], canonical: &ProlateBasis) -> Result<(MeasurementEnsemble, Vec<f64>)> {
    let grid = canonical.grid();
    let lambda = canonical.eigenvalues();
    let n = canonical.len();
    let mut a = DMatrix::zeros(kernels.len(), n);
    let mut tails = Vec::with_capacity(kernels.len());
    for (row, phi) in kernels.iter().enumerate() {
        if phi.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        let proj = crate::signal::analyze(phi, canonical)?;
        for k in 0..n {
            if lambda[k] > 0.0 {
                a[(row, k)] = proj.as_slice()[k] / lambda[k];
            }
        }
        let approx = reconstruct(&proj, canonical)?;
        let diff: Vec<f64> = phi.iter().zip(&approx).map(|(p, q)| p - q).collect();
        tails.push(grid.inner(&diff, &diff));
    }
    Ok((MeasurementEnsemble::from_matrix(a, NoiseModel::None)?, tails))
}

/// Noisy measurements with the realized noise kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub y: DVector<f64>,
    pub noise: DVector<f64>,
}

/// `y = A x + e`, drawing `e` from the ensemble's noise model.
pub fn measure<R: Rng + ?Sized>(x: &[f64], ens: &MeasurementEnsemble, rng: &mut R) -> Result<Measurement> {
    if x.len() != ens.cols() {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} coefficients, ensemble expects {}",
            x.len(),
            ens.cols()
        )));
    }
    let clean = &ens.matrix * DVector::from_column_slice(x);
    let noise = match ens.noise {
        NoiseModel::None => DVector::zeros(ens.rows()),
        NoiseModel::Gaussian { sigma } => {
            let dist = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            DVector::from_fn(ens.rows(), |_, _| dist.sample(rng))
        }
    };
    Ok(Measurement { y: clean + &noise, noise })
}

pub fn measure_coefficients<R: Rng + ?Sized>(
    x: &PswfCoefficients,
    ens: &MeasurementEnsemble,
    rng: &mut R,
) -> Result<Measurement> {
    measure(x.as_slice(), ens, rng)
}

/// `Phi_Q`: interval inner products between allocation modes and canonical modes.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossGram {
    matrix: DMatrix<f64>,
    band: crate::pswf::BandSet,
    residual: f64,
}

impl CrossGram {
    /// Wraps a precomputed matrix (e.g. read back from disk, or a toy case).
    pub fn from_parts(matrix: DMatrix<f64>, band: crate::pswf::BandSet, residual: f64) -> Self {
        Self { matrix, band, residual }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn band(&self) -> &crate::pswf::BandSet {
        &self.band
    }

    /// Relative interval-norm energy of a probe signal left outside the span
    /// of the canonical modes.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `N`.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// `S`.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, alpha: &[f64]) -> DVector<f64> {
        &self.matrix * DVector::from_column_slice(alpha)
    }
}

/// Builds `Phi_Q[k, n] = <psi_n^Q, psi_k>_T` on the shared grid. The residual
/// uses the probe `alpha = (1, ..., 1) / sqrt(S)`.
pub fn cross_gram(alloc: &ProlateBasis, canonical: &ProlateBasis) -> Result<CrossGram> {
    let grid = canonical.grid();
    if !grid.same_as(alloc.grid()) {
        return Err(Error::GridMismatch);
    }
    let w = grid.weights();
    let psi_q = alloc.eigvecs();
    let psi = canonical.eigvecs();
    let weighted = DMatrix::from_fn(psi.nrows(), psi.ncols(), |i, k| w[i] * psi[(i, k)]);
    let matrix = weighted.transpose() * psi_q;

    let s = alloc.len();
    let residual = if s == 0 {
        0.0
    } else {
        let alpha = vec![1.0 / (s as f64).sqrt(); s];
        let f = crate::signal::synthesize(alloc, &alpha)?;
        let x = PswfCoefficients::new((&matrix * DVector::from_vec(alpha)).iter().copied().collect())?;
        let g = reconstruct(&x, canonical)?;
        let diff: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a - b).collect();
        let energy = grid.inner(&f, &f);
        if energy > 0.0 {
            (grid.inner(&diff, &diff) / energy).sqrt()
        } else {
            0.0
        }
    };
    Ok(CrossGram { matrix, band: alloc.band().clone(), residual })
}

/// Writes `MAGIC`, rows and cols as u64 LE, then row-major f64 LE.
pub fn write_matrix<W: Write>(mut out: W, m: &DMatrix<f64>) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(m.nrows() as u64).to_le_bytes())?;
    out.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut input: R) -> Result<DMatrix<f64>> {
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse("bad magic, expected BSNS1".into()));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Parse(format!("dimensions {rows}x{cols} overflow")))?;
    let mut data = Vec::with_capacity(len.min(1 << 24));
    for _ in 0..len {
        input.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

impl MeasurementEnsemble {
    pub fn write_binary<W: Write>(&self, out: W) -> Result<()> {
        write_matrix(out, &self.matrix)
    }

    pub fn read_binary<R: Read>(input: R) -> Result<Self> {
        Self::from_matrix(read_matrix(input)?, NoiseModel::None)
    }
}

impl CrossGram {
    pub fn write_binary<W: Write>(&self, out: W) -> Result<()> {
        write_matrix(out, &self.matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pswf::{solve_concentration, BandSet, TimeGrid};
    use std::f64::consts::PI;

    #[test]
    fn same_seed_same_matrix() {
        let a = gaussian_ensemble(5, 7, 42).unwrap();
        let b = gaussian_ensemble(5, 7, 42).unwrap();
        let c = gaussian_ensemble(5, 7, 43).unwrap();
        assert_eq!(a.matrix().as_slice(), b.matrix().as_slice());
        assert_ne!(a.matrix(), c.matrix());
    }

    #[test]
    fn single_row_ensemble() {
        let a = gaussian_ensemble(1, 2, 0).unwrap();
        assert_eq!(a.matrix().shape(), (1, 2));
        assert_eq!(crate::linalg::numerical_rank(a.matrix(), 1e-8), 1);
        assert!(gaussian_ensemble(0, 2, 0).is_err());
    }

    #[test]
    fn noiseless_measurement_is_matrix_product() {
        let ens = gaussian_ensemble(4, 6, 1).unwrap();
        let x = [1.0, -2.0, 0.5, 0.0, 3.0, 1.5];
        let mut r = rng::seeded(0);
        let m = measure(&x, &ens, &mut r).unwrap();
        let direct = ens.matrix() * DVector::from_column_slice(&x);
        assert_eq!(m.y, direct);
        assert!(m.noise.iter().all(|&v| v == 0.0));
        let z = measure(&[0.0; 6], &ens, &mut r).unwrap();
        assert!(z.y.iter().all(|&v| v == 0.0));
        assert!(measure(&[0.0; 5], &ens, &mut r).is_err());
    }

    #[test]
    fn noise_energy_matches_variance() {
        let ens = gaussian_ensemble(10, 3, 2).unwrap().with_noise(NoiseModel::Gaussian { sigma: 0.01 });
        let mut r = rng::seeded(9);
        let draws = 1000;
        let mean: f64 = (0..draws)
            .map(|_| measure(&[0.0; 3], &ens, &mut r).unwrap().noise.norm_squared())
            .sum::<f64>()
            / draws as f64;
        let expected = 10.0 * 1e-4;
        assert!((mean - expected).abs() < 0.2 * expected, "{mean}");
    }

    #[test]
    fn binary_layout_round_trip_and_header() {
        let ens = gaussian_ensemble(3, 2, 5).unwrap();
        let mut buf = Vec::new();
        ens.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"BSNS1");
        assert_eq!(u64::from_le_bytes(buf[5..13].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(buf[13..21].try_into().unwrap()), 2);
        assert_eq!(buf.len(), 21 + 6 * 8);
        assert_eq!(f64::from_le_bytes(buf[29..37].try_into().unwrap()), ens.matrix()[(0, 1)]);
        let back = MeasurementEnsemble::read_binary(&buf[..]).unwrap();
        assert_eq!(back.matrix(), ens.matrix());
        assert!(read_matrix(&b"XXXXX"[..]).is_err());
    }

    #[test]
    fn empty_allocation_gives_empty_cross_gram() {
        let grid = TimeGrid::oversampled(PI, 4.0).unwrap();
        let canon = solve_concentration(&BandSet::full(PI).unwrap(), &grid, 6).unwrap();
        let q = solve_concentration(&BandSet::symmetric(PI, &[(0.0, 1.0)]).unwrap(), &grid, 0).unwrap();
        let cg = cross_gram(&q, &canon).unwrap();
        assert_eq!(cg.matrix().shape(), (6, 0));
        assert_eq!(cg.residual(), 0.0);
    }

    #[test]
    fn cross_gram_rejects_other_grids() {
        let g1 = TimeGrid::oversampled(PI, 4.0).unwrap();
        let g2 = g1.refined();
        let canon = solve_concentration(&BandSet::full(PI).unwrap(), &g1, 4).unwrap();
        let q = solve_concentration(&BandSet::full(PI).unwrap(), &g2, 2).unwrap();
        assert!(matches!(cross_gram(&q, &canon), Err(Error::GridMismatch)));
    }

    #[test]
    fn kernel_equal_to_a_mode_gives_unit_row() {
        let grid = TimeGrid::oversampled(PI, 6.0).unwrap();
        let canon = solve_concentration(&BandSet::full(PI).unwrap(), &grid, 8).unwrap();
        let (ens, tails) = ensemble_from_kernels(&[canon.mode(2)], &canon).unwrap();
        for k in 0..8 {
            let want = if k == 2 { 1.0 } else { 0.0 };
            assert!((ens.matrix()[(0, k)] - want).abs() < 1e-9);
        }
        assert!(tails[0] < 1e-20);
    }
}
