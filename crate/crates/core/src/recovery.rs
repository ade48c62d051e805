//! Blind recovery by exhaustive dictionary least squares, rank certificates,
//! collision witnesses below the measurement threshold and the inverse
//! Lipschitz constant that controls noisy recovery.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, null_space, numerical_rank, orthonormal_columns, range_basis, rank_of, singular_values};
use crate::par;
use crate::rng;
use crate::sensing::{CrossGram, MeasurementEnsemble, NoiseModel};
use crate::signal::lexicographic_cmp_bands;

/// Default relative singular-value gap for numerical rank.
pub const DEFAULT_RANK_GAP: f64 = 1e-8;
/// Default relative residual tolerance for declaring a tie between allocations.
pub const DEFAULT_TIE_TOL: f64 = 1e-6;
/// Absolute error below which a noiseless trial counts as a success.
pub const SUCCESS_TOL: f64 = 1e-6;
/// Collision validity: `||A(x1 - x2)|| <= COLLISION_TOL * ||x1 - x2||`.
pub const COLLISION_TOL: f64 = 1e-8;
/// Collision validity: `||x1 - x2|| > MIN_SEPARATION`.
pub const MIN_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderConfig {
    /// Allocations whose residual is within `tie_tol * ||y||` of the best tie.
    pub tie_tol: f64,
    /// With noiseless ensembles, a best residual above `failure_floor * ||y||`
    /// marks the decode as failed.
    pub failure_floor: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self { tie_tol: DEFAULT_TIE_TOL, failure_floor: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Unique,
    Ambiguous,
    Failed,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Unique => "unique",
            Status::Ambiguous => "ambiguous",
            Status::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub allocation: usize,
    pub alpha: DVector<f64>,
    pub x_hat: DVector<f64>,
    pub residual: f64,
    pub status: Status,
    /// Dictionary indices within the tie tolerance (the chosen one included).
    pub ties: Vec<usize>,
}

/// Solves `min_alpha ||y - A Phi_Q alpha||` for every `Q` in the dictionary and
/// keeps the best. Ties go to the smallest measure, then the lexicographically
/// first allocation.
pub fn blind_recover(
    y: &DVector<f64>,
    ens: &MeasurementEnsemble,
    dict: &[CrossGram],
    config: DecoderConfig,
) -> Result<RecoveryResult> {
    if dict.is_empty() {
        return Err(Error::InvalidArgument("empty dictionary".into()));
    }
    if y.len() != ens.rows() {
        return Err(Error::DimensionMismatch(format!("y has {} entries, A has {} rows", y.len(), ens.rows())));
    }
    if let Some(bad) = dict.iter().find(|d| d.rows() != ens.cols()) {
        return Err(Error::DimensionMismatch(format!(
            "cross-Gram has {} rows, A has {} columns",
            bad.rows(),
            ens.cols()
        )));
    }
    let a = ens.matrix();
    let fits: Vec<(DVector<f64>, f64)> = par::map_slice(dict, |cg| least_squares(&(a * cg.matrix()), y));

    let y_norm = y.norm();
    let best = fits.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    let mut ties: Vec<usize> = (0..dict.len()).filter(|&i| fits[i].1 <= best + config.tie_tol * y_norm).collect();
    ties.sort_by(|&i, &j| {
        dict[i]
            .band()
            .measure()
            .total_cmp(&dict[j].band().measure())
            .then_with(|| lexicographic_cmp_bands(dict[i].band(), dict[j].band()))
            .then(i.cmp(&j))
    });
    let chosen = ties[0];
    let (alpha, residual) = fits[chosen].clone();
    let x_hat = dict[chosen].matrix() * &alpha;
    let status = if ens.noise() == NoiseModel::None && residual > config.failure_floor * y_norm {
        Status::Failed
    } else if ties.len() > 1 {
        Status::Ambiguous
    } else {
        Status::Unique
    };
    ties.sort_unstable();
    Ok(RecoveryResult { allocation: chosen, alpha, x_hat, residual, status, ties })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankCertificate {
    pub rank_pair: usize,
    pub rank_projected: usize,
    pub preserved: bool,
    pub gap: f64,
    /// Smallest retained singular value of `A [Phi1, Phi2]` relative to its
    /// largest (0 when nothing is retained).
    pub projected_margin: f64,
}

fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!("{} vs {} rows", a.nrows(), b.nrows())));
    }
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    Ok(out)
}

/// Compares `rank [Phi1, Phi2]` with `rank A [Phi1, Phi2]`, both counted as
/// singular values above `gap * sigma_max`.
pub fn certify_rank_preservation(
    ens: &MeasurementEnsemble,
    phi1: &DMatrix<f64>,
    phi2: &DMatrix<f64>,
    gap: f64,
) -> Result<RankCertificate> {
    let pair = hstack(phi1, phi2)?;
    if pair.nrows() != ens.cols() {
        return Err(Error::DimensionMismatch(format!("Phi has {} rows, A has {} columns", pair.nrows(), ens.cols())));
    }
    let rank_pair = numerical_rank(&pair, gap);
    let sv = singular_values(&(ens.matrix() * &pair));
    let rank_projected = rank_of(&sv, gap);
    let projected_margin = if rank_projected > 0 { sv[rank_projected - 1] / sv[0] } else { 0.0 };
    Ok(RankCertificate {
        rank_pair,
        rank_projected,
        preserved: rank_pair == rank_projected,
        gap,
        projected_margin,
    })
}

/// Numerical rank of `[Phi_1, Phi_2]`.
pub fn pair_rank(g1: &CrossGram, g2: &CrossGram, gap: f64) -> Result<usize> {
    Ok(numerical_rank(&hstack(g1.matrix(), g2.matrix())?, gap))
}

/// Largest numerical rank of `[Phi_i, Phi_j]` over unordered pairs, `i == j` included.
pub fn max_pair_rank(dict: &[CrossGram], gap: f64) -> Result<(usize, (usize, usize))> {
    if dict.is_empty() {
        return Err(Error::InvalidArgument("empty dictionary".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..dict.len()).flat_map(|i| (i..dict.len()).map(move |j| (i, j))).collect();
    let ranks = par::map_slice(&pairs, |&(i, j)| {
        hstack(dict[i].matrix(), dict[j].matrix()).map(|m| numerical_rank(&m, gap))
    });
    let mut best = (0, pairs[0]);
    for (r, &p) in ranks.into_iter().zip(&pairs) {
        let r = r?;
        if r > best.0 {
            best = (r, p);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collision {
    pub alpha1: DVector<f64>,
    pub alpha2: DVector<f64>,
    pub x1: DVector<f64>,
    pub x2: DVector<f64>,
}

impl Collision {
    pub fn separation(&self) -> f64 {
        (&self.x1 - &self.x2).norm()
    }

    /// `||A (x1 - x2)|| / ||x1 - x2||`.
    pub fn relative_defect(&self, ens: &MeasurementEnsemble) -> f64 {
        let d = &self.x1 - &self.x2;
        (ens.matrix() * &d).norm() / d.norm()
    }
}

/// Two distinct signals from `Phi1` and `Phi2` with identical measurements.
///
/// Requires `M < rank [Phi1, Phi2]`. Returns `None` when no null vector of
/// `A [Phi1, -Phi2]` separates the signals by more than [`MIN_SEPARATION`].
pub fn construct_collision(
    ens: &MeasurementEnsemble,
    phi1: &DMatrix<f64>,
    phi2: &DMatrix<f64>,
    gap: f64,
) -> Result<Option<Collision>> {
    let pair = hstack(phi1, &(-phi2))?;
    if pair.nrows() != ens.cols() {
        return Err(Error::DimensionMismatch(format!("Phi has {} rows, A has {} columns", pair.nrows(), ens.cols())));
    }
    let rank = numerical_rank(&pair, gap);
    if ens.rows() >= rank {
        return Err(Error::InvalidArgument(format!(
            "collision search needs M < rank [Phi1, Phi2]; M = {}, rank = {rank}",
            ens.rows()
        )));
    }
    let kernel = null_space(&(ens.matrix() * &pair), gap);
    if kernel.ncols() == 0 {
        return Ok(None);
    }
    // Within the null space, take the direction that separates x1 from x2 the most.
    let spread = &pair * &kernel;
    let svd = spread.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let top = (0..svd.singular_values.len())
        .max_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]).then(b.cmp(&a)))
        .expect("non-empty null space");
    let mut v = &kernel * vt.row(top).transpose();
    let pivot = v.iamax();
    v /= v[pivot];

    let s1 = phi1.ncols();
    let alpha1 = v.rows(0, s1).into_owned();
    let alpha2 = v.rows(s1, phi2.ncols()).into_owned();
    let x1 = phi1 * &alpha1;
    let x2 = phi2 * &alpha2;
    let c = Collision { alpha1, alpha2, x1, x2 };
    if c.separation() <= MIN_SEPARATION || c.relative_defect(ens) > COLLISION_TOL {
        return Ok(None);
    }
    Ok(Some(c))
}

/// `min ||A z|| / ||z||` over the probes.
pub fn inverse_lipschitz(ens: &MeasurementEnsemble, probes: &[DVector<f64>]) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("empty probe set".into()));
    }
    let a = ens.matrix();
    probes.iter().try_fold(f64::INFINITY, |acc, z| {
        if z.len() != ens.cols() {
            return Err(Error::DimensionMismatch(format!("probe has {} entries, A has {} columns", z.len(), ens.cols())));
        }
        let n = z.norm();
        if n == 0.0 {
            return Err(Error::InvalidArgument("zero probe".into()));
        }
        Ok(acc.min((a * z).norm() / n))
    })
}

/// Normalized differences `Phi_i a1 - Phi_j a2` with Gaussian `a1, a2`,
/// `per_pair` draws for every unordered pair (`i == j` included).
pub fn difference_probes(dict: &[CrossGram], per_pair: usize, seed: u64) -> Vec<DVector<f64>> {
    let pairs: Vec<(usize, usize)> = (0..dict.len()).flat_map(|i| (i..dict.len()).map(move |j| (i, j))).collect();
    let per: Vec<Vec<DVector<f64>>> = par::map_range(pairs.len(), |p| {
        let (i, j) = pairs[p];
        let mut r = rng::stream(seed, &[p as u64]);
        let mut out = Vec::with_capacity(per_pair);
        while out.len() < per_pair {
            let a1 = DVector::from_fn(dict[i].cols(), |_, _| StandardNormal.sample(&mut r));
            let a2 = DVector::from_fn(dict[j].cols(), |_, _| StandardNormal.sample(&mut r));
            let z = dict[i].matrix() * a1 - dict[j].matrix() * a2;
            let n = z.norm();
            if n > 0.0 {
                out.push(z / n);
            } else if dict[i].cols() + dict[j].cols() == 0 {
                break;
            }
        }
        out
    });
    per.into_iter().flatten().collect()
}

/// Exact inverse Lipschitz constant of `A` on the pairwise difference set of a
/// finite dictionary: the smallest singular value of `A U` over orthonormal
/// bases `U` of every `span [Phi_i, Phi_j]` (zero if some span exceeds `M`).
pub fn subspace_floor(ens: &MeasurementEnsemble, dict: &[CrossGram], gap: f64) -> Result<f64> {
    Ok(floor_over_spans(ens, &pair_spans(dict, gap)?))
}

/// Orthonormal bases of `span [Phi_i, Phi_j]` for every unordered pair, `i == j` included.
pub fn pair_spans(dict: &[CrossGram], gap: f64) -> Result<Vec<DMatrix<f64>>> {
    if dict.is_empty() {
        return Err(Error::InvalidArgument("empty dictionary".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..dict.len()).flat_map(|i| (i..dict.len()).map(move |j| (i, j))).collect();
    par::map_slice(&pairs, |&(i, j)| Ok(range_basis(&hstack(dict[i].matrix(), dict[j].matrix())?, gap)))
        .into_iter()
        .collect()
}

/// Smallest singular value of `A U` over the given bases.
pub fn floor_over_spans(ens: &MeasurementEnsemble, spans: &[DMatrix<f64>]) -> f64 {
    spans
        .iter()
        .map(|u| {
            if u.ncols() == 0 {
                f64::INFINITY
            } else if u.ncols() > ens.rows() {
                0.0
            } else {
                singular_values(&(ens.matrix() * u)).last().copied().unwrap_or(0.0)
            }
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    /// Minimum over random difference probes (an upper bound on the true constant).
    pub probe_min: f64,
    /// Exact constant over the spans of dictionary pairs.
    pub floor: f64,
    /// `min(probe_min, floor)`: the value used in recovery bounds.
    pub beta: f64,
}

impl LipschitzEstimate {
    /// Empirical robust-recovery constant `4 / beta^2` (error energy per noise energy).
    pub fn robustness_constant(&self) -> f64 {
        4.0 / (self.beta * self.beta)
    }
}

pub fn estimate_inverse_lipschitz(
    ens: &MeasurementEnsemble,
    dict: &[CrossGram],
    probes_per_pair: usize,
    seed: u64,
    gap: f64,
) -> Result<LipschitzEstimate> {
    let floor = subspace_floor(ens, dict, gap)?;
    let probes = difference_probes(dict, probes_per_pair, seed);
    let probe_min = if probes.is_empty() { f64::INFINITY } else { inverse_lipschitz(ens, &probes)? };
    Ok(LipschitzEstimate { probe_min, floor, beta: probe_min.min(floor) })
}

/// Rows of a random rank-`m` orthogonal projection: `Q^T` from the QR of an
/// `N x m` Gaussian matrix.
pub fn random_projection(m: usize, n: usize, seed: u64) -> Result<MeasurementEnsemble> {
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("projection rank {m} must lie in 1..={n}")));
    }
    let mut r = rng::seeded(seed);
    let g = DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut r));
    MeasurementEnsemble::from_matrix(orthonormal_columns(&g).transpose(), NoiseModel::None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensingKind {
    RandomProjection,
    Gaussian,
}

/// One decode of a random dictionary signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub m: usize,
    pub allocation_index: usize,
    pub chosen_index: usize,
    pub residual: f64,
    pub err_norm: f64,
    pub noise_norm: f64,
    /// Exact inverse Lipschitz constant of this trial's matrix on the dictionary.
    pub beta: f64,
    pub status: Status,
    /// The decoded signal differs from the truth yet has the same measurements.
    pub collision_witnessed: bool,
}

impl TrialRecord {
    pub fn success(&self) -> bool {
        self.err_norm < SUCCESS_TOL
    }

    /// `err <= 2 ||e|| / beta`.
    pub fn within_robust_bound(&self) -> bool {
        self.beta > 0.0 && self.err_norm <= 2.0 * self.noise_norm / self.beta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub records: Vec<TrialRecord>,
}

impl TrialSummary {
    pub fn success_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.success()).count() as f64 / self.records.len() as f64
    }

    pub fn collisions(&self) -> usize {
        self.records.iter().filter(|r| r.collision_witnessed).count()
    }
}

/// Runs `trials` decodes. Trial `t` draws its own matrix, allocation and
/// coefficients from the stream `(seed, t)`; the returned record's `seed`
/// field is the per-trial matrix seed.
pub fn recovery_trials(
    kind: SensingKind,
    m: usize,
    dict: &[CrossGram],
    trials: usize,
    seed: u64,
    noise: NoiseModel,
) -> Result<TrialSummary> {
    if dict.is_empty() {
        return Err(Error::InvalidArgument("empty dictionary".into()));
    }
    let n = dict[0].rows();
    let spans = pair_spans(dict, DEFAULT_RANK_GAP)?;
    let records = par::map_range(trials, |t| -> Result<TrialRecord> {
        let mut r = rng::stream(seed, &[t as u64]);
        let matrix_seed: u64 = rand::Rng::random(&mut r);
        let ens = match kind {
            SensingKind::RandomProjection => random_projection(m, n, matrix_seed)?,
            SensingKind::Gaussian => crate::sensing::gaussian_ensemble(m, n, matrix_seed)?,
        }
        .with_noise(noise);
        let idx = rand::Rng::random_range(&mut r, 0..dict.len());
        let alpha = DVector::from_fn(dict[idx].cols(), |_, _| StandardNormal.sample(&mut r));
        let x = dict[idx].matrix() * &alpha;
        let meas = crate::sensing::measure(x.as_slice(), &ens, &mut r)?;
        let rec = blind_recover(&meas.y, &ens, dict, DecoderConfig::default())?;
        let diff = &rec.x_hat - &x;
        let err_norm = diff.norm();
        let collision_witnessed = noise == NoiseModel::None
            && err_norm > MIN_SEPARATION
            && (ens.matrix() * &diff).norm() <= COLLISION_TOL * err_norm;
        Ok(TrialRecord {
            seed: matrix_seed,
            m,
            allocation_index: idx,
            chosen_index: rec.allocation,
            residual: rec.residual,
            err_norm,
            noise_norm: meas.noise.norm(),
            beta: floor_over_spans(&ens, &spans),
            status: rec.status,
            collision_witnessed,
        })
    });
    Ok(TrialSummary { records: records.into_iter().collect::<Result<Vec<_>>>()? })
}

/// Success rate of blind recovery under random rank-`m` projections.
pub fn random_projection_recovery_trial(m: usize, dict: &[CrossGram], trials: usize, seed: u64) -> Result<TrialSummary> {
    recovery_trials(SensingKind::RandomProjection, m, dict, trials, seed, NoiseModel::None)
}

/// CSV with columns `seed,M,allocation_index,residual,err_norm,status`.
pub fn write_trials_csv<W: Write>(mut out: W, records: &[TrialRecord]) -> Result<()> {
    writeln!(out, "seed,M,allocation_index,residual,err_norm,status")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.seed,
            r.m,
            r.allocation_index,
            r.residual,
            r.err_norm,
            r.status.as_str()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pswf::BandSet;
    use std::f64::consts::PI;

    fn toy(matrix: DMatrix<f64>, lo: f64) -> CrossGram {
        let band = BandSet::symmetric(PI, &[(lo, lo + 0.5)]).unwrap();
        CrossGram::from_parts(matrix, band, 0.0)
    }

    #[test]
    fn hand_checked_collision() {
        let ens = MeasurementEnsemble::from_matrix(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), NoiseModel::None).unwrap();
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let c = construct_collision(&ens, &e1, &e2, 1e-8).unwrap().unwrap();
        assert!((c.x1 - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-12);
        assert!((c.x2 - DVector::from_vec(vec![0.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn collision_rejected_above_threshold() {
        let ens = MeasurementEnsemble::from_matrix(DMatrix::identity(2, 2), NoiseModel::None).unwrap();
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!(construct_collision(&ens, &e1, &e2, 1e-8).is_err());
    }

    #[test]
    fn duplicate_pair_rank_equals_single_rank() {
        let phi = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 2.0]);
        let ens = crate::sensing::gaussian_ensemble(2, 4, 3).unwrap();
        let cert = certify_rank_preservation(&ens, &phi, &phi, 1e-8).unwrap();
        assert_eq!(cert.rank_pair, 2);
        assert!(cert.preserved);
    }

    #[test]
    fn too_few_rows_cannot_preserve_rank() {
        let phi1 = DMatrix::from_fn(6, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let phi2 = DMatrix::from_fn(6, 2, |i, j| if i == j + 2 { 1.0 } else { 0.0 });
        let ens = crate::sensing::gaussian_ensemble(3, 6, 3).unwrap();
        let cert = certify_rank_preservation(&ens, &phi1, &phi2, 1e-8).unwrap();
        assert_eq!(cert.rank_pair, 4);
        assert!(cert.rank_projected <= 3);
        assert!(!cert.preserved);
    }

    #[test]
    fn zero_measurements_tie_everywhere() {
        let dict = vec![
            toy(DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]), 1.0),
            toy(DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]), 0.0),
        ];
        let ens = MeasurementEnsemble::from_matrix(DMatrix::identity(3, 3), NoiseModel::None).unwrap();
        let r = blind_recover(&DVector::zeros(3), &ens, &dict, DecoderConfig::default()).unwrap();
        assert_eq!(r.status, Status::Ambiguous);
        assert_eq!(r.ties, vec![0, 1]);
        // Equal measure, so the lexicographically first band wins.
        assert_eq!(r.allocation, 1);
        assert!(r.x_hat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decoder_flags_unexplainable_measurements() {
        let dict = vec![toy(DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]), 0.0)];
        let ens = MeasurementEnsemble::from_matrix(DMatrix::identity(3, 3), NoiseModel::None).unwrap();
        let y = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let r = blind_recover(&y, &ens, &dict, DecoderConfig::default()).unwrap();
        assert_eq!(r.status, Status::Failed);
        assert!(blind_recover(&y, &ens, &[], DecoderConfig::default()).is_err());
    }

    #[test]
    fn lipschitz_edge_cases() {
        let probes = vec![DVector::from_vec(vec![1.0, 0.0, 0.0]), DVector::from_vec(vec![0.6, 0.8, 0.0])];
        let proj = MeasurementEnsemble::from_matrix(
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            NoiseModel::None,
        )
        .unwrap();
        assert!((inverse_lipschitz(&proj, &probes).unwrap() - 1.0).abs() < 1e-15);
        let zero = MeasurementEnsemble::from_matrix(DMatrix::zeros(2, 3), NoiseModel::None).unwrap();
        assert_eq!(inverse_lipschitz(&zero, &probes).unwrap(), 0.0);
        assert!(inverse_lipschitz(&zero, &[]).is_err());
    }

    #[test]
    fn full_rank_projection_always_recovers() {
        let dict = vec![
            toy(DMatrix::from_fn(5, 2, |i, j| ((i + 1) * (j + 2)) as f64 % 3.0 + 0.1 * i as f64), 0.0),
            toy(DMatrix::from_fn(5, 2, |i, j| ((i + 2 * j) % 4) as f64 - 1.0), 1.0),
        ];
        let s = random_projection_recovery_trial(5, &dict, 20, 11).unwrap();
        assert_eq!(s.success_rate(), 1.0);
    }

    #[test]
    fn trials_csv_header() {
        let mut buf = Vec::new();
        write_trials_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "seed,M,allocation_index,residual,err_norm,status\n");
    }
}
