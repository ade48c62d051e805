//! Covering numbers, fractal-dimension slopes, Minkowski sums and the Rényi
//! information dimension of discrete-continuous mixtures.
//!
//! Entropies use natural logarithms throughout. Dimension estimates are
//! slopes of one log against another, so the base cancels.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use log::warn;
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::par;
use crate::rng;

/// Largest cloud accepted by the exhaustive cover search.
pub const EXACT_COVER_CAP: usize = 20;

/// A finite set of points in `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
    provenance: String,
}

impl PointCloud {
    pub fn new(dim: usize, data: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if dim == 0 || data.is_empty() {
            return Err(Error::InvalidArgument("a point cloud needs at least one point of positive dimension".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!("{} values do not split into {dim}-vectors", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("point coordinates must be finite".into()));
        }
        Ok(Self { dim, data, provenance: provenance.into() })
    }

    pub fn from_rows(rows: &[Vec<f64>], provenance: impl Into<String>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("rows of different lengths".into()));
        }
        Self::new(dim, rows.concat(), provenance)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn translated(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch(format!("shift has {} entries, cloud is {}-dimensional", v.len(), self.dim)));
        }
        let data = self.data.iter().enumerate().map(|(i, x)| x + v[i % self.dim]).collect();
        Self::new(self.dim, data, format!("{} + shift", self.provenance))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.dim, self.data.iter().map(|x| c * x).collect(), format!("{} * {c}", self.provenance))
    }

    /// Concatenates clouds of equal dimension.
    pub fn union(parts: &[PointCloud], provenance: impl Into<String>) -> Result<Self> {
        let dim = parts.first().map_or(0, |p| p.dim);
        if parts.iter().any(|p| p.dim != dim) {
            return Err(Error::DimensionMismatch("union of clouds with different dimensions".into()));
        }
        Self::new(dim, parts.iter().flat_map(|p| p.data.iter().copied()).collect(), provenance)
    }

    /// CSV with header `x0,...,x{dim-1}` and one point per row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for p in self.points() {
            let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads the format of [`PointCloud::write_csv`]; a header row is optional.
    pub fn read_csv<R: BufRead>(input: R, provenance: impl Into<String>) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            match parsed {
                Ok(row) => rows.push(row),
                Err(_) if lineno == 0 => continue,
                Err(e) => return Err(Error::Parse(format!("line {}: {e}", lineno + 1))),
            }
        }
        Self::from_rows(&rows, provenance)
    }
}

/// Uniform samples of `[0, 1] e_axis` for each listed axis, in `R^dim`.
pub fn segment_union_cloud(dim: usize, axes: &[usize], per_segment: usize, seed: u64) -> Result<PointCloud> {
    if axes.iter().any(|&a| a >= dim) {
        return Err(Error::InvalidArgument(format!("axis out of range for dimension {dim}")));
    }
    let mut data = Vec::with_capacity(axes.len() * per_segment * dim);
    for (k, &axis) in axes.iter().enumerate() {
        let mut r = rng::stream(seed, &[k as u64]);
        for _ in 0..per_segment {
            let mut p = vec![0.0; dim];
            p[axis] = r.random::<f64>();
            data.extend(p);
        }
    }
    PointCloud::new(dim, data, format!("{} unit segments in R^{dim}", axes.len()))
}

fn unit_ball_sample<R: Rng + ?Sized>(r: &mut R, k: usize) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let g: Vec<f64> = (0..k).map(|_| StandardNormal.sample(r)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            let radius = r.random::<f64>().powf(1.0 / k as f64);
            return g.into_iter().map(|v| v * radius / norm).collect();
        }
    }
}

/// Uniform samples of the unit ball of the first `sub_dim` coordinates of `R^dim`.
pub fn coordinate_ball_cloud(dim: usize, sub_dim: usize, count: usize, seed: u64) -> Result<PointCloud> {
    if sub_dim == 0 || sub_dim > dim {
        return Err(Error::InvalidArgument(format!("ball of dimension {sub_dim} in R^{dim}")));
    }
    let mut r = rng::seeded(seed);
    let mut data = Vec::with_capacity(count * dim);
    for _ in 0..count {
        let mut p = unit_ball_sample(&mut r, sub_dim);
        p.resize(dim, 0.0);
        data.extend(p);
    }
    PointCloud::new(dim, data, format!("unit {sub_dim}-ball in R^{dim}"))
}

/// `U u` with `u` uniform in the unit ball, for each orthonormal basis `U`
/// (columns) in turn.
pub fn subspace_union_cloud(bases: &[nalgebra::DMatrix<f64>], per_subspace: usize, seed: u64) -> Result<PointCloud> {
    let dim = bases.first().map_or(0, |b| b.nrows());
    if bases.iter().any(|b| b.nrows() != dim || b.ncols() == 0) {
        return Err(Error::DimensionMismatch("subspace bases of different ambient dimension".into()));
    }
    let mut data = Vec::with_capacity(bases.len() * per_subspace * dim);
    for (k, u) in bases.iter().enumerate() {
        let mut r = rng::stream(seed, &[k as u64]);
        for _ in 0..per_subspace {
            let c = nalgebra::DVector::from_vec(unit_ball_sample(&mut r, u.ncols()));
            data.extend((u * c).iter());
        }
    }
    PointCloud::new(dim, data, format!("union of {} subspaces in R^{dim}", bases.len()))
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverMethod {
    /// Minimum cover by exhaustive search over centre subsets.
    Exact,
    /// Farthest-point traversal until every point is within epsilon.
    Greedy,
}

/// An epsilon-cover with centres drawn from the cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverReport {
    pub epsilon: f64,
    pub method: CoverMethod,
    /// Indices into the cloud.
    pub centers: Vec<usize>,
}

impl CoverReport {
    /// Cover size `L_eps`.
    pub fn size(&self) -> usize {
        self.centers.len()
    }

    /// Kolmogorov entropy `H_eps = ln L_eps`.
    pub fn entropy(&self) -> f64 {
        (self.size() as f64).ln()
    }

    /// Checks that every point lies within epsilon of some centre.
    pub fn is_valid_for(&self, cloud: &PointCloud) -> bool {
        let e2 = self.epsilon * self.epsilon;
        cloud
            .points()
            .all(|p| self.centers.iter().any(|&c| dist2(p, cloud.point(c)) <= e2))
    }
}

pub fn epsilon_cover(cloud: &PointCloud, epsilon: f64, method: CoverMethod) -> Result<CoverReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let centers = match method {
        CoverMethod::Exact => exact_cover(cloud, epsilon)?,
        CoverMethod::Greedy => {
            let order = FarthestPoints::traverse(cloud, epsilon);
            order.prefix_for(epsilon).to_vec()
        }
    };
    Ok(CoverReport { epsilon, method, centers })
}

fn exact_cover(cloud: &PointCloud, epsilon: f64) -> Result<Vec<usize>> {
    let n = cloud.len();
    if n > EXACT_COVER_CAP {
        return Err(Error::ExactCoverCap { points: n, cap: EXACT_COVER_CAP });
    }
    let e2 = epsilon * epsilon;
    let masks: Vec<u32> = (0..n)
        .map(|c| (0..n).filter(|&i| dist2(cloud.point(c), cloud.point(i)) <= e2).fold(0u32, |m, i| m | (1 << i)))
        .collect();
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    for k in 1..=n {
        let mut chosen = Vec::with_capacity(k);
        if search_cover(&masks, full, k, 0, 0, &mut chosen) {
            return Ok(chosen);
        }
    }
    unreachable!("every point covers itself, so k = n always succeeds")
}

fn search_cover(masks: &[u32], full: u32, k: usize, start: usize, covered: u32, chosen: &mut Vec<usize>) -> bool {
    if covered == full {
        return true;
    }
    if chosen.len() == k {
        return false;
    }
    // The lowest uncovered point must be covered by one of the remaining picks.
    let first = (!covered).trailing_zeros() as usize;
    for c in start..masks.len() {
        if masks[c] & (1 << first) == 0 {
            continue;
        }
        chosen.push(c);
        if search_cover(masks, full, k, 0, covered | masks[c], chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Farthest-point traversal: centre `k` is the point farthest from centres
/// `0..k` (lowest index on ties), starting from point 0. The covering radius
/// of each prefix is non-increasing, so one traversal answers every epsilon.
#[derive(Debug, Clone)]
pub struct FarthestPoints {
    order: Vec<usize>,
    /// `radii[k]` = covering radius of the first `k + 1` centres.
    radii: Vec<f64>,
}

impl FarthestPoints {
    /// Traverses until the covering radius drops to `stop` or below.
    pub fn traverse(cloud: &PointCloud, stop: f64) -> Self {
        let n = cloud.len();
        let stop2 = stop * stop;
        let mut d2: Vec<f64> = par::map_range(n, |i| dist2(cloud.point(i), cloud.point(0)));
        let mut order = vec![0];
        let mut radii = Vec::new();
        loop {
            let (far, r2) = argmax(&d2);
            radii.push(r2.sqrt());
            if r2 <= stop2 {
                break;
            }
            order.push(far);
            let c = cloud.point(far);
            update_min(&mut d2, cloud, c);
        }
        Self { order, radii }
    }

    /// The smallest prefix of centres that covers at radius `epsilon`.
    pub fn prefix_for(&self, epsilon: f64) -> &[usize] {
        let k = self.radii.iter().position(|&r| r * r <= epsilon * epsilon).unwrap_or(self.radii.len() - 1);
        &self.order[..=k]
    }

    pub fn cover_size(&self, epsilon: f64) -> usize {
        self.prefix_for(epsilon).len()
    }
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
}

#[cfg(feature = "parallel")]
const UPDATE_CHUNK: usize = 4096;

fn update_min(d2: &mut [f64], cloud: &PointCloud, c: &[f64]) {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if d2.len() > UPDATE_CHUNK {
            d2.par_chunks_mut(UPDATE_CHUNK).enumerate().for_each(|(k, chunk)| {
                let base = k * UPDATE_CHUNK;
                for (j, d) in chunk.iter_mut().enumerate() {
                    *d = d.min(dist2(cloud.point(base + j), c));
                }
            });
            return;
        }
    }
    for (i, d) in d2.iter_mut().enumerate() {
        *d = d.min(dist2(cloud.point(i), c));
    }
}

/// Slope of `H_eps` against `-ln eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionEstimate {
    pub slope: f64,
    /// Standard error of the slope from the fit residuals (0 with three exact points).
    pub slope_stderr: f64,
    /// Root-mean-square residual of the fit.
    pub fit_residual: f64,
    pub schedule: Vec<f64>,
    /// `(-ln eps, H_eps)` per schedule entry.
    pub points: Vec<(f64, f64)>,
}

impl DimensionEstimate {
    /// Cover sizes, recovered from the entropies.
    pub fn cover_sizes(&self) -> Vec<usize> {
        self.points.iter().map(|(_, h)| h.exp().round() as usize).collect()
    }

    /// `(-ln eps, H_eps)` rows with a header, for plotting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "neg_log_eps,entropy")?;
        for (x, h) in &self.points {
            writeln!(out, "{x},{h}")?;
        }
        Ok(())
    }
}

/// Ordinary least-squares line through `(x, y)`: slope, slope stderr, rms residual.
pub fn fit_line(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let sse: f64 = points.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let rms = (sse / n).sqrt();
    let stderr = if points.len() > 2 && sxx > 0.0 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, stderr, rms)
}

/// Minimum ratio `max(eps) / min(eps)` accepted by [`fractal_dim`].
pub const MIN_SCHEDULE_SPAN: f64 = 4.0;

fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.len() < 3 {
        return Err(Error::Degenerate(format!("schedule needs at least 3 epsilons, got {}", schedule.len())));
    }
    if schedule.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::Degenerate("epsilons must be positive and finite".into()));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Degenerate("schedule must be strictly decreasing".into()));
    }
    let span = schedule[0] / schedule[schedule.len() - 1];
    if span < MIN_SCHEDULE_SPAN * (1.0 - 1e-12) {
        return Err(Error::Degenerate(format!("schedule spans a factor {span}, need at least {MIN_SCHEDULE_SPAN}")));
    }
    Ok(())
}

/// `steps_per_decade` geometric steps per decade from `eps_max` down over `decades`.
pub fn geometric_schedule(eps_max: f64, steps_per_decade: usize, decades: f64) -> Vec<f64> {
    let steps = (steps_per_decade as f64 * decades).round() as usize;
    (0..=steps).map(|k| eps_max * 10f64.powf(-(k as f64) / steps_per_decade as f64)).collect()
}

/// Default: four steps per decade over one and a half decades.
pub fn default_schedule(eps_max: f64) -> Vec<f64> {
    geometric_schedule(eps_max, 4, 1.5)
}

/// Least-squares slope of greedy-cover entropy against `-ln eps`.
pub fn fractal_dim(cloud: &PointCloud, schedule: &[f64]) -> Result<DimensionEstimate> {
    check_schedule(schedule)?;
    let finest = schedule[schedule.len() - 1];
    let fpt = FarthestPoints::traverse(cloud, finest);
    let points: Vec<(f64, f64)> = schedule.iter().map(|&e| (-e.ln(), (fpt.cover_size(e) as f64).ln())).collect();
    let (slope, slope_stderr, fit_residual) = fit_line(&points);
    Ok(DimensionEstimate { slope: slope.max(0.0), slope_stderr, fit_residual, schedule: schedule.to_vec(), points })
}

/// Pairwise sums, subsampled without replacement to `cap` pairs when needed.
pub fn minkowski_sum(a: &PointCloud, b: &PointCloud, cap: usize, seed: u64) -> Result<PointCloud> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("{}-dimensional and {}-dimensional clouds", a.dim(), b.dim())));
    }
    let total = a.len() * b.len();
    let pairs: Vec<usize> = if total <= cap {
        (0..total).collect()
    } else {
        let mut r = rng::seeded(seed);
        let mut idx = index::sample(&mut r, total, cap).into_vec();
        idx.sort_unstable();
        idx
    };
    let dim = a.dim();
    let mut data = Vec::with_capacity(pairs.len() * dim);
    for p in pairs {
        let (i, j) = (p / b.len(), p % b.len());
        data.extend(a.point(i).iter().zip(b.point(j)).map(|(x, y)| x + y));
    }
    let note = if total > cap { format!(" (subsampled {cap} of {total})") } else { String::new() };
    PointCloud::new(dim, data, format!("{} + {}{note}", a.provenance(), b.provenance()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublingRatio {
    pub ratio: f64,
    /// One-sigma uncertainty from the two slope standard errors.
    pub uncertainty: f64,
    pub base: DimensionEstimate,
    pub dilated: DimensionEstimate,
}

/// `dim(X + X) / dim(X)` from two slope estimates on the same schedule.
pub fn dilation_doubling_ratio(cloud: &PointCloud, schedule: &[f64], cap: usize, seed: u64) -> Result<DoublingRatio> {
    let base = fractal_dim(cloud, schedule)?;
    if base.slope < 0.1 {
        return Err(Error::Degenerate(format!("base dimension {} is too small for a ratio", base.slope)));
    }
    let sum = minkowski_sum(cloud, cloud, cap, seed)?;
    let dilated = fractal_dim(&sum, schedule)?;
    let ratio = dilated.slope / base.slope;
    let rel = ((base.slope_stderr / base.slope).powi(2)
        + if dilated.slope > 0.0 { (dilated.slope_stderr / dilated.slope).powi(2) } else { 0.0 })
    .sqrt();
    Ok(DoublingRatio { ratio, uncertainty: ratio * rel, base, dilated })
}

/// Closed-form sparsity fraction `Omega' / Omega`.
pub fn sparsity_fraction(omega: f64, omega_prime: f64) -> Result<f64> {
    if !(omega > 0.0 && omega_prime > 0.0) {
        return Err(Error::InvalidArgument("band limits must be positive".into()));
    }
    if omega_prime > omega {
        return Err(Error::InvalidArgument(format!("omega' = {omega_prime} exceeds omega = {omega}")));
    }
    Ok(omega_prime / omega)
}

/// Empirical counterpart: estimated dimension per ambient dimension.
pub fn empirical_sparsity(cloud: &PointCloud, schedule: &[f64]) -> Result<(f64, DimensionEstimate)> {
    let est = fractal_dim(cloud, schedule)?;
    Ok((est.slope / cloud.dim() as f64, est))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContinuousPart {
    Uniform { lo: f64, hi: f64 },
}

/// `(1 - gamma) delta_0 + gamma p'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureSource {
    pub gamma: f64,
    pub continuous: ContinuousPart,
    pub seed: u64,
}

impl MixtureSource {
    pub fn new(gamma: f64, seed: u64) -> Result<Self> {
        Self::with_continuous(gamma, ContinuousPart::Uniform { lo: 0.0, hi: 1.0 }, seed)
    }

    pub fn with_continuous(gamma: f64, continuous: ContinuousPart, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("mixture weight must lie in [0, 1], got {gamma}")));
        }
        let ContinuousPart::Uniform { lo, hi } = continuous;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidArgument(format!("bad uniform support [{lo}, {hi}]")));
        }
        Ok(Self { gamma, continuous, seed })
    }

    pub fn sample(&self, count: usize) -> Vec<f64> {
        let mut r = rng::seeded(self.seed);
        let ContinuousPart::Uniform { lo, hi } = self.continuous;
        (0..count)
            .map(|_| {
                if r.random::<f64>() < self.gamma {
                    r.random_range(lo..hi)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Minimum mean number of samples per occupied bin for an epsilon to be used.
pub const MIN_BIN_OCCUPANCY: f64 = 5.0;
/// Minimum sample count accepted by [`renyi_dim`].
pub const MIN_RENYI_SAMPLES: usize = 10_000;

/// Plug-in entropy of bin counts with the Miller-Madow correction, in nats.
pub fn miller_madow_entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let occupied = counts.iter().filter(|&&c| c > 0).count();
    let plug_in: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            -p * p.ln()
        })
        .sum();
    plug_in + (occupied as f64 - 1.0) / (2.0 * nf)
}

fn bin_counts(samples: &[f64], epsilon: f64) -> Vec<usize> {
    let mut bins: HashMap<i64, usize> = HashMap::new();
    for &x in samples {
        *bins.entry((x / epsilon).floor() as i64).or_insert(0) += 1;
    }
    let mut counts: Vec<(i64, usize)> = bins.into_iter().collect();
    counts.sort_unstable();
    counts.into_iter().map(|(_, c)| c).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenyiEstimate {
    pub gamma_hat: f64,
    /// Epsilons actually used after the occupancy check.
    pub schedule: Vec<f64>,
    /// `(-ln eps, H(X^eps))` per used epsilon.
    pub points: Vec<(f64, f64)>,
    pub fit_residual: f64,
    /// True when fine epsilons were dropped for low bin occupancy.
    pub truncated: bool,
}

/// Slope of the quantized entropy against `-ln eps`.
pub fn renyi_dim(source: &MixtureSource, schedule: &[f64], samples: usize) -> Result<RenyiEstimate> {
    if samples < MIN_RENYI_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_RENYI_SAMPLES} samples, got {samples}")));
    }
    if schedule.len() < 2 || schedule.windows(2).any(|w| w[1] >= w[0]) || schedule.iter().any(|&e| e <= 0.0) {
        return Err(Error::Degenerate("schedule must hold at least two strictly decreasing positive epsilons".into()));
    }
    let xs = source.sample(samples);
    let entropies = par::map_slice(schedule, |&eps| {
        let counts = bin_counts(&xs, eps);
        (samples as f64 / counts.len() as f64, miller_madow_entropy(&counts))
    });
    let mut used = Vec::new();
    let mut points = Vec::new();
    let mut truncated = false;
    for (&eps, &(occupancy, h)) in schedule.iter().zip(&entropies) {
        if occupancy < MIN_BIN_OCCUPANCY {
            warn!("epsilon {eps} leaves {occupancy:.2} samples per bin; dropping it and every finer epsilon");
            truncated = true;
            break;
        }
        used.push(eps);
        points.push((-eps.ln(), h));
    }
    if points.len() < 2 {
        return Err(Error::Degenerate("fewer than two epsilons survive the occupancy check".into()));
    }
    let (slope, _, fit_residual) = fit_line(&points);
    Ok(RenyiEstimate { gamma_hat: slope, schedule: used, points, fit_residual, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_cloud(n: usize) -> PointCloud {
        PointCloud::new(1, (0..n).map(|i| i as f64 / (n - 1) as f64).collect(), "grid").unwrap()
    }

    /// Independent oracle: smallest k such that some k-subset of centres covers.
    fn brute_force_cover(cloud: &PointCloud, eps: f64) -> usize {
        let n = cloud.len();
        (1..=n)
            .find(|&k| {
                (0u32..(1 << n)).filter(|m| m.count_ones() as usize == k).any(|m| {
                    (0..n).all(|i| {
                        (0..n).any(|c| m & (1 << c) != 0 && (cloud.point(i)[0] - cloud.point(c)[0]).abs() <= eps)
                    })
                })
            })
            .unwrap()
    }

    #[test]
    fn single_point_and_separated_pair() {
        let one = PointCloud::new(3, vec![1.0, 2.0, 3.0], "pt").unwrap();
        assert_eq!(epsilon_cover(&one, 0.5, CoverMethod::Exact).unwrap().size(), 1);
        assert_eq!(epsilon_cover(&one, 0.5, CoverMethod::Greedy).unwrap().size(), 1);
        let two = PointCloud::new(1, vec![0.0, 0.3], "pair").unwrap();
        assert_eq!(epsilon_cover(&two, 0.1, CoverMethod::Exact).unwrap().size(), 2);
        assert_eq!(epsilon_cover(&two, 0.1, CoverMethod::Greedy).unwrap().size(), 2);
    }

    #[test]
    fn exact_cover_of_sixteen_grid_points_matches_brute_force() {
        let cloud = line_cloud(16);
        let oracle = brute_force_cover(&cloud, 0.1);
        let exact = epsilon_cover(&cloud, 0.1, CoverMethod::Exact).unwrap();
        assert_eq!(oracle, 6);
        assert_eq!(exact.size(), oracle);
        assert!(exact.is_valid_for(&cloud));
        let greedy = epsilon_cover(&cloud, 0.1, CoverMethod::Greedy).unwrap();
        assert!(greedy.size() >= exact.size());
        assert!(greedy.is_valid_for(&cloud));
    }

    #[test]
    fn exact_cover_rejects_large_clouds() {
        let cloud = line_cloud(21);
        assert!(matches!(
            epsilon_cover(&cloud, 0.1, CoverMethod::Exact),
            Err(Error::ExactCoverCap { points: 21, cap: 20 })
        ));
        assert!(epsilon_cover(&cloud, 0.0, CoverMethod::Greedy).is_err());
    }

    #[test]
    fn single_point_has_dimension_zero() {
        let one = PointCloud::new(2, vec![0.5, 0.5], "pt").unwrap();
        let est = fractal_dim(&one, &[0.2, 0.1, 0.05, 0.025]).unwrap();
        assert_eq!(est.slope, 0.0);
        assert!(dilation_doubling_ratio(&one, &[0.2, 0.1, 0.05, 0.025], 100, 0).is_err());
    }

    #[test]
    fn degenerate_schedules_are_rejected() {
        let c = line_cloud(10);
        assert!(fractal_dim(&c, &[0.2, 0.1]).is_err());
        assert!(fractal_dim(&c, &[0.2, 0.15, 0.1]).is_err());
        assert!(fractal_dim(&c, &[0.1, 0.2, 0.01]).is_err());
    }

    #[test]
    fn minkowski_identities() {
        let a = PointCloud::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]], "a").unwrap();
        let zero = PointCloud::from_rows(&[vec![0.0, 0.0]], "0").unwrap();
        assert_eq!(minkowski_sum(&a, &zero, 100, 0).unwrap().points().collect::<Vec<_>>(), a.points().collect::<Vec<_>>());
        let b = PointCloud::from_rows(&[vec![0.5, 0.5]], "b").unwrap();
        let single = minkowski_sum(&PointCloud::from_rows(&[vec![1.0, 2.0]], "a").unwrap(), &b, 100, 0).unwrap();
        assert_eq!(single.point(0), &[1.5, 2.5]);
        let c3 = PointCloud::from_rows(&[vec![0.0, 0.0, 0.0]], "c").unwrap();
        assert!(minkowski_sum(&a, &c3, 10, 0).is_err());
        let sub = minkowski_sum(&a, &a, 3, 9).unwrap();
        assert_eq!(sub.len(), 3);
    }

    #[test]
    fn sparsity_fraction_closed_form() {
        use std::f64::consts::PI;
        assert_eq!(sparsity_fraction(PI, PI / 8.0).unwrap(), 0.125);
        assert_eq!(sparsity_fraction(PI, PI).unwrap(), 1.0);
        assert!(sparsity_fraction(PI, 4.0).is_err());
    }

    #[test]
    fn miller_madow_on_known_counts() {
        // two equiprobable bins: ln 2 plus (2 - 1) / (2 n)
        let h = miller_madow_entropy(&[50, 50]);
        assert!((h - (2f64.ln() + 1.0 / 200.0)).abs() < 1e-15);
        assert_eq!(miller_madow_entropy(&[10]), 0.0);
    }

    #[test]
    fn pure_atom_has_zero_information_dimension() {
        let src = MixtureSource::new(0.0, 1).unwrap();
        let est = renyi_dim(&src, &[0.1, 0.01, 0.001], 10_000).unwrap();
        assert!(est.gamma_hat.abs() < 0.02);
        assert!(renyi_dim(&src, &[0.1, 0.01], 100).is_err());
        assert!(MixtureSource::new(1.5, 0).is_err());
    }

    #[test]
    fn occupancy_check_truncates_fine_epsilons() {
        let src = MixtureSource::new(1.0, 3).unwrap();
        let est = renyi_dim(&src, &[1e-1, 1e-2, 1e-3, 1e-5], 10_000).unwrap();
        assert!(est.truncated);
        assert_eq!(est.schedule, vec![1e-1, 1e-2, 1e-3]);
    }

    #[test]
    fn cloud_csv_round_trip() {
        let c = PointCloud::from_rows(&[vec![0.25, -1.0], vec![3.0, 1e-7]], "t").unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"x0,x1\n"));
        let back = PointCloud::read_csv(&buf[..], "t").unwrap();
        assert_eq!(back, c);
    }
}
