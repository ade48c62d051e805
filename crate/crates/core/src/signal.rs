//! Quantized band allocations and multi-band signals in prolate coordinates.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use log::warn;

use crate::error::{Error, Result};
use crate::pswf::{ceil_count, solve_concentration, BandSet, ProlateBasis, TimeGrid};

/// Default ceiling on the number of allocations an enumeration may produce.
pub const DEFAULT_ENUMERATION_CAP: usize = 200_000;

/// `N = ceil((1 + nu) Omega T / pi)`: canonical coefficients kept per signal.
pub fn nyquist_dimension(omega: f64, horizon: f64, nu: f64) -> usize {
    ceil_count((1.0 + nu) * omega * horizon / PI)
}

/// `S = ceil((1 + nu) Omega' T / pi)`: allocation modes kept per signal.
pub fn sparsity_dimension(omega_prime: f64, horizon: f64, nu: f64) -> usize {
    ceil_count((1.0 + nu) * omega_prime * horizon / PI)
}

/// The frequency lattice `J = {-Omega, -Omega + delta, ..., Omega}`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedGrid {
    omega: f64,
    delta: f64,
    points: Vec<f64>,
}

impl QuantizedGrid {
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of cells `2 Omega / delta`.
    pub fn cells(&self) -> usize {
        self.points.len() - 1
    }

    fn cell(&self, i: usize) -> (f64, f64) {
        (self.points[i], self.points[i + 1])
    }

    fn contains(&self, x: f64) -> bool {
        let tol = 1e-9 * self.delta;
        self.points.iter().any(|p| (p - x).abs() <= tol)
    }
}

fn lattice(omega: f64, delta: f64, cells: usize) -> QuantizedGrid {
    let points = (0..=cells)
        .map(|i| {
            let j = cells - i;
            if i <= j {
                -omega + i as f64 * delta
            } else {
                omega - j as f64 * delta
            }
        })
        .collect();
    QuantizedGrid { omega, delta, points }
}

fn check_grid_args(omega: f64, delta: f64) -> Result<f64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    if delta > 2.0 * omega {
        return Err(Error::InvalidArgument(format!("delta {delta} exceeds the full band 2*omega")));
    }
    Ok(2.0 * omega / delta)
}

/// Builds `J` for a `delta` that divides `2 omega` exactly.
pub fn build_grid(omega: f64, delta: f64) -> Result<QuantizedGrid> {
    let ratio = check_grid_args(omega, delta)?;
    let cells = ratio.round();
    if (ratio - cells).abs() > 1e-9 * ratio {
        return Err(Error::InvalidArgument(format!(
            "delta {delta} does not divide 2*omega = {}",
            2.0 * omega
        )));
    }
    Ok(lattice(omega, delta, cells as usize))
}

/// Like [`build_grid`], but snaps `omega` to the nearest multiple of `delta / 2`
/// (at least one cell) instead of failing. Logs a warning when it does.
pub fn build_grid_rounded(omega: f64, delta: f64) -> Result<QuantizedGrid> {
    let ratio = check_grid_args(omega, delta)?;
    let cells = ratio.round().max(1.0);
    if (ratio - cells).abs() > 1e-9 * ratio {
        let snapped = 0.5 * cells * delta;
        warn!("delta {delta} does not divide 2*omega; omega rounded from {omega} to {snapped}");
        return Ok(lattice(snapped, delta, cells as usize));
    }
    Ok(lattice(omega, delta, cells as usize))
}

/// A symmetric band allocation with endpoints on `J` and measure within budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    band: BandSet,
    budget: f64,
}

impl Allocation {
    /// Validates `band` against the lattice and the measure budget `2 Omega'`.
    pub fn new(band: BandSet, budget: f64, grid: &QuantizedGrid) -> Result<Self> {
        if !band.is_symmetric() {
            return Err(Error::AsymmetricBand);
        }
        if band.measure() > budget * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::InvalidBand(format!(
                "measure {} exceeds budget {budget}",
                band.measure()
            )));
        }
        if let Some(x) = band
            .intervals()
            .iter()
            .flat_map(|&(lo, hi)| [lo, hi])
            .find(|&x| !grid.contains(x))
        {
            return Err(Error::InvalidBand(format!("edge {x} is not on the quantization lattice")));
        }
        Ok(Self { band, budget })
    }

    pub fn band(&self) -> &BandSet {
        &self.band
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn measure(&self) -> f64 {
        self.band.measure()
    }

    /// Number of connected sub-bands that reach positive frequencies.
    pub fn positive_subbands(&self) -> usize {
        self.band.positive_part().len()
    }

    /// `lo,hi;lo,hi;...` over all intervals (both signs), rad/s.
    pub fn to_line(&self) -> String {
        let mut s = String::new();
        for (i, (lo, hi)) in self.band.intervals().iter().enumerate() {
            if i > 0 {
                s.push(';');
            }
            write!(s, "{lo},{hi}").unwrap();
        }
        s
    }
}

/// Orders allocations by their positive-frequency intervals.
pub fn lexicographic_cmp(a: &Allocation, b: &Allocation) -> std::cmp::Ordering {
    lexicographic_cmp_bands(&a.band, &b.band)
}

pub fn lexicographic_cmp_bands(a: &BandSet, b: &BandSet) -> std::cmp::Ordering {
    let (ka, kb) = (a.positive_part(), b.positive_part());
    for (x, y) in ka.iter().zip(kb.iter()) {
        let c = x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1));
        if c.is_ne() {
            return c;
        }
    }
    ka.len().cmp(&kb.len())
}

/// Writes one allocation per line.
pub fn write_allocations(allocs: &[Allocation]) -> String {
    let mut out = String::new();
    for a in allocs {
        out.push_str(&a.to_line());
        out.push('\n');
    }
    out
}

/// Parses the line format produced by [`write_allocations`]. Blank lines are
/// empty allocations.
pub fn parse_allocations(text: &str, grid: &QuantizedGrid, budget: f64) -> Result<Vec<Allocation>> {
    text.lines()
        .map(|line| {
            let line = line.trim();
            let mut intervals = Vec::new();
            if !line.is_empty() {
                for pair in line.split(';') {
                    let (lo, hi) = pair
                        .split_once(',')
                        .ok_or_else(|| Error::Parse(format!("expected `lo,hi`, got `{pair}`")))?;
                    let parse = |s: &str| {
                        s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")))
                    };
                    intervals.push((parse(lo)?, parse(hi)?));
                }
            }
            Allocation::new(BandSet::new(grid.omega(), intervals)?, budget, grid)
        })
        .collect()
}

/// Mirror orbits of cells: `(i, mirror)` with `i <= mirror`, from the centre outwards.
fn cell_orbits(cells: usize) -> Vec<(usize, usize)> {
    let mut orbits: Vec<(usize, usize)> = (0..cells).map(|i| (i, cells - 1 - i)).filter(|(i, m)| i <= m).collect();
    orbits.reverse();
    orbits
}

fn band_from_cells(grid: &QuantizedGrid, chosen: &[usize]) -> Result<BandSet> {
    BandSet::new(grid.omega(), chosen.iter().map(|&c| grid.cell(c)).collect())
}

/// Enumerates every symmetric allocation on `grid` with measure at most
/// `2 omega_prime` and at most `max_subbands` positive-frequency sub-bands.
///
/// The empty allocation is returned only when nothing else fits.
pub fn enumerate_allocations(grid: &QuantizedGrid, omega_prime: f64, max_subbands: usize) -> Result<Vec<Allocation>> {
    enumerate_allocations_capped(grid, omega_prime, max_subbands, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_allocations_capped(
    grid: &QuantizedGrid,
    omega_prime: f64,
    max_subbands: usize,
    cap: usize,
) -> Result<Vec<Allocation>> {
    if max_subbands == 0 {
        return Err(Error::InvalidArgument("max_subbands must be at least 1".into()));
    }
    if omega_prime < 0.0 {
        return Err(Error::InvalidArgument(format!("omega_prime must be non-negative, got {omega_prime}")));
    }
    let budget = 2.0 * omega_prime;
    let max_cells = ((budget / grid.delta()) * (1.0 + 1e-12) + 1e-12).floor() as usize;
    let orbits = cell_orbits(grid.cells());

    // Upper bound: orbit subsets whose cell count fits, ignoring the sub-band cap.
    let estimate = subset_count_bound(&orbits, max_cells);
    if estimate > cap as u128 {
        return Err(Error::EnumerationCap { estimate, cap });
    }

    let mut found = Vec::new();
    let mut chosen = Vec::new();
    collect_subsets(&orbits, 0, max_cells, &mut chosen, &mut |cells: &[usize]| {
        if cells.is_empty() {
            return Ok(());
        }
        let band = band_from_cells(grid, cells)?;
        let alloc = Allocation { band, budget };
        if alloc.positive_subbands() <= max_subbands {
            found.push(alloc);
        }
        Ok(())
    })?;
    if found.is_empty() {
        found.push(Allocation { band: BandSet::empty(grid.omega())?, budget });
    }
    found.sort_by(lexicographic_cmp);
    Ok(found)
}

fn subset_count_bound(orbits: &[(usize, usize)], max_cells: usize) -> u128 {
    // dp[c] = number of orbit subsets using exactly c cells
    let mut dp = vec![0u128; max_cells + 1];
    dp[0] = 1;
    for &(i, m) in orbits {
        let size = if i == m { 1 } else { 2 };
        for c in (size..=max_cells).rev() {
            dp[c] = dp[c].saturating_add(dp[c - size]);
        }
    }
    dp.iter().fold(0u128, |a, &b| a.saturating_add(b))
}

fn collect_subsets<F>(
    orbits: &[(usize, usize)],
    start: usize,
    room: usize,
    chosen: &mut Vec<usize>,
    visit: &mut F,
) -> Result<()>
where
    F: FnMut(&[usize]) -> Result<()>,
{
    visit(chosen)?;
    for k in start..orbits.len() {
        let (i, m) = orbits[k];
        let size = if i == m { 1 } else { 2 };
        if size > room {
            continue;
        }
        chosen.push(i);
        if i != m {
            chosen.push(m);
        }
        collect_subsets(orbits, k + 1, room - size, chosen, visit)?;
        chosen.truncate(chosen.len() - size);
    }
    Ok(())
}

/// Eigenbasis of an allocation with `modes` columns on `grid`.
pub fn allocation_basis(alloc: &Allocation, grid: &TimeGrid, modes: usize) -> Result<ProlateBasis> {
    solve_concentration(alloc.band(), grid, modes)
}

/// `f(t_i) = sum_n alpha_n psi_n^Q(t_i)`.
pub fn synthesize(basis: &ProlateBasis, coeffs: &[f64]) -> Result<Vec<f64>> {
    if coeffs.len() != basis.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for a {}-mode basis",
            coeffs.len(),
            basis.len()
        )));
    }
    let psi = basis.eigvecs();
    Ok((0..psi.nrows())
        .map(|i| coeffs.iter().enumerate().map(|(n, a)| a * psi[(i, n)]).sum())
        .collect())
}

/// A multi-band signal: an allocation, its basis and the coefficients on it.
#[derive(Debug, Clone)]
pub struct MultibandSignal {
    allocation: Allocation,
    coeffs: Vec<f64>,
    basis: Arc<ProlateBasis>,
}

impl MultibandSignal {
    pub fn new(allocation: Allocation, coeffs: Vec<f64>, basis: Arc<ProlateBasis>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a {}-mode basis",
                coeffs.len(),
                basis.len()
            )));
        }
        Ok(Self { allocation, coeffs, basis })
    }

    pub fn allocation(&self) -> &Allocation {
        &self.allocation
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis(&self) -> &ProlateBasis {
        &self.basis
    }

    /// Coefficient energy, which is the signal energy on the whole line.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum()
    }

    pub fn in_unit_ball(&self) -> bool {
        self.energy() <= 1.0 + 1e-12
    }

    pub fn samples(&self) -> Vec<f64> {
        synthesize(&self.basis, &self.coeffs).expect("length checked at construction")
    }
}

/// Scaled canonical coefficients `<f, psi_k>_T`, `k = 1..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PswfCoefficients(Vec<f64>);

impl PswfCoefficients {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Projects grid samples onto the canonical basis with the grid quadrature.
pub fn analyze(samples: &[f64], canonical: &ProlateBasis) -> Result<PswfCoefficients> {
    let grid = canonical.grid();
    if samples.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let w = grid.weights();
    let psi = canonical.eigvecs();
    let x = (0..psi.ncols())
        .map(|k| (0..psi.nrows()).map(|i| w[i] * samples[i] * psi[(i, k)]).sum())
        .collect();
    PswfCoefficients::new(x)
}

/// `sum_k (x_k / lambda_k) psi_k` on the grid; modes with `lambda_k == 0` are skipped.
pub fn reconstruct(coeffs: &PswfCoefficients, canonical: &ProlateBasis) -> Result<Vec<f64>> {
    if coeffs.len() > canonical.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for a {}-mode basis",
            coeffs.len(),
            canonical.len()
        )));
    }
    let psi = canonical.eigvecs();
    let lambda = canonical.eigenvalues();
    let mut out = vec![0.0; psi.nrows()];
    for (k, &x) in coeffs.as_slice().iter().enumerate() {
        if lambda[k] > 0.0 {
            let c = x / lambda[k];
            for (i, o) in out.iter_mut().enumerate() {
                *o += c * psi[(i, k)];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_point_counts() {
        assert_eq!(build_grid(PI, PI).unwrap().points(), &[-PI, 0.0, PI]);
        assert_eq!(build_grid(PI, PI / 8.0).unwrap().points().len(), 17);
        assert!(build_grid(PI, 3.0).is_err());
        assert!(build_grid(PI, 7.0).is_err());
        let g = build_grid_rounded(PI, 3.0).unwrap();
        assert_eq!(g.cells(), 2);
        assert_eq!(g.omega(), 3.0);
    }

    #[test]
    fn dimensions_at_desk_scale() {
        assert_eq!(nyquist_dimension(PI, 32.0, 0.25), 40);
        assert_eq!(sparsity_dimension(PI / 8.0, 32.0, 0.25), 5);
    }

    #[test]
    fn zero_budget_gives_only_the_empty_allocation() {
        let g = build_grid(PI, PI / 4.0).unwrap();
        let a = enumerate_allocations(&g, 0.0, 2).unwrap();
        assert_eq!(a.len(), 1);
        assert!(a[0].band().is_empty());
    }

    #[test]
    fn zero_subbands_is_an_error() {
        let g = build_grid(PI, PI / 4.0).unwrap();
        assert!(enumerate_allocations(&g, PI / 4.0, 0).is_err());
    }

    #[test]
    fn coarse_lattice_single_band_listing() {
        // J = {-pi, -pi/2, 0, pi/2, pi}; a budget of pi admits exactly one symmetric cell pair.
        let g = build_grid(PI, PI / 2.0).unwrap();
        let a = enumerate_allocations(&g, PI / 2.0, 1).unwrap();
        let lines: Vec<String> = a.iter().map(|x| x.band().positive_part().iter().map(|(l, h)| format!("{l:.4},{h:.4}")).collect()).collect();
        assert_eq!(lines, vec!["0.0000,1.5708", "1.5708,3.1416"]);
    }

    #[test]
    fn enumeration_guard_trips() {
        let g = build_grid(PI, PI / 64.0).unwrap();
        assert!(matches!(
            enumerate_allocations_capped(&g, PI / 2.0, 8, 1000),
            Err(Error::EnumerationCap { .. })
        ));
    }

    #[test]
    fn allocation_rejects_off_lattice_edges() {
        let g = build_grid(PI, PI / 4.0).unwrap();
        let band = BandSet::symmetric(PI, &[(0.1, PI / 4.0)]).unwrap();
        assert!(Allocation::new(band, PI, &g).is_err());
        let band = BandSet::symmetric(PI, &[(0.0, PI / 2.0)]).unwrap();
        assert!(Allocation::new(band, PI / 2.0, &g).is_err());
    }

    #[test]
    fn line_format_round_trips() {
        let g = build_grid(PI, PI / 8.0).unwrap();
        let allocs = enumerate_allocations(&g, PI / 4.0, 2).unwrap();
        let text = write_allocations(&allocs);
        assert_eq!(text.lines().count(), allocs.len());
        let back = parse_allocations(&text, &g, PI / 2.0).unwrap();
        assert_eq!(back.len(), allocs.len());
        for (a, b) in allocs.iter().zip(&back) {
            assert_eq!(a.band(), b.band());
        }
        assert!(parse_allocations("0.1;0.2\n", &g, PI).is_err());
    }

    #[test]
    fn synthesis_checks_length_and_is_linear_in_zero() {
        let grid = TimeGrid::oversampled(PI, 4.0).unwrap();
        let band = BandSet::symmetric(PI, &[(0.0, PI / 2.0)]).unwrap();
        let basis = solve_concentration(&band, &grid, 3).unwrap();
        assert!(synthesize(&basis, &[1.0]).is_err());
        assert!(synthesize(&basis, &[0.0; 3]).unwrap().iter().all(|&v| v == 0.0));
        let f = synthesize(&basis, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(f, basis.mode(0));
    }

    #[test]
    fn analyze_rejects_grid_mismatch() {
        let grid = TimeGrid::oversampled(PI, 4.0).unwrap();
        let basis = solve_concentration(&BandSet::full(PI).unwrap(), &grid, 4).unwrap();
        assert!(matches!(analyze(&[0.0; 3], &basis), Err(Error::GridMismatch)));
        let zero = analyze(&vec![0.0; grid.len()], &basis).unwrap();
        assert!(zero.as_slice().iter().all(|&v| v == 0.0));
    }
}
