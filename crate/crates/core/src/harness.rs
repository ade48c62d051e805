//! Experiment configuration and the three reproducible runs: recovery phase
//! transition, eigenvalue staircases, and the dimension suite.
//!
//! Every run returns rows plus a list of [`Verdict`]s. CSV output uses a
//! comma separator, `.` decimals, LF endings and a header row; floats are
//! printed in shortest round-trip form so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;

use crate::dimension::{self, MixtureSource, PointCloud};
use crate::error::{Error, Result};
use crate::linalg::orthonormal_columns;
use crate::par;
use crate::pswf::{self, BandSet, ProlateBasis, TimeGrid};
use crate::recovery::{self, SensingKind};
use crate::rng;
use crate::sensing::{self, CrossGram, NoiseModel};
use crate::signal::{self, Allocation};

/// Flat `key = value` configuration. Scalars accept `pi` expressions such as
/// `pi/8` or `3*pi/4`; lists are comma separated.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub omega: f64,
    pub omega_prime: f64,
    pub horizon: f64,
    pub nu: f64,
    pub delta: f64,
    /// Time-grid size; 0 picks the oversampling rule.
    pub grid_points: usize,
    pub max_subbands: usize,
    pub seed: u64,
    pub m_sweep: Vec<usize>,
    pub noise_sigma: f64,
    pub trials: usize,
    pub probes_per_pair: usize,
    pub output: String,
    /// Cover schedule for the point-cloud estimates.
    pub epsilons: Vec<f64>,
    pub cloud_points: usize,
    pub minkowski_cap: usize,
    pub gammas: Vec<f64>,
    pub renyi_samples: usize,
    /// Coarsest quantization width; the schedule runs 1.5 decades below it.
    pub renyi_eps_max: f64,
    pub sparsity_horizon: f64,
    pub sparsity_omega_prime: f64,
    pub sparsity_delta: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        use std::f64::consts::PI;
        Self {
            omega: PI,
            omega_prime: PI / 8.0,
            horizon: 32.0,
            nu: 0.25,
            delta: PI / 8.0,
            grid_points: 0,
            max_subbands: 4,
            seed: 1,
            m_sweep: (4..=16).collect(),
            noise_sigma: 0.01,
            trials: 200,
            probes_per_pair: 8,
            output: "out".into(),
            epsilons: vec![0.2, 0.1, 0.05, 0.025],
            cloud_points: 10_000,
            minkowski_cap: 20_000,
            gammas: vec![0.0, 0.3, 0.5, 1.0],
            renyi_samples: 100_000,
            renyi_eps_max: 0.01,
            sparsity_horizon: 6.4,
            sparsity_omega_prime: PI / 4.0,
            sparsity_delta: PI / 4.0,
        }
    }
}

const KEYS: &[&str] = &[
    "omega",
    "omega_prime",
    "horizon",
    "nu",
    "delta",
    "grid_points",
    "max_subbands",
    "seed",
    "m_sweep",
    "noise_sigma",
    "trials",
    "probes_per_pair",
    "output",
    "epsilons",
    "cloud_points",
    "minkowski_cap",
    "gammas",
    "renyi_samples",
    "renyi_eps_max",
    "sparsity_horizon",
    "sparsity_omega_prime",
    "sparsity_delta",
];

/// Parses a float or a product/quotient of floats and `pi`.
pub fn parse_scalar(text: &str) -> Result<f64> {
    let text = text.trim();
    let bad = || Error::Config(format!("cannot read {text:?} as a number"));
    let mut value = 1.0;
    let mut op = '*';
    let mut rest = text;
    loop {
        let end = rest.find(['*', '/']).unwrap_or(rest.len());
        let token = rest[..end].trim();
        let factor = match token {
            "pi" | "PI" | "π" => std::f64::consts::PI,
            t => t.parse::<f64>().map_err(|_| bad())?,
        };
        value = if op == '*' { value * factor } else { value / factor };
        if end == rest.len() {
            break;
        }
        op = rest[end..].chars().next().ok_or_else(bad)?;
        rest = &rest[end + 1..];
    }
    if !value.is_finite() {
        return Err(bad());
    }
    Ok(value)
}

fn parse_usize(key: &str, text: &str) -> Result<usize> {
    text.trim().parse().map_err(|_| Error::Config(format!("{key}: {text:?} is not a non-negative integer")))
}

fn parse_list<T>(text: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(f).collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Defaults overridden by the `key = value` lines of `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "omega" => self.omega = parse_scalar(value)?,
            "omega_prime" => self.omega_prime = parse_scalar(value)?,
            "horizon" => self.horizon = parse_scalar(value)?,
            "nu" => self.nu = parse_scalar(value)?,
            "delta" => self.delta = parse_scalar(value)?,
            "grid_points" => self.grid_points = parse_usize(key, value)?,
            "max_subbands" => self.max_subbands = parse_usize(key, value)?,
            "seed" => {
                self.seed = value.parse().map_err(|_| Error::Config(format!("seed: {value:?} is not a u64")))?
            }
            "m_sweep" => self.m_sweep = parse_list(value, |s| parse_usize(key, s))?,
            "noise_sigma" => self.noise_sigma = parse_scalar(value)?,
            "trials" => self.trials = parse_usize(key, value)?,
            "probes_per_pair" => self.probes_per_pair = parse_usize(key, value)?,
            "output" => self.output = value.to_string(),
            "epsilons" => self.epsilons = parse_list(value, parse_scalar)?,
            "cloud_points" => self.cloud_points = parse_usize(key, value)?,
            "minkowski_cap" => self.minkowski_cap = parse_usize(key, value)?,
            "gammas" => self.gammas = parse_list(value, parse_scalar)?,
            "renyi_samples" => self.renyi_samples = parse_usize(key, value)?,
            "renyi_eps_max" => self.renyi_eps_max = parse_scalar(value)?,
            "sparsity_horizon" => self.sparsity_horizon = parse_scalar(value)?,
            "sparsity_omega_prime" => self.sparsity_omega_prime = parse_scalar(value)?,
            "sparsity_delta" => self.sparsity_delta = parse_scalar(value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}; known keys: {}", KEYS.join(", ")))),
        }
        Ok(())
    }

    /// Every key with its current value, one `key = value` line each.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("omega", self.omega.to_string());
        line("omega_prime", self.omega_prime.to_string());
        line("horizon", self.horizon.to_string());
        line("nu", self.nu.to_string());
        line("delta", self.delta.to_string());
        line("grid_points", self.grid_points.to_string());
        line("max_subbands", self.max_subbands.to_string());
        line("seed", self.seed.to_string());
        line("m_sweep", join(&self.m_sweep));
        line("noise_sigma", self.noise_sigma.to_string());
        line("trials", self.trials.to_string());
        line("probes_per_pair", self.probes_per_pair.to_string());
        line("output", self.output.clone());
        line("epsilons", join(&self.epsilons));
        line("cloud_points", self.cloud_points.to_string());
        line("minkowski_cap", self.minkowski_cap.to_string());
        line("gammas", join(&self.gammas));
        line("renyi_samples", self.renyi_samples.to_string());
        line("renyi_eps_max", self.renyi_eps_max.to_string());
        line("sparsity_horizon", self.sparsity_horizon.to_string());
        line("sparsity_omega_prime", self.sparsity_omega_prime.to_string());
        line("sparsity_delta", self.sparsity_delta.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        check_band_setup(self.omega, self.omega_prime, self.delta, "")?;
        check_band_setup(self.omega, self.sparsity_omega_prime, self.sparsity_delta, "sparsity_")?;
        if self.nu.is_nan() || self.nu <= 0.0 {
            return err(format!("nu must be positive, got {}", self.nu));
        }
        if !(self.horizon > 0.0 && self.sparsity_horizon > 0.0) {
            return err("horizons must be positive".into());
        }
        if self.m_sweep.is_empty() || self.m_sweep.contains(&0) {
            return err("m_sweep must list positive row counts".into());
        }
        if self.trials == 0 {
            return err("trials must be positive".into());
        }
        if self.max_subbands == 0 {
            return err("max_subbands must be positive".into());
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return err(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        if self.epsilons.len() < 3
            || self.epsilons.iter().any(|&e| e.is_nan() || e <= 0.0)
            || self.epsilons.windows(2).any(|w| w[1] >= w[0])
        {
            return err("epsilons must hold at least three strictly decreasing positive values".into());
        }
        if self.gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return err("gammas must lie in [0, 1]".into());
        }
        if self.renyi_samples < dimension::MIN_RENYI_SAMPLES {
            return err(format!("renyi_samples must be at least {}", dimension::MIN_RENYI_SAMPLES));
        }
        if self.renyi_eps_max.is_nan() || self.renyi_eps_max <= 0.0 {
            return err("renyi_eps_max must be positive".into());
        }
        if self.cloud_points < 4 || self.minkowski_cap == 0 {
            return err("cloud_points must be at least 4 and minkowski_cap positive".into());
        }
        Ok(())
    }

    pub fn nyquist_dimension(&self) -> usize {
        signal::nyquist_dimension(self.omega, self.horizon, self.nu)
    }

    pub fn sparsity_dimension(&self) -> usize {
        signal::sparsity_dimension(self.omega_prime, self.horizon, self.nu)
    }
}

fn check_band_setup(omega: f64, omega_prime: f64, delta: f64, prefix: &str) -> Result<()> {
    if !(omega > 0.0 && omega_prime > 0.0 && delta > 0.0) {
        return Err(Error::Config(format!("omega, {prefix}omega_prime and {prefix}delta must be positive")));
    }
    if 2.0 * omega_prime >= omega {
        return Err(Error::Config(format!("need 2 {prefix}omega_prime < omega, got {omega_prime} and {omega}")));
    }
    let cells = 2.0 * omega / delta;
    if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
        return Err(Error::Config(format!("{prefix}delta = {delta} does not divide 2 omega = {}", 2.0 * omega)));
    }
    Ok(())
}

/// A named pass/fail check with a human-readable detail.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self { name: name.into(), pass, detail }
    }
}

pub fn all_pass(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.pass)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Canonical basis, allocation dictionary and cross-Grams for one setting.
#[derive(Debug, Clone)]
pub struct Laboratory {
    pub grid: TimeGrid,
    pub canonical: Arc<ProlateBasis>,
    pub allocations: Vec<Allocation>,
    pub dictionary: Vec<CrossGram>,
    pub n: usize,
    pub s: usize,
}

impl Laboratory {
    pub fn build(omega: f64, omega_prime: f64, horizon: f64, nu: f64, delta: f64, grid_points: usize, max_subbands: usize) -> Result<Self> {
        let grid = if grid_points == 0 { TimeGrid::oversampled(omega, horizon)? } else { TimeGrid::new(horizon, grid_points)? };
        let n = signal::nyquist_dimension(omega, horizon, nu);
        let s = signal::sparsity_dimension(omega_prime, horizon, nu);
        let canonical = Arc::new(pswf::solve_concentration(&BandSet::full(omega)?, &grid, n)?);
        let qgrid = signal::build_grid(omega, delta)?;
        let allocations = signal::enumerate_allocations(&qgrid, omega_prime, max_subbands)?;
        let dictionary = par::map_slice(&allocations, |a| -> Result<CrossGram> {
            let basis = signal::allocation_basis(a, &grid, s)?;
            sensing::cross_gram(&basis, &canonical)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, canonical, allocations, dictionary, n, s })
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Self::build(cfg.omega, cfg.omega_prime, cfg.horizon, cfg.nu, cfg.delta, cfg.grid_points, cfg.max_subbands)
    }

    /// Index pairs `i < j` whose bands share no spectral measure.
    pub fn disjoint_pairs(&self) -> Vec<(usize, usize)> {
        let k = self.allocations.len();
        let tol = 1e-12 * self.canonical.band().omega_max();
        (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .filter(|&(i, j)| self.allocations[i].band().overlap_measure(self.allocations[j].band()) <= tol)
            .collect()
    }
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub m: usize,
    pub m_over_t: f64,
    /// Noiseless blind recovery with Gaussian matrices.
    pub success_rate: f64,
    /// Same with random orthogonal projections; `None` when `M > N`.
    pub projection_success_rate: Option<f64>,
    pub median_error: f64,
    /// Exact inverse Lipschitz constant of the reference matrix for this `M`.
    pub beta: f64,
    pub collision: bool,
    pub noisy_median_error: Option<f64>,
    /// Fraction of noisy trials with `err <= 2 ||e|| / beta`.
    pub robust_fraction: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Largest rank of `[Phi_i, Phi_j]` over disjoint pairs.
    pub threshold: usize,
    pub s: usize,
    pub trials: usize,
}

const TAG_GAUSS: u64 = 1;
const TAG_PROJ: u64 = 2;
const TAG_NOISY: u64 = 3;
const TAG_REF: u64 = 4;
const TAG_PROBE: u64 = 5;

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) }
}

fn sub_seed(master: u64, path: &[u64]) -> u64 {
    rng::stream(master, path).random()
}

/// Success rates, robust-recovery replay and converse witnesses over the `M` sweep.
pub fn run_phase_transition(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let lab = Laboratory::from_config(cfg)?;
    let gap = recovery::DEFAULT_RANK_GAP;
    let disjoint = lab.disjoint_pairs();
    let threshold = disjoint
        .iter()
        .map(|&(i, j)| recovery::pair_rank(&lab.dictionary[i], &lab.dictionary[j], gap))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    let mut sweep = cfg.m_sweep.clone();
    sweep.sort_unstable();
    sweep.dedup();
    let noise = if cfg.noise_sigma > 0.0 { Some(NoiseModel::Gaussian { sigma: cfg.noise_sigma }) } else { None };
    let mut rows = Vec::with_capacity(sweep.len());
    for &m in &sweep {
        let m64 = m as u64;
        let gauss = recovery::recovery_trials(
            SensingKind::Gaussian,
            m,
            &lab.dictionary,
            cfg.trials,
            sub_seed(cfg.seed, &[TAG_GAUSS, m64]),
            NoiseModel::None,
        )?;
        let projection_success_rate = if m <= lab.n {
            Some(
                recovery::random_projection_recovery_trial(m, &lab.dictionary, cfg.trials, sub_seed(cfg.seed, &[TAG_PROJ, m64]))?
                    .success_rate(),
            )
        } else {
            None
        };
        let noisy = match noise {
            Some(model) => Some(recovery::recovery_trials(
                SensingKind::Gaussian,
                m,
                &lab.dictionary,
                cfg.trials,
                sub_seed(cfg.seed, &[TAG_NOISY, m64]),
                model,
            )?),
            None => None,
        };
        let reference = sensing::gaussian_ensemble(m, lab.n, sub_seed(cfg.seed, &[TAG_REF, m64]))?;
        let lip = recovery::estimate_inverse_lipschitz(
            &reference,
            &lab.dictionary,
            cfg.probes_per_pair,
            sub_seed(cfg.seed, &[TAG_PROBE, m64]),
            gap,
        )?;
        let (collision, note) = if m < threshold {
            converse_witness(&reference, &lab, &disjoint, gap)?
        } else {
            (gauss.collisions() > 0, String::new())
        };
        rows.push(SweepRow {
            m,
            m_over_t: m as f64 / cfg.horizon,
            success_rate: gauss.success_rate(),
            projection_success_rate,
            median_error: median(gauss.records.iter().map(|r| r.err_norm).collect()),
            beta: lip.beta,
            collision,
            noisy_median_error: noisy.as_ref().map(|s| median(s.records.iter().map(|r| r.err_norm).collect())),
            robust_fraction: noisy.as_ref().map(|s| {
                s.records.iter().filter(|r| r.within_robust_bound()).count() as f64 / s.records.len() as f64
            }),
            note,
        });
    }
    Ok(SweepResult { rows, threshold, s: lab.s, trials: cfg.trials })
}

fn converse_witness(
    ens: &sensing::MeasurementEnsemble,
    lab: &Laboratory,
    disjoint: &[(usize, usize)],
    gap: f64,
) -> Result<(bool, String)> {
    let mut tried = 0;
    for &(i, j) in disjoint {
        let (p1, p2) = (lab.dictionary[i].matrix(), lab.dictionary[j].matrix());
        if recovery::pair_rank(&lab.dictionary[i], &lab.dictionary[j], gap)? <= ens.rows() {
            continue;
        }
        tried += 1;
        if let Some(c) = recovery::construct_collision(ens, p1, p2, gap)? {
            return Ok((true, format!("collision on allocations {i} and {j}, defect {:e}", c.relative_defect(ens))));
        }
    }
    let reason = if tried == 0 {
        "no disjoint pair has rank above M".to_string()
    } else {
        format!("null-space directions failed validity on all {tried} eligible pairs")
    };
    Ok((false, reason))
}

impl SweepResult {
    pub fn verdicts(&self) -> Vec<Verdict> {
        let above: Vec<&SweepRow> = self.rows.iter().filter(|r| r.m >= self.threshold).collect();
        let below: Vec<&SweepRow> = self.rows.iter().filter(|r| r.m < self.threshold).collect();
        let mut out = vec![Verdict::new(
            "rank threshold",
            self.threshold == 2 * self.s,
            format!("max disjoint-pair rank {} vs 2S = {}", self.threshold, 2 * self.s),
        )];
        let fails: Vec<usize> = above
            .iter()
            .filter(|r| r.success_rate < 1.0 || r.projection_success_rate.is_some_and(|p| p < 1.0))
            .map(|r| r.m)
            .collect();
        out.push(Verdict::new("direct recovery", fails.is_empty(), format!("M >= {} below full success: {fails:?}", self.threshold)));
        let missing: Vec<usize> = below.iter().filter(|r| !r.collision).map(|r| r.m).collect();
        out.push(Verdict::new("converse witness", missing.is_empty(), format!("M < {} without collision: {missing:?}", self.threshold)));
        let loose: Vec<usize> = above.iter().filter(|r| r.robust_fraction.is_some_and(|f| f < 1.0)).map(|r| r.m).collect();
        out.push(Verdict::new("robust bound", loose.is_empty(), format!("M >= {} with err > 2|e|/beta: {loose:?}", self.threshold)));
        let flip = 1.0 / self.trials as f64 + 1e-12;
        let drops: Vec<usize> =
            self.rows.windows(2).filter(|w| w[1].success_rate < w[0].success_rate - flip).map(|w| w[1].m).collect();
        out.push(Verdict::new("monotone success", drops.is_empty(), format!("drops at {drops:?}")));
        out
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "M,M_over_T,success_rate,projection_success_rate,median_error,beta,collision,noisy_median_error,robust_fraction,note"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.m,
                r.m_over_t,
                r.success_rate,
                opt(r.projection_success_rate),
                r.median_error,
                r.beta,
                r.collision,
                opt(r.noisy_median_error),
                opt(r.robust_fraction),
                r.note.replace(',', ";")
            )?;
        }
        Ok(())
    }
}

/// Eigenvalue staircases of the canonical basis and the first dictionary allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct LandauResult {
    pub canonical: Vec<f64>,
    pub allocation: Vec<f64>,
    pub allocation_measure: f64,
    pub horizon: f64,
    pub omega: f64,
    pub canonical_knee: usize,
    pub allocation_knee: usize,
    /// Knees on the refined grid.
    pub canonical_knee_refined: usize,
    pub allocation_knee_refined: usize,
}

/// Number of eigenvalues to report for a band of measure `m`: twice the
/// Landau count plus a margin, capped by the grid.
fn staircase_len(measure: f64, horizon: f64, grid: usize) -> usize {
    (2 * pswf::ceil_count(measure * horizon / (2.0 * std::f64::consts::PI)) + 8).min(grid)
}

pub fn run_landau_widom(cfg: &ExperimentConfig) -> Result<LandauResult> {
    cfg.validate()?;
    let grid = if cfg.grid_points == 0 { TimeGrid::oversampled(cfg.omega, cfg.horizon)? } else { TimeGrid::new(cfg.horizon, cfg.grid_points)? };
    let qgrid = signal::build_grid(cfg.omega, cfg.delta)?;
    let allocs = signal::enumerate_allocations(&qgrid, cfg.omega_prime, cfg.max_subbands)?;
    let full = BandSet::full(cfg.omega)?;
    let band = allocs.first().map_or_else(|| BandSet::empty(cfg.omega), |a| Ok(a.band().clone()))?;
    let refined = grid.refined();
    let jobs = [(&full, &grid), (&full, &refined), (&band, &grid), (&band, &refined)];
    let solved = par::map_slice(&jobs, |&(b, g)| {
        pswf::solve_concentration(b, g, staircase_len(b.measure(), cfg.horizon, grid.len()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let knee = |b: &ProlateBasis| pswf::significant_count(b, 0.5);
    Ok(LandauResult {
        canonical: solved[0].eigenvalues().to_vec(),
        allocation: solved[2].eigenvalues().to_vec(),
        allocation_measure: band.measure(),
        horizon: cfg.horizon,
        omega: cfg.omega,
        canonical_knee: knee(&solved[0]),
        allocation_knee: knee(&solved[2]),
        canonical_knee_refined: knee(&solved[1]),
        allocation_knee_refined: knee(&solved[3]),
    })
}

/// Allowed distance between a knee and its Landau count.
pub const KNEE_TOLERANCE: f64 = 2.0;

impl LandauResult {
    pub fn verdicts(&self) -> Vec<Verdict> {
        let n0 = self.omega * self.horizon / std::f64::consts::PI;
        let s0 = self.allocation_measure * self.horizon / (2.0 * std::f64::consts::PI);
        vec![
            Verdict::new(
                "canonical knee",
                (self.canonical_knee as f64 - n0).abs() <= KNEE_TOLERANCE,
                format!("{} eigenvalues >= 0.5 vs {n0}", self.canonical_knee),
            ),
            Verdict::new(
                "allocation knee",
                (self.allocation_knee as f64 - s0).abs() <= KNEE_TOLERANCE,
                format!("{} eigenvalues >= 0.5 vs {s0}", self.allocation_knee),
            ),
            Verdict::new(
                "refined grid agrees",
                self.canonical_knee == self.canonical_knee_refined && self.allocation_knee == self.allocation_knee_refined,
                format!(
                    "canonical {}/{}, allocation {}/{}",
                    self.canonical_knee, self.canonical_knee_refined, self.allocation_knee, self.allocation_knee_refined
                ),
            ),
        ]
    }

    /// Columns `basis,n,lambda` with one-based `n`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "basis,n,lambda")?;
        for (label, values) in [("canonical", &self.canonical), ("allocation", &self.allocation)] {
            for (k, l) in values.iter().enumerate() {
                writeln!(out, "{label},{},{l}", k + 1)?;
            }
        }
        Ok(())
    }
}

/// One estimate of the dimension suite.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionRow {
    pub name: String,
    pub estimate: f64,
    pub target: f64,
    pub tolerance: f64,
    /// Spread reported with the estimate (fit residual or propagated error).
    pub spread: f64,
}

impl DimensionRow {
    pub fn pass(&self) -> bool {
        (self.estimate - self.target).abs() <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionSuite {
    pub rows: Vec<DimensionRow>,
}

/// Orthonormal coefficient-space bases of every allocation in a small
/// dictionary, and the ambient and per-subspace dimensions.
pub fn allocation_subspaces(lab: &Laboratory) -> Vec<nalgebra::DMatrix<f64>> {
    lab.dictionary.iter().map(|g| orthonormal_columns(g.matrix())).collect()
}

pub fn run_dimension_suite(cfg: &ExperimentConfig) -> Result<DimensionSuite> {
    cfg.validate()?;
    let eps = &cfg.epsilons;
    let pts = cfg.cloud_points;
    let seed = |tag: u64| sub_seed(cfg.seed, &[100 + tag]);
    let mut rows = Vec::new();
    let mut row = |name: &str, estimate: f64, target: f64, tolerance: f64, spread: f64| {
        rows.push(DimensionRow { name: name.into(), estimate, target, tolerance, spread })
    };

    let interval = dimension::segment_union_cloud(4, &[0], pts, seed(1))?;
    let est = dimension::fractal_dim(&interval, eps)?;
    row("fractal_interval", est.slope, 1.0, 0.2, est.fit_residual);

    let disk = dimension::coordinate_ball_cloud(4, 2, pts, seed(2))?;
    let est = dimension::fractal_dim(&disk, eps)?;
    row("fractal_disk", est.slope, 2.0, 0.4, est.fit_residual);

    let segments = dimension::segment_union_cloud(4, &[0, 1], pts / 2, seed(3))?;
    let d = dimension::dilation_doubling_ratio(&segments, eps, cfg.minkowski_cap, seed(4))?;
    row("doubling_segments", d.ratio, 2.0, 0.5, d.uncertainty);

    let ball = dimension::coordinate_ball_cloud(2, 2, pts, seed(5))?;
    let d = dimension::dilation_doubling_ratio(&ball, eps, cfg.minkowski_cap, seed(6))?;
    row("doubling_ball", d.ratio, 1.0, 0.3, d.uncertainty);

    let renyi_schedule = dimension::default_schedule(cfg.renyi_eps_max);
    for (k, &g) in cfg.gammas.iter().enumerate() {
        let src = MixtureSource::new(g, seed(10 + k as u64))?;
        let est = dimension::renyi_dim(&src, &renyi_schedule, cfg.renyi_samples)?;
        row(&format!("renyi_gamma_{g}"), est.gamma_hat, g, 0.05, est.fit_residual);
    }

    let sigma = dimension::sparsity_fraction(cfg.omega, cfg.omega_prime)?;
    row("sparsity_closed_form", sigma, cfg.omega_prime / cfg.omega, 0.0, 0.0);

    let (frac, target, spread) = empirical_sparsity_check(cfg, seed(7))?;
    row("sparsity_empirical", frac, target, 0.1, spread);

    Ok(DimensionSuite { rows })
}

/// `d/N` of the union-of-allocation-subspaces cloud at the sparsity setting,
/// with the target `S/N` and the fit residual.
fn empirical_sparsity_check(cfg: &ExperimentConfig, seed: u64) -> Result<(f64, f64, f64)> {
    let lab = Laboratory::build(
        cfg.omega,
        cfg.sparsity_omega_prime,
        cfg.sparsity_horizon,
        cfg.nu,
        cfg.sparsity_delta,
        0,
        cfg.max_subbands,
    )?;
    let bases = allocation_subspaces(&lab);
    let per = (cfg.cloud_points / bases.len().max(1)).max(1);
    let cloud: PointCloud = dimension::subspace_union_cloud(&bases, per, seed)?;
    let (frac, est) = dimension::empirical_sparsity(&cloud, &cfg.epsilons)?;
    Ok((frac, lab.s as f64 / lab.n as f64, est.fit_residual))
}

impl DimensionSuite {
    pub fn verdicts(&self) -> Vec<Verdict> {
        self.rows
            .iter()
            .map(|r| Verdict::new(&r.name, r.pass(), format!("{} vs {} +- {}", r.estimate, r.target, r.tolerance)))
            .collect()
    }

    /// Columns `name,estimate,target,tolerance,spread,verdict`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "name,estimate,target,tolerance,spread,verdict")?;
        for r in &self.rows {
            let v = if r.pass() { "pass" } else { "fail" };
            writeln!(out, "{},{},{},{},{},{v}", r.name, r.estimate, r.target, r.tolerance, r.spread)?;
        }
        Ok(())
    }
}

/// Canonical basis export with its orthogonality check.
pub fn run_pswf_export(cfg: &ExperimentConfig) -> Result<(ProlateBasis, Vec<Verdict>)> {
    cfg.validate()?;
    let grid = if cfg.grid_points == 0 { TimeGrid::oversampled(cfg.omega, cfg.horizon)? } else { TimeGrid::new(cfg.horizon, cfg.grid_points)? };
    let basis = pswf::solve_concentration(&BandSet::full(cfg.omega)?, &grid, cfg.nyquist_dimension().min(grid.len()))?;
    let rep = pswf::verify_orthogonality(&basis);
    let tol = 1e-9 * basis.eigenvalues().first().copied().unwrap_or(1.0);
    let verdict = Verdict::new(
        "interval orthogonality",
        rep.max_off_diagonal <= tol && rep.max_diagonal_deviation <= tol,
        format!("off-diagonal {:e}, diagonal {:e}", rep.max_off_diagonal, rep.max_diagonal_deviation),
    );
    Ok((basis, vec![verdict]))
}
