//! Cross-checks against independent computations: refined grids, a
//! Nyström extension integrated with Simpson's rule, brute-force counting and
//! dense normal equations.

use std::f64::consts::PI;

use bsense::linalg;
use bsense::pswf::{self, BandSet, TimeGrid};
use bsense::sensing;
use bsense::signal::{self, Allocation};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn desk_grid() -> TimeGrid {
    TimeGrid::oversampled(PI, 32.0).unwrap()
}

#[test]
fn eigenvalues_are_stable_under_grid_refinement() {
    let grid = desk_grid();
    let bands = [
        BandSet::full(PI).unwrap(),
        BandSet::symmetric(PI, &[(PI / 8.0, PI / 4.0)]).unwrap(),
        BandSet::symmetric(PI, &[(0.0, PI / 8.0), (5.0 * PI / 8.0, 6.0 * PI / 8.0)]).unwrap(),
    ];
    for band in &bands {
        let coarse = pswf::solve_concentration(band, &grid, 48).unwrap();
        let fine = pswf::solve_concentration(band, &grid.refined(), 48).unwrap();
        let keep = pswf::significant_count(&coarse, 0.5);
        assert!(keep > 0);
        for n in 0..keep {
            let d = (coarse.eigenvalues()[n] - fine.eigenvalues()[n]).abs();
            assert!(d < 1e-4, "band {:?} mode {n}: shift {d:e}", band.intervals());
        }
    }
}

/// Evaluates each mode off the grid through the eigen-equation
/// `psi(t) = (1 / lambda) sum_j w_j k(t - s_j) psi(s_j)` and integrates the
/// products over the interval with composite Simpson's rule.
fn simpson_interval_gram(basis: &pswf::ProlateBasis, modes: usize, intervals: usize) -> DMatrix<f64> {
    let grid = basis.grid();
    let w = grid.weights();
    let half = grid.horizon() / 2.0;
    let h = grid.horizon() / intervals as f64;
    let ts: Vec<f64> = (0..=intervals).map(|i| -half + i as f64 * h).collect();
    let kernel = DMatrix::from_fn(ts.len(), grid.len(), |i, j| {
        w[j] * pswf::kernel_value(basis.band(), ts[i] - grid.points()[j])
    });
    let mut ext = kernel * basis.eigvecs().columns(0, modes);
    for n in 0..modes {
        let l = basis.eigenvalues()[n];
        ext.column_mut(n).scale_mut(1.0 / l);
    }
    let simpson: Vec<f64> = (0..=intervals)
        .map(|i| {
            let c = if i == 0 || i == intervals { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            c * h / 3.0
        })
        .collect();
    DMatrix::from_fn(modes, modes, |m, n| (0..ts.len()).map(|i| simpson[i] * ext[(i, m)] * ext[(i, n)]).sum())
}

#[test]
fn interval_energy_of_each_mode_equals_its_eigenvalue() {
    let grid = desk_grid();
    for band in [BandSet::full(PI).unwrap(), BandSet::symmetric(PI, &[(PI / 8.0, PI / 4.0)]).unwrap()] {
        let landau = band.measure() * grid.horizon() / (2.0 * PI);
        let modes = (1.2 * landau).ceil() as usize;
        let basis = pswf::solve_concentration(&band, &grid, modes).unwrap();
        let gram = simpson_interval_gram(&basis, modes, 8 * grid.len());
        let tol = 1e-5 * basis.eigenvalues()[0];
        for m in 0..modes {
            for n in 0..modes {
                let want = if m == n { basis.eigenvalues()[n] } else { 0.0 };
                let d = (gram[(m, n)] - want).abs();
                assert!(d < tol, "band {:?} entry ({m},{n}): {d:e}", band.intervals());
            }
        }
    }
}

#[test]
fn eigenvalues_grow_with_the_band() {
    let grid = TimeGrid::oversampled(PI, 16.0).unwrap();
    let nested = [
        BandSet::symmetric(PI, &[(PI / 4.0, PI / 2.0)]).unwrap(),
        BandSet::symmetric(PI, &[(PI / 4.0, 3.0 * PI / 4.0)]).unwrap(),
        BandSet::symmetric(PI, &[(0.0, 3.0 * PI / 4.0)]).unwrap(),
        BandSet::full(PI).unwrap(),
    ];
    let solved: Vec<_> = nested.iter().map(|b| pswf::solve_concentration(b, &grid, 30).unwrap()).collect();
    for w in solved.windows(2) {
        assert!(w[0].band().is_subset_of(w[1].band()));
        for n in 0..30 {
            assert!(w[0].eigenvalues()[n] <= w[1].eigenvalues()[n] + 1e-10, "mode {n}");
        }
    }
}

/// Counts symmetric cell subsets directly from bitmasks.
fn brute_force_allocation_count(cells: usize, max_cells: usize, max_subbands: usize) -> usize {
    let mut count = 0;
    for mask in 1u32..(1 << cells) {
        let on = |i: usize| mask & (1 << i) != 0;
        if (0..cells).any(|i| on(i) != on(cells - 1 - i)) || mask.count_ones() as usize > max_cells {
            continue;
        }
        // maximal runs of consecutive cells; a run reaches positive
        // frequencies when its right edge lies above zero
        let mut runs = 0;
        let mut i = 0;
        while i < cells {
            if !on(i) {
                i += 1;
                continue;
            }
            let mut end = i;
            while end + 1 < cells && on(end + 1) {
                end += 1;
            }
            if 2 * (end + 1) > cells {
                runs += 1;
            }
            i = end + 1;
        }
        if runs <= max_subbands {
            count += 1;
        }
    }
    count
}

#[test]
fn enumeration_matches_brute_force_counts() {
    for (cells, omega_prime_cells, max_subbands) in [(8, 2, 4), (8, 4, 1), (8, 4, 2), (9, 3, 1), (12, 5, 2), (16, 6, 3), (10, 10, 5)] {
        let delta = 2.0 * PI / cells as f64;
        let grid = signal::build_grid(PI, delta).unwrap();
        let omega_prime = omega_prime_cells as f64 * delta / 2.0;
        let found = signal::enumerate_allocations(&grid, omega_prime, max_subbands).unwrap();
        let want = brute_force_allocation_count(cells, omega_prime_cells, max_subbands);
        assert_eq!(found.len(), want, "cells {cells}, budget {omega_prime_cells} cells, {max_subbands} sub-bands");
        for w in found.windows(2) {
            assert!(signal::lexicographic_cmp(&w[0], &w[1]).is_lt());
        }
    }
}

#[test]
fn least_squares_agrees_with_normal_equations() {
    let mut r = bsense::rng::seeded(5);
    for (m, n) in [(12, 5), (40, 10), (7, 7)] {
        let a = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut r));
        let b = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut r));
        let (x, res) = linalg::least_squares(&a, &b);
        let normal = (a.transpose() * &a).cholesky().unwrap().solve(&(a.transpose() * &b));
        assert!((&x - &normal).norm() < 1e-9 * normal.norm().max(1.0));
        assert!((res - (&b - &a * &normal).norm()).abs() < 1e-9);
    }
}

#[test]
fn singular_values_match_gram_eigenvalues_and_rank() {
    let mut r = bsense::rng::seeded(8);
    let left = DMatrix::<f64>::from_fn(30, 6, |_, _| StandardNormal.sample(&mut r));
    let right = DMatrix::<f64>::from_fn(6, 14, |_, _| StandardNormal.sample(&mut r));
    let m = left * right;
    let sv = linalg::singular_values(&m);
    let mut eig: Vec<f64> = SymmetricEigen::new(m.transpose() * &m).eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    for (s, e) in sv.iter().zip(&eig).take(6) {
        assert!((s - e).abs() < 1e-8 * sv[0]);
    }
    assert_eq!(linalg::numerical_rank(&m, 1e-8), 6);
    let null = linalg::null_space(&m, 1e-8);
    assert_eq!(null.ncols(), 8);
    assert!((&m * &null).norm() < 1e-9 * sv[0]);
}

#[test]
fn analysis_then_reconstruction_preserves_allocation_signals() {
    let grid = desk_grid();
    let canonical = pswf::solve_concentration(&BandSet::full(PI).unwrap(), &grid, 40).unwrap();
    let qgrid = signal::build_grid(PI, PI / 8.0).unwrap();
    let band = BandSet::symmetric(PI, &[(PI / 8.0, PI / 4.0), (PI / 2.0, 5.0 * PI / 8.0)]).unwrap();
    let alloc = Allocation::new(band, PI / 2.0, &qgrid).unwrap();
    let basis = signal::allocation_basis(&alloc, &grid, 10).unwrap();
    let mut r = bsense::rng::seeded(21);
    for _ in 0..5 {
        let alpha: Vec<f64> = (0..10).map(|_| r.random_range(-1.0..1.0)).collect();
        let f = signal::synthesize(&basis, &alpha).unwrap();
        let x = signal::analyze(&f, &canonical).unwrap();
        let back = signal::reconstruct(&x, &canonical).unwrap();
        let diff: Vec<f64> = f.iter().zip(&back).map(|(a, b)| a - b).collect();
        let rel = grid.inner(&diff, &diff) / grid.inner(&f, &f);
        assert!(rel < 1e-3, "relative energy error {rel:e}");
    }
}

#[test]
fn cross_gram_maps_allocation_coefficients_to_canonical_ones() {
    let grid = desk_grid();
    let canonical = pswf::solve_concentration(&BandSet::full(PI).unwrap(), &grid, 40).unwrap();
    let band = BandSet::symmetric(PI, &[(3.0 * PI / 8.0, PI / 2.0)]).unwrap();
    let basis = pswf::solve_concentration(&band, &grid, 5).unwrap();
    let phi = sensing::cross_gram(&basis, &canonical).unwrap();
    let alpha = [0.3, -0.2, 0.5, 0.1, -0.4];
    let via_gram = phi.apply(&alpha);
    let direct = signal::analyze(&signal::synthesize(&basis, &alpha).unwrap(), &canonical).unwrap();
    for (a, b) in via_gram.iter().zip(direct.as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(phi.residual() < 1e-3);
}
