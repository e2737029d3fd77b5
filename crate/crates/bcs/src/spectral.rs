//! Dispersion symbols, sector operators, and critical temperatures.
//!
//! The normal-state symbol is `K_T(p) = (p^2 - mu) / tanh((p^2 - mu)/(2T))`,
//! extended by `2T` across the removable singularity at the Fermi surface;
//! in the superfluid state the dispersion `E(p) = sqrt((p^2-mu)^2 + |Delta(p)|^2)`
//! replaces `p^2 - mu`. A sector operator is the measure-symmetrized matrix
//! `A = diag(K(p_i)) + M_l`; its lowest eigenvalue is nondecreasing in T,
//! and the critical temperature of sector l is the zero crossing located by
//! bisection.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{BcsError, Result};
use crate::grid::{same_grid, Dimension, GridFunction, RadialGrid};
use crate::potentials::{assemble_even_sectors, PotentialSpec, SectorKernel};
use std::sync::Arc;

/// Chemical potential and temperature of a dispersion evaluation.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DispersionParams {
    pub mu: f64,
    pub temperature: f64,
}

impl DispersionParams {
    pub fn new(mu: f64, temperature: f64) -> Result<Self> {
        if !mu.is_finite() || !temperature.is_finite() {
            return Err(BcsError::InvalidInput(format!(
                "dispersion: mu = {mu}, T = {temperature}"
            )));
        }
        if temperature < 0.0 {
            return Err(BcsError::Domain(format!(
                "dispersion: negative temperature {temperature}"
            )));
        }
        Ok(DispersionParams { mu, temperature })
    }

    pub fn at_temperature(&self, temperature: f64) -> Result<Self> {
        DispersionParams::new(self.mu, temperature)
    }
}

/// x / tanh(x / (2T)) with the removable singularity filled in by its even
/// Taylor expansion 2T + x^2/(6T) for |x| < 1e-6 T; the T = 0 limit is |x|.
fn symbol_core(x: f64, t: f64) -> f64 {
    if t == 0.0 {
        return x.abs();
    }
    if x.abs() < 1e-6 * t {
        2.0 * t + x * x / (6.0 * t)
    } else {
        x / (x / (2.0 * t)).tanh()
    }
}

/// d/dE of `E / tanh(E/(2T))` for T > 0; vanishes like E/(3T) as E -> 0
/// and tends to 1 as E -> infinity.
pub(crate) fn symbol_slope(e: f64, t: f64) -> f64 {
    let y = e / (2.0 * t);
    if y < 1e-4 {
        return 2.0 * y / 3.0 - 4.0 * y.powi(3) / 45.0;
    }
    let s = y.sinh();
    1.0 / y.tanh() - y / (s * s)
}

/// Normal-state symbol K_T(p).
pub fn kt_symbol(params: &DispersionParams, p: f64) -> f64 {
    symbol_core(p * p - params.mu, params.temperature)
}

/// Superfluid symbol K_T^Delta(p) for gap magnitude `delta_abs` at p.
pub fn kt_delta_symbol(params: &DispersionParams, p: f64, delta_abs: f64) -> f64 {
    let e = (p * p - params.mu).hypot(delta_abs);
    symbol_core(e, params.temperature)
}

/// Sector operator diag(K_T^Delta(p_i)) + M; `delta = None` is the normal
/// state (linear criterion operator).
pub fn assemble_operator(
    params: &DispersionParams,
    kernel: &SectorKernel,
    delta: Option<&GridFunction>,
) -> Result<DMatrix<f64>> {
    if let Some(d) = delta {
        if !same_grid(&d.grid, &kernel.grid) {
            return Err(BcsError::InvalidInput(
                "assemble_operator: gap lives on a different grid".into(),
            ));
        }
    }
    let mut a = kernel.matrix.clone();
    for (i, &p) in kernel.grid.nodes.iter().enumerate() {
        let k = match delta {
            Some(d) => kt_delta_symbol(params, p, d.values[i].abs()),
            None => kt_symbol(params, p),
        };
        a[(i, i)] += k;
    }
    Ok(a)
}

/// Eigenvalues (ascending) with unit-norm eigenvectors in symmetrized
/// coordinates.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<DVector<f64>>,
}

/// Labeled spectrum of one sector operator.
#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub ell: i32,
    pub temperature: f64,
    pub pairs: EigenPairs,
}

/// The k lowest eigenpairs of a symmetric matrix. Rejects asymmetry beyond
/// 1e-10 relative and verifies every residual ||A v - lambda v|| against
/// 1e-9 ||A||.
pub fn lowest_eigenvalues(a: &DMatrix<f64>, k: usize) -> Result<EigenPairs> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n || k == 0 || k > n {
        return Err(BcsError::InvalidInput(format!(
            "lowest_eigenvalues: {}x{} matrix, k = {k}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !scale.is_finite() {
        return Err(BcsError::InvalidInput(
            "lowest_eigenvalues: non-finite entries".into(),
        ));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-10 * scale.max(1.0) {
                return Err(BcsError::InvalidInput(format!(
                    "lowest_eigenvalues: asymmetric at ({i}, {j})"
                )));
            }
        }
    }
    let eig = nalgebra::SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let norm_a = order
        .iter()
        .map(|&i| eig.eigenvalues[i].abs())
        .fold(0.0f64, f64::max);
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let lambda = eig.eigenvalues[i];
        let v = eig.eigenvectors.column(i).into_owned();
        let residual = (a * &v - lambda * &v).norm();
        if residual > 1e-9 * norm_a.max(1e-300) {
            return Err(BcsError::Numeric(format!(
                "eigenpair residual {residual:.3e} exceeds 1e-9 * ||A|| = {:.3e}",
                1e-9 * norm_a
            )));
        }
        eigenvalues.push(lambda);
        eigenvectors.push(v);
    }
    Ok(EigenPairs {
        eigenvalues,
        eigenvectors,
    })
}

/// Lowest eigenvalue only (no vectors); the workhorse of bisections and
/// scans.
pub fn lowest_eigenvalue(
    params: &DispersionParams,
    kernel: &SectorKernel,
    delta: Option<&GridFunction>,
) -> Result<f64> {
    let a = assemble_operator(params, kernel, delta)?;
    Ok(a.symmetric_eigenvalues().iter().fold(f64::INFINITY, |m, &v| m.min(v)))
}

/// Labeled spectrum with eigenvectors for sector work.
pub fn sector_spectrum(
    params: &DispersionParams,
    kernel: &SectorKernel,
    delta: Option<&GridFunction>,
    k: usize,
) -> Result<SpectralResult> {
    let a = assemble_operator(params, kernel, delta)?;
    Ok(SpectralResult {
        ell: kernel.ell,
        temperature: params.temperature,
        pairs: lowest_eigenvalues(&a, k)?,
    })
}

/// Bisection floor: T = 0 is admitted only in symbol evaluation.
pub const T_FLOOR: f64 = 1e-10;
/// Bracket expansion cap; staying negative past this is a no-transition
/// error.
pub const T_CAP: f64 = 1e6;

/// Critical temperature of sector `ell`: the zero crossing of the lowest
/// eigenvalue of diag(K_T) + M_l, nondecreasing in T. Returns 0 when the
/// operator is already nonnegative at the floor.
pub fn critical_temperature_sector(
    spec: &PotentialSpec,
    grid: &Arc<RadialGrid>,
    mu: f64,
    ell: i32,
    bracket: Option<(f64, f64)>,
) -> Result<f64> {
    let kernel = crate::potentials::assemble_sector_kernel(spec, ell, grid)?;
    critical_temperature_for_kernel(&kernel, mu, bracket)
}

/// Same bisection on a pre-assembled kernel.
pub fn critical_temperature_for_kernel(
    kernel: &SectorKernel,
    mu: f64,
    bracket: Option<(f64, f64)>,
) -> Result<f64> {
    if let Some((lo, hi)) = bracket {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi <= lo {
            return Err(BcsError::InvalidInput(format!(
                "critical temperature: bracket ({lo}, {hi})"
            )));
        }
    }
    let eig_min = |t: f64| -> Result<f64> {
        lowest_eigenvalue(&DispersionParams::new(mu, t)?, kernel, None)
    };
    if eig_min(T_FLOOR)? >= 0.0 {
        return Ok(0.0);
    }
    let mut lo = bracket.map_or(T_FLOOR, |b| b.0.max(T_FLOOR));
    if lo > T_FLOOR && eig_min(lo)? >= 0.0 {
        lo = T_FLOOR;
    }
    let mut hi = bracket.map_or_else(|| mu.abs().max(1.0), |b| b.1);
    while eig_min(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > T_CAP {
            return Err(BcsError::NoTransition {
                ell: kernel.ell,
                t_max: T_CAP,
            });
        }
    }
    let tol = 1e-8 * hi.max(1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if eig_min(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Critical data of the full operator across sectors.
#[derive(Clone, Debug, Serialize)]
pub struct CriticalReport {
    /// (l, T_c(l)) for every admissible sector up to ell_max.
    pub tc_by_sector: Vec<(i32, f64)>,
    /// max_l T_c(l); 0 means no transition at any computed sector.
    pub tc: f64,
    /// Sector attaining tc, None when tc = 0.
    pub ell0: Option<i32>,
    /// Sector owning the second-lowest distinct eigenvalue at its crossing,
    /// None when that eigenvalue never crosses above the floor.
    pub ell1: Option<i32>,
    /// Temperature where the second-lowest distinct eigenvalue of the full
    /// operator crosses zero; None when tc = 0, 0 when it never crosses.
    pub t_tilde: Option<f64>,
    /// Zero-eigenvalue multiplicity at T_c counting the +/- l pair.
    pub degeneracy_at_tc: u32,
    /// Set when two sectors' critical temperatures agree within 1e-8: the
    /// non-degeneracy assumption behind the second-crossing analysis fails.
    pub degenerate_tie: bool,
}

/// Two smallest eigenvalues of every sector at temperature t, as
/// (eigenvalue, sector, index-within-sector), merged ascending.
fn merged_low_spectrum(
    kernels: &[SectorKernel],
    mu: f64,
    t: f64,
) -> Result<Vec<(f64, i32, usize)>> {
    let params = DispersionParams::new(mu, t)?;
    let mut merged: Vec<(f64, i32, usize)> = Vec::with_capacity(2 * kernels.len());
    let per: Vec<Result<Vec<f64>>> = kernels
        .par_iter()
        .map(|k| {
            let a = assemble_operator(&params, k, None)?;
            let mut ev: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            ev.truncate(2);
            Ok(ev)
        })
        .collect();
    for (kernel, ev) in kernels.iter().zip(per) {
        for (idx, lambda) in ev?.into_iter().enumerate() {
            merged.push((lambda, kernel.ell, idx));
        }
    }
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(merged)
}

/// Assemble every admissible sector kernel up to ell_max and locate T_c per
/// sector, the maximizing sector, and the second distinct crossing.
pub fn critical_report(
    spec: &PotentialSpec,
    grid: &Arc<RadialGrid>,
    mu: f64,
    ell_max: i32,
) -> Result<CriticalReport> {
    let kernels = assemble_even_sectors(spec, grid, ell_max)?;
    critical_report_for_kernels(&kernels, mu)
}

/// `critical_report` on pre-assembled kernels.
pub fn critical_report_for_kernels(kernels: &[SectorKernel], mu: f64) -> Result<CriticalReport> {
    if kernels.is_empty() {
        return Err(BcsError::InvalidInput("critical_report: no sectors".into()));
    }
    let tcs: Vec<f64> = kernels
        .par_iter()
        .map(|k| critical_temperature_for_kernel(k, mu, None))
        .collect::<Result<_>>()?;
    let tc_by_sector: Vec<(i32, f64)> = kernels
        .iter()
        .zip(&tcs)
        .map(|(k, &t)| (k.ell, t))
        .collect();

    let (imax, &tc) = tcs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    if tc <= 0.0 {
        return Ok(CriticalReport {
            tc_by_sector,
            tc: 0.0,
            ell0: None,
            ell1: None,
            t_tilde: None,
            degeneracy_at_tc: 0,
            degenerate_tie: false,
        });
    }
    let ell0 = kernels[imax].ell;
    let degenerate_tie = tcs
        .iter()
        .enumerate()
        .any(|(i, &t)| i != imax && (t - tc).abs() < 1e-8);

    // Second-lowest distinct eigenvalue of the union spectrum (each sector
    // listed once: the +/- l pair is collapsed), bisected to its crossing.
    let second = |t: f64| -> Result<f64> { Ok(merged_low_spectrum(kernels, mu, t)?[1].0) };
    let (t_tilde, ell1) = if second(T_FLOOR)? >= 0.0 {
        (0.0, None)
    } else {
        let mut lo = T_FLOOR;
        let mut hi = tc;
        let tol = 1e-8 * hi.max(1.0);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if second(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t_tilde = 0.5 * (lo + hi);
        let owner = merged_low_spectrum(kernels, mu, t_tilde)?[1].1;
        (t_tilde, Some(owner))
    };

    Ok(CriticalReport {
        tc_by_sector,
        tc,
        ell0: Some(ell0),
        ell1,
        t_tilde: Some(t_tilde),
        degeneracy_at_tc: if ell0 == 0 { 1 } else { 2 },
        degenerate_tie,
    })
}

/// Per-sector minimum eigenvalue of diag(K_T^Delta) + M_l.
#[derive(Clone, Debug, Serialize)]
pub struct PositivityReport {
    pub temperature: f64,
    /// (l, min eigenvalue) per sector.
    pub per_sector: Vec<(i32, f64)>,
    pub min_eigenvalue: f64,
    /// Pass threshold -1e-6 * sup|V^|.
    pub threshold: f64,
    pub pass: bool,
}

/// Check nonnegativity of the full superfluid operator K_T^Delta + V across
/// sectors, against the scale of the potential.
pub fn positivity_check(
    spec: &PotentialSpec,
    kernels: &[SectorKernel],
    params: &DispersionParams,
    delta: &GridFunction,
) -> Result<PositivityReport> {
    if kernels.is_empty() {
        return Err(BcsError::InvalidInput("positivity_check: no sectors".into()));
    }
    let per_sector: Vec<(i32, f64)> = kernels
        .par_iter()
        .map(|k| lowest_eigenvalue(params, k, Some(delta)).map(|v| (k.ell, v)))
        .collect::<Result<_>>()?;
    let min_eigenvalue = per_sector
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::INFINITY, f64::min);
    let threshold = -1e-6 * spec.fourier_sup_norm();
    Ok(PositivityReport {
        temperature: params.temperature,
        per_sector,
        min_eigenvalue,
        threshold,
        pass: min_eigenvalue >= threshold,
    })
}

/// Convenience for tests and the CLI: lowest eigenvalue of sector `ell` as a
/// function of T, scanned on an equally spaced mesh until the first
/// nonnegative value; returns that T. The step is the resolution of the
/// estimate.
pub fn scan_critical_temperature(
    kernel: &SectorKernel,
    mu: f64,
    step: f64,
    t_max: f64,
) -> Result<Option<f64>> {
    if !(step > 0.0) || !(t_max > step) {
        return Err(BcsError::InvalidInput(format!(
            "scan: step {step}, t_max {t_max}"
        )));
    }
    let n = (t_max / step).ceil() as usize;
    // Batch the mesh so the scan parallelizes without changing its result.
    let chunk = 64;
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let vals: Vec<(f64, f64)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let t = T_FLOOR.max(i as f64 * step);
                lowest_eigenvalue(&DispersionParams::new(mu, t)?, kernel, None).map(|v| (t, v))
            })
            .collect::<Result<_>>()?;
        for (t, v) in vals {
            if v >= 0.0 {
                return Ok(Some(t));
            }
        }
        start = end;
    }
    Ok(None)
}

/// Admissible sector list of a dimension.
pub fn admissible_sectors(dimension: Dimension, ell_max: i32) -> Vec<i32> {
    match dimension {
        Dimension::Two => (0..=ell_max).step_by(2).collect(),
        Dimension::Three => vec![0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use approx::assert_relative_eq;

    fn params(mu: f64, t: f64) -> DispersionParams {
        DispersionParams::new(mu, t).unwrap()
    }

    #[test]
    fn symbol_equals_two_t_on_the_fermi_surface() {
        for t in [0.01, 0.3, 5.0] {
            let p = params(1.0, t);
            let v = kt_symbol(&p, 1.0);
            assert_relative_eq!(v, 2.0 * t, max_relative = 1e-10);
        }
    }

    #[test]
    fn symbol_slope_matches_finite_differences() {
        let t = 0.41;
        for e in [0.0f64, 1e-9, 1e-5, 1e-3, 0.3, 2.0, 40.0] {
            let h = 1e-6 * (1.0 + e);
            // One-sided difference at the left edge keeps E >= 0.
            let lo = (e - h).max(0.0);
            let fd = (symbol_core(e + h, t) - symbol_core(lo, t)) / (e + h - lo);
            assert_relative_eq!(symbol_slope(e, t), fd, epsilon = 1e-6, max_relative = 1e-5);
        }
        // Saturates at 1 once E dwarfs T.
        assert_relative_eq!(symbol_slope(1.0e4, t), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn symbol_is_smooth_across_the_series_threshold() {
        let t = 0.37;
        let p = params(1.0, t);
        // Momenta just inside and outside |p^2 - mu| = 1e-6 T.
        let x_in = 0.999e-6 * t;
        let x_out = 1.001e-6 * t;
        let v_in = kt_symbol(&p, (1.0 + x_in).sqrt());
        let v_out = kt_symbol(&p, (1.0 + x_out).sqrt());
        assert_relative_eq!(v_in, v_out, max_relative = 1e-12);
    }

    #[test]
    fn symbol_reduces_to_abs_dispersion_at_zero_temperature() {
        let p = params(1.0, 0.0);
        assert_relative_eq!(kt_symbol(&p, 2.0), 3.0, max_relative = 1e-15);
        assert_relative_eq!(kt_symbol(&p, 0.5), 0.75, max_relative = 1e-15);
        assert_eq!(kt_delta_symbol(&p, 1.0, 0.25), 0.25);
    }

    #[test]
    fn symbol_is_monotone_in_temperature() {
        for p_val in [0.2, 1.0, 1.7] {
            let mut last = 0.0;
            for i in 1..60 {
                let t = 0.05 * i as f64;
                let v = kt_symbol(&params(1.0, t), p_val);
                assert!(v > last, "K_T not increasing at p = {p_val}, T = {t}");
                last = v;
            }
        }
    }

    #[test]
    fn negative_temperature_is_rejected() {
        assert!(DispersionParams::new(1.0, -0.1).is_err());
        assert!(DispersionParams::new(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn superfluid_symbol_bounds() {
        // 0 <= K^Delta - K <= |Delta| pointwise.
        let p = params(1.0, 0.15);
        for q in [0.1, 0.9, 1.0, 1.1, 2.5] {
            for d in [0.0, 0.05, 0.4] {
                let base = kt_symbol(&p, q);
                let sup = kt_delta_symbol(&p, q, d);
                assert!(sup >= base - 1e-14);
                assert!(sup - base <= d + 1e-14);
            }
        }
    }

    #[test]
    fn operator_is_kernel_plus_diagonal_symbol() {
        let spec = PotentialSpec::gaussian(2.0, 1.0, Dimension::Two).unwrap();
        let grid = build_grid(8.0, 32, 1.0, Dimension::Two).unwrap();
        let kernel = crate::potentials::assemble_sector_kernel(&spec, 0, &grid).unwrap();
        let p = params(1.0, 0.2);
        let a = assemble_operator(&p, &kernel, None).unwrap();
        for i in [0usize, 7, 31] {
            assert_relative_eq!(
                a[(i, i)],
                kernel.matrix[(i, i)] + kt_symbol(&p, grid.nodes[i]),
                max_relative = 1e-14
            );
        }
        assert_relative_eq!(a[(3, 9)], a[(9, 3)], max_relative = 1e-14);
    }

    #[test]
    fn eigensolver_reproduces_a_known_spectrum() {
        // [[2,1,0],[1,2,0],[0,0,5]] has eigenvalues 1, 3, 5.
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        let pairs = lowest_eigenvalues(&a, 3).unwrap();
        assert_relative_eq!(pairs.eigenvalues[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(pairs.eigenvalues[1], 3.0, max_relative = 1e-12);
        assert_relative_eq!(pairs.eigenvalues[2], 5.0, max_relative = 1e-12);
        for (i, v) in pairs.eigenvectors.iter().enumerate() {
            assert_relative_eq!(v.norm(), 1.0, max_relative = 1e-12);
            let r = (&a * v - pairs.eigenvalues[i] * v).norm();
            assert!(r < 1e-12);
        }
    }

    #[test]
    fn asymmetric_matrices_are_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(lowest_eigenvalues(&a, 1).is_err());
    }

    #[test]
    fn bisection_matches_coarse_scan_on_a_small_grid() {
        let spec = PotentialSpec::gaussian(2.0, 1.0, Dimension::Two).unwrap();
        let grid = build_grid(8.0, 64, 1.0, Dimension::Two).unwrap();
        let kernel = crate::potentials::assemble_sector_kernel(&spec, 0, &grid).unwrap();
        let tc = critical_temperature_for_kernel(&kernel, 1.0, None).unwrap();
        assert!(tc > 0.0);
        let scanned = scan_critical_temperature(&kernel, 1.0, 1e-3, 2.0)
            .unwrap()
            .expect("transition exists");
        assert!(
            (tc - scanned).abs() <= 2e-3,
            "bisection {tc} vs scan {scanned}"
        );
        // At T_c the lowest eigenvalue is zero to bisection accuracy.
        let lam =
            lowest_eigenvalue(&params(1.0, tc), &kernel, None).unwrap();
        assert!(lam.abs() < 1e-4, "lowest eigenvalue at T_c is {lam}");
    }

    #[test]
    fn repulsive_potential_has_no_transition() {
        // Positive V^ everywhere: operator positive at the floor already.
        let spec = PotentialSpec::gaussian(-1.0, 1.0, Dimension::Two).unwrap();
        let grid = build_grid(8.0, 32, 1.0, Dimension::Two).unwrap();
        let kernel = crate::potentials::assemble_sector_kernel(&spec, 0, &grid).unwrap();
        let tc = critical_temperature_for_kernel(&kernel, 1.0, None).unwrap();
        assert_eq!(tc, 0.0);
    }

    #[test]
    fn lowest_eigenvalue_is_monotone_in_temperature() {
        let spec = PotentialSpec::gaussian(2.0, 1.0, Dimension::Two).unwrap();
        let grid = build_grid(8.0, 48, 1.0, Dimension::Two).unwrap();
        let kernel = crate::potentials::assemble_sector_kernel(&spec, 2, &grid).unwrap();
        let mut last = f64::NEG_INFINITY;
        for i in 1..=20 {
            let t = 0.05 * i as f64;
            let v = lowest_eigenvalue(&params(1.0, t), &kernel, None).unwrap();
            assert!(v >= last - 1e-12, "eigenvalue decreased at T = {t}");
            last = v;
        }
    }
}
