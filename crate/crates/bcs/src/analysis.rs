//! Analyses built on the solver: eigenvalue curves over a temperature mesh
//! with refined zero crossings, the square-root scaling of the gap branch
//! below T_c, the weak-coupling prediction of the dominant sector from the
//! Fermi-circle diagonal, and the rotation test showing the superfluid
//! symbol penalizes non-radial pair wavefunctions.
//!
//! The rotation test lives on a dedicated polar tensor grid (radial
//! Gauss-Legendre rule times uniform angles) rather than the production
//! radial grid: its inputs are non-radial, outside the per-sector ansatz.
//! Rotations by sampled angles are exact index shifts on that grid, so the
//! identity rotation reproduces the baseline form bit for bit.

use std::ops::RangeInclusive;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{BcsError, Result};
use crate::gap::{gap_sup_norm, pair_profile, solve_gap, SolverOptions};
use crate::grid::{Dimension, RadialGrid};
use crate::potentials::{assemble_even_sectors, PotentialSpec, SectorKernel};
use crate::quadrature::gauss_legendre_on;
use crate::spectral::{
    assemble_operator, critical_temperature_for_kernel, kt_delta_symbol, DispersionParams,
};

/// Eigenvalue tracks kept per sector when building curve sets.
pub const TRACKS_PER_SECTOR: usize = 3;

/// One eigenvalue track: the `index`-th smallest eigenvalue of the sector
/// operator, sampled over the mesh temperatures.
#[derive(Clone, Debug, Serialize)]
pub struct CurveTrack {
    pub ell: i32,
    pub index: usize,
    pub values: Vec<f64>,
}

/// A refined zero crossing of one track.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Crossing {
    pub temperature: f64,
    pub ell: i32,
    pub index: usize,
}

/// Lowest eigenvalue tracks of every admissible sector over a temperature
/// mesh, with zero crossings refined by bisection between bracketing mesh
/// points. Crossings are sorted descending in temperature, so the first
/// entry is the critical temperature and the second is the second-crossing
/// temperature behind the positivity window.
#[derive(Clone, Debug, Serialize)]
pub struct CurveSet {
    pub temperatures: Vec<f64>,
    pub tracks: Vec<CurveTrack>,
    pub crossings: Vec<Crossing>,
}

fn k_smallest_eigenvalues(
    params: &DispersionParams,
    kernel: &SectorKernel,
    k: usize,
) -> Result<Vec<f64>> {
    let a = assemble_operator(params, kernel, None)?;
    let mut vals: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals.truncate(k);
    Ok(vals)
}

/// Bisect the `index`-th smallest sector eigenvalue (nondecreasing in T) to
/// its zero inside a bracketing interval.
fn refine_crossing(
    kernel: &SectorKernel,
    mu: f64,
    index: usize,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    for _ in 0..200 {
        if hi - lo <= 1e-9 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let params = DispersionParams::new(mu, mid)?;
        let vals = k_smallest_eigenvalues(&params, kernel, index + 1)?;
        if vals[index] < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Lowest `TRACKS_PER_SECTOR` eigenvalues of every admissible sector across
/// an ascending positive temperature mesh, with refined zero crossings.
pub fn eigenvalue_curves(
    spec: &PotentialSpec,
    grid: &Arc<RadialGrid>,
    mu: f64,
    ell_max: i32,
    t_mesh: &[f64],
) -> Result<CurveSet> {
    if t_mesh.is_empty() {
        return Err(BcsError::InvalidInput("curves: empty T mesh".into()));
    }
    for w in t_mesh.windows(2) {
        if !(w[1] > w[0]) {
            return Err(BcsError::InvalidInput("curves: T mesh not ascending".into()));
        }
    }
    if !t_mesh.iter().all(|t| t.is_finite() && *t > 0.0) {
        return Err(BcsError::InvalidInput(
            "curves: mesh temperatures must be finite and positive".into(),
        ));
    }

    let kernels = assemble_even_sectors(spec, grid, ell_max)?;
    let mut tracks = Vec::with_capacity(kernels.len() * TRACKS_PER_SECTOR);
    for kernel in &kernels {
        let per_t: Vec<Vec<f64>> = t_mesh
            .par_iter()
            .map(|&t| k_smallest_eigenvalues(&DispersionParams::new(mu, t)?, kernel, TRACKS_PER_SECTOR))
            .collect::<Result<_>>()?;
        for index in 0..TRACKS_PER_SECTOR {
            tracks.push(CurveTrack {
                ell: kernel.ell,
                index,
                values: per_t.iter().map(|v| v[index]).collect(),
            });
        }
    }

    let mut crossings = Vec::new();
    for track in &tracks {
        let bracket = track
            .values
            .windows(2)
            .position(|w| w[0] < 0.0 && w[1] >= 0.0);
        if let Some(i) = bracket {
            let kernel = kernels
                .iter()
                .find(|k| k.ell == track.ell)
                .expect("track built from these kernels");
            let t = refine_crossing(kernel, mu, track.index, t_mesh[i], t_mesh[i + 1])?;
            crossings.push(Crossing {
                temperature: t,
                ell: track.ell,
                index: track.index,
            });
        }
    }
    crossings.sort_by(|a, b| b.temperature.total_cmp(&a.temperature));

    Ok(CurveSet {
        temperatures: t_mesh.to_vec(),
        tracks,
        crossings,
    })
}

/// One converged sample of the scaling study at T = T_c (1 - 2^-k).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScalingPoint {
    pub k: u32,
    pub temperature: f64,
    /// Sup-norm of the solved gap, refined off the grid.
    pub gap_sup: f64,
    /// L2 norm of the pair amplitude -Delta/(2 K_T^Delta).
    pub pair_l2: f64,
}

/// Least-squares exponents of the gap branch: log of the gap sup-norm and
/// of the pair-amplitude L2 norm against log(T_c - T).
#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    pub critical_temperature: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Slope of the pair-amplitude L2 norm on the same abscissa.
    pub pair_slope: f64,
    pub points: Vec<ScalingPoint>,
    /// One message per excluded k (non-converged, vanished, or too close
    /// to T_c for the fixed point to be trusted).
    pub warnings: Vec<String>,
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r2)
}

/// Fit the gap-branch exponent on T = T_c (1 - 2^-k) for k in `k_range`.
/// Points with 2^-k < 1e-3 are excluded up front: inside that collar the
/// critical slowing of the fixed point dominates the discretization error.
/// Fewer than 4 usable points is an error, not a fit.
pub fn scaling_fit(
    spec: &PotentialSpec,
    kernel: &SectorKernel,
    params_base: &DispersionParams,
    k_range: RangeInclusive<u32>,
    opts: &SolverOptions,
) -> Result<ScalingFit> {
    let tc = critical_temperature_for_kernel(kernel, params_base.mu, None)?;
    if tc <= 0.0 {
        return Err(BcsError::Domain(format!(
            "scaling fit: sector {} has no transition",
            kernel.ell
        )));
    }

    let mut points = Vec::new();
    let mut warnings = Vec::new();
    for k in k_range {
        let frac = 0.5f64.powi(k as i32);
        if frac < 1e-3 {
            warnings.push(format!("k = {k}: inside the 1e-3 T_c collar, excluded"));
            continue;
        }
        let t = tc * (1.0 - frac);
        let params = params_base.at_temperature(t)?;
        let gap = solve_gap(kernel, &params, None, opts)?;
        if !gap.converged {
            warnings.push(format!(
                "k = {k}: not converged after {} iterations (residual {:.3e}), excluded",
                gap.iterations, gap.residual
            ));
            continue;
        }
        let gap_sup = gap_sup_norm(spec, kernel, &params, &gap)?;
        let pair_l2 = pair_profile(&params, &gap)?.l2_norm();
        if gap_sup <= 0.0 || pair_l2 <= 0.0 {
            warnings.push(format!("k = {k}: gap vanished, excluded"));
            continue;
        }
        points.push(ScalingPoint {
            k,
            temperature: t,
            gap_sup,
            pair_l2,
        });
    }

    if points.len() < 4 {
        return Err(BcsError::Numeric(format!(
            "scaling fit: only {} usable points (need 4); {}",
            points.len(),
            warnings.join("; ")
        )));
    }

    let xs: Vec<f64> = points.iter().map(|p| (tc - p.temperature).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.gap_sup.ln()).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    let ya: Vec<f64> = points.iter().map(|p| p.pair_l2.ln()).collect();
    let (pair_slope, _, _) = linear_fit(&xs, &ya);

    Ok(ScalingFit {
        critical_temperature: tc,
        slope,
        intercept,
        r_squared,
        pair_slope,
        points,
        warnings,
    })
}

/// Weak-coupling sector prediction from the Fermi-circle diagonal.
#[derive(Clone, Debug, Serialize)]
pub struct WeakCouplingReport {
    /// Even argmin of the diagonal; the predicted dominant sector as the
    /// coupling tends to zero.
    pub predicted: i32,
    /// (l, lambda_scale * V^_l(sqrt(mu), sqrt(mu))) for 0 <= l <= ell_max;
    /// the Fermi-circle matrix is diagonal in the angular basis, these are
    /// its entries.
    pub fermi_diagonal: Vec<(i32, f64)>,
    /// Another even sector whose entry ties the minimum within relative
    /// 1e-10. Ties are reported, not resolved: the prediction is then
    /// ambiguous and `predicted` is the smaller sector.
    pub tie_with: Option<i32>,
}

/// Predict the dominant sector at coupling scale `lambda_scale` from the
/// diagonal of the Fermi-circle interaction matrix. The argmin is scale
/// free; the scale only sets the reported entries.
pub fn weak_coupling_sector(
    spec: &PotentialSpec,
    mu: f64,
    lambda_scale: f64,
    ell_max: i32,
) -> Result<WeakCouplingReport> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(BcsError::Domain(format!(
            "weak coupling: mu = {mu} has no Fermi circle"
        )));
    }
    if !(lambda_scale.is_finite() && lambda_scale > 0.0) {
        return Err(BcsError::InvalidInput(format!(
            "weak coupling: lambda_scale = {lambda_scale}"
        )));
    }
    if ell_max < 0 {
        return Err(BcsError::InvalidInput(format!(
            "weak coupling: ell_max = {ell_max}"
        )));
    }
    let pf = mu.sqrt();
    let ells: Vec<i32> = match spec.dimension() {
        Dimension::Two => (0..=ell_max).collect(),
        Dimension::Three => vec![0],
    };
    // Odd 2D entries are reported alongside the even ones: the Fermi-circle
    // matrix has every integer harmonic, the pairing problem only admits
    // the even ones.
    let mut fermi_diagonal = Vec::with_capacity(ells.len());
    for &ell in &ells {
        let v = spec.angular_component(ell, pf, pf)?;
        fermi_diagonal.push((ell, lambda_scale * v));
    }

    let even: Vec<&(i32, f64)> = fermi_diagonal
        .iter()
        .filter(|(l, _)| l.rem_euclid(2) == 0)
        .collect();
    let (mut predicted, mut min_v) = (even[0].0, even[0].1);
    for &&(l, v) in &even[1..] {
        if v < min_v {
            predicted = l;
            min_v = v;
        }
    }
    let mut tie_with = None;
    for &&(l, v) in &even {
        if l != predicted && (v - min_v).abs() <= 1e-10 * min_v.abs().max(f64::MIN_POSITIVE) {
            tie_with = Some(l);
            break;
        }
    }

    Ok(WeakCouplingReport {
        predicted,
        fermi_diagonal,
        tie_with,
    })
}

/// Polar tensor grid for the rotation test: a radial Gauss-Legendre rule on
/// [0, p_max] times `n_angles` uniform angles. Rotations by multiples of
/// 2 pi / n_angles act as exact index shifts.
#[derive(Clone, Debug)]
pub struct PolarGrid {
    pub p_max: f64,
    pub radial_nodes: Vec<f64>,
    pub radial_weights: Vec<f64>,
    pub n_angles: usize,
}

impl PolarGrid {
    pub fn new(p_max: f64, n_radial: usize, n_angles: usize) -> Result<Arc<Self>> {
        if !(p_max.is_finite() && p_max > 0.0) {
            return Err(BcsError::InvalidInput(format!(
                "polar grid: p_max = {p_max}"
            )));
        }
        if n_radial < 4 || n_angles < 8 || n_angles % 2 != 0 {
            return Err(BcsError::InvalidInput(format!(
                "polar grid: {n_radial} radial nodes x {n_angles} angles (need >= 4 x even >= 8)"
            )));
        }
        let (radial_nodes, radial_weights) = gauss_legendre_on(n_radial, 0.0, p_max)?;
        Ok(Arc::new(PolarGrid {
            p_max,
            radial_nodes,
            radial_weights,
            n_angles,
        }))
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.n_angles)
            .map(|j| std::f64::consts::TAU * j as f64 / self.n_angles as f64)
            .collect()
    }

    /// Total node count, radial times angular; never zero by construction.
    pub fn len(&self) -> usize {
        self.radial_nodes.len() * self.n_angles
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A real function on a polar tensor grid, stored row-major as
/// `values[i * n_angles + j]` for radial node i and angle index j.
#[derive(Clone, Debug)]
pub struct PolarFunction {
    pub grid: Arc<PolarGrid>,
    pub values: Vec<f64>,
}

impl PolarFunction {
    /// Validated construction from a row-major value vector.
    pub fn new(grid: &Arc<PolarGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(BcsError::InvalidInput(format!(
                "polar function: {} values on a {}-node grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BcsError::InvalidInput(
                "polar function: non-finite value".into(),
            ));
        }
        Ok(PolarFunction {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: &Arc<PolarGrid>, f: F) -> Result<Self> {
        let angles = grid.angles();
        let mut values = Vec::with_capacity(grid.len());
        for &p in &grid.radial_nodes {
            for &phi in &angles {
                let v = f(p, phi);
                if !v.is_finite() {
                    return Err(BcsError::InvalidInput(format!(
                        "polar function: non-finite value at p = {p}, phi = {phi}"
                    )));
                }
                values.push(v);
            }
        }
        Ok(PolarFunction {
            grid: Arc::clone(grid),
            values,
        })
    }
}

/// Quadratic forms of `K_T^Delta + V` over a rotation sweep of the pair
/// wavefunction alpha = -Delta/(2 K_T^Delta). The interaction term is
/// rotation invariant for a radial potential (each angular harmonic only
/// picks up a phase), so the sweep resolves the `K_T^Delta` part alone.
#[derive(Clone, Debug, Serialize)]
pub struct RotationTestReport {
    pub angles: Vec<f64>,
    /// <U(R) alpha, (K_T^Delta + V) U(R) alpha> per sampled angle.
    pub form_values: Vec<f64>,
    /// The K_T^Delta part of each form value.
    pub kt_form_values: Vec<f64>,
    /// The rotation-invariant interaction part.
    pub interaction_value: f64,
    /// Form value at the identity rotation; equals form_values[0] exactly.
    pub baseline: f64,
    pub min_angle: f64,
    pub min_value: f64,
    /// Identity K-form minus the sweep minimum; a strictly positive margin
    /// exhibits a rotation lowering the K_T^Delta form.
    pub margin: f64,
    /// Max minus min of the K-form over the sweep; zero for radial input.
    pub variation: f64,
    /// Angular variation of the input below 1e-10 of its scale: the test
    /// is vacuous (any rotation fixes a radial function).
    pub degenerate_input: bool,
}

/// Rotation test for a (generally non-radial) gap profile on a polar grid.
/// 2D only, T > 0. The pair wavefunction is derived pointwise from `delta`,
/// rotated through all grid angles by index shifts, and scored against the
/// quadratic form of `K_T^Delta + V` built from the same `delta`.
pub fn rotation_test(
    delta: &PolarFunction,
    params: &DispersionParams,
    spec: &PotentialSpec,
) -> Result<RotationTestReport> {
    if spec.dimension() != Dimension::Two {
        return Err(BcsError::Domain(
            "rotation test: defined on 2D polar grids only".into(),
        ));
    }
    if params.temperature <= 0.0 {
        return Err(BcsError::Domain("rotation test: requires T > 0".into()));
    }
    let grid = &delta.grid;
    let nr = grid.radial_nodes.len();
    let na = grid.n_angles;
    if delta.values.len() != nr * na {
        return Err(BcsError::InvalidInput(
            "rotation test: value count does not match the grid".into(),
        ));
    }

    let scale = delta.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut angular_span = 0.0f64;
    for i in 0..nr {
        let row = &delta.values[i * na..(i + 1) * na];
        let (lo, hi) = row
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        angular_span = angular_span.max(hi - lo);
    }
    let degenerate_input = angular_span <= 1e-10 * scale.max(1.0);

    // Pointwise symbol and pair wavefunction tables.
    let mut symbol = vec![0.0; nr * na];
    let mut alpha = vec![0.0; nr * na];
    for i in 0..nr {
        let p = grid.radial_nodes[i];
        for j in 0..na {
            let d = delta.values[i * na + j];
            let k = kt_delta_symbol(params, p, d.abs());
            symbol[i * na + j] = k;
            alpha[i * na + j] = -d / (2.0 * k);
        }
    }

    // K-form per rotation: sum_ij w_i p_i (2 pi / na) K_ij alpha_{i, j-k}^2.
    let dphi = std::f64::consts::TAU / na as f64;
    let kt_form_values: Vec<f64> = (0..na)
        .map(|shift| {
            let mut acc = 0.0;
            for i in 0..nr {
                let m = grid.radial_weights[i] * grid.radial_nodes[i] * dphi;
                for j in 0..na {
                    let src = (j + na - shift) % na;
                    let a = alpha[i * na + src];
                    acc += m * symbol[i * na + j] * a * a;
                }
            }
            acc
        })
        .collect();

    // Interaction term via angular harmonics: for real alpha with DFT
    // coefficients a_n(p), <alpha, V alpha> = 2 pi sum_n int int p q
    // conj(a_n(p)) V^_|n|(p, q) a_n(q) dp dq; a rotation multiplies a_n by
    // a phase, leaving every summand unchanged.
    let half = (na / 2) as i32;
    let mut harmonics = vec![Complex64::new(0.0, 0.0); nr * na];
    for i in 0..nr {
        for (n_idx, n) in (-half..half).enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..na {
                let phase = -(n as f64) * dphi * j as f64;
                acc += alpha[i * na + j] * Complex64::from_polar(1.0, phase);
            }
            harmonics[i * na + n_idx] = acc / na as f64;
        }
    }
    let orders: Vec<i32> = (0..=half).collect();
    let tables: Vec<Vec<f64>> = orders
        .par_iter()
        .map(|&m| {
            let mut tab = vec![0.0; nr * nr];
            for i in 0..nr {
                for i2 in i..nr {
                    let v =
                        spec.angular_component(m, grid.radial_nodes[i], grid.radial_nodes[i2])?;
                    tab[i * nr + i2] = v;
                    tab[i2 * nr + i] = v;
                }
            }
            Ok(tab)
        })
        .collect::<Result<_>>()?;
    let mut interaction_value = 0.0;
    for (n_idx, n) in (-half..half).enumerate() {
        let tab = &tables[n.unsigned_abs() as usize];
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..nr {
            let wi = grid.radial_weights[i] * grid.radial_nodes[i];
            for i2 in 0..nr {
                let wj = grid.radial_weights[i2] * grid.radial_nodes[i2];
                acc += wi * wj * tab[i * nr + i2] * harmonics[i * na + n_idx].conj()
                    * harmonics[i2 * na + n_idx];
            }
        }
        interaction_value += std::f64::consts::TAU * acc.re;
    }

    let form_values: Vec<f64> = kt_form_values
        .iter()
        .map(|k| k + interaction_value)
        .collect();
    let angles = grid.angles();
    let (mut min_idx, mut min_k) = (0, kt_form_values[0]);
    let mut max_k = kt_form_values[0];
    for (j, &k) in kt_form_values.iter().enumerate() {
        if k < min_k {
            min_idx = j;
            min_k = k;
        }
        max_k = max_k.max(k);
    }

    Ok(RotationTestReport {
        baseline: form_values[0],
        min_angle: angles[min_idx],
        min_value: form_values[min_idx],
        margin: kt_form_values[0] - min_k,
        variation: max_k - min_k,
        degenerate_input,
        angles,
        form_values,
        kt_form_values,
        interaction_value,
    })
}
