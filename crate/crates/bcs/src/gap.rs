//! Self-consistent gap equation, Euler-Lagrange states, and free energies.
//!
//! The fixed-point map is `G(Delta)(p) = -(2pi)^{-d/2} int V_l(p,q)
//! Delta(q)/K_T^Delta(q) dq` over the d-dimensional radial measure; a
//! converged `Delta = G(Delta)` is equivalent to `(K_T^Delta + V_l) sigma = 0`
//! with `sigma = -Delta/(2 K_T^Delta)`, so the solved gap is an exact zero
//! mode of its own sector operator. The solver damps the iteration and
//! accelerates the tail with safeguarded one-mode geometric extrapolation,
//! then finishes with Newton steps on `Delta - G(Delta)`: near the critical
//! temperature the plain iteration contracts at rate 1 - O(|T - T_c|/T_c),
//! so its terminal error is the residual amplified by the reciprocal of that
//! margin, while the Newton tail (the Jacobian of `G` is the kernel matrix
//! times a nodewise-analytic diagonal) converges quadratically and leaves no
//! such amplification.

use nalgebra::{DMatrix, DVector};

use crate::error::{BcsError, Result};
use crate::grid::{same_grid, GridFunction};
use crate::potentials::{PotentialSpec, SectorKernel};
use crate::spectral::{
    assemble_operator, kt_delta_symbol, lowest_eigenvalues, symbol_slope, DispersionParams,
};

/// Damped fixed-point controls.
#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Step fraction in (0, 1]; halved on residual increase, at most 4 times.
    pub mixing: f64,
    /// Sup-norm residual target for `Delta - G(Delta)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mixing: 0.5,
            tol: 1e-9,
            max_iter: 10_000,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.mixing > 0.0 && self.mixing <= 1.0) || !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(BcsError::InvalidInput(format!(
                "solver options: mixing = {}, tol = {}",
                self.mixing, self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(BcsError::InvalidInput("solver options: max_iter = 0".into()));
        }
        Ok(())
    }
}

/// A solved (or abandoned) gap profile.
#[derive(Clone, Debug)]
pub struct GapFunction {
    pub ell: i32,
    pub temperature: f64,
    /// Real profile, sign-fixed so the value at the node nearest
    /// sqrt(max(mu, 0)) is nonnegative.
    pub values: GridFunction,
    pub converged: bool,
    pub iterations: usize,
    /// Sup-norm of `G(Delta) - Delta` at the returned iterate.
    pub residual: f64,
}

/// One application of the nonlinear fixed-point map.
pub fn gap_map(
    kernel: &SectorKernel,
    params: &DispersionParams,
    delta: &GridFunction,
) -> Result<GridFunction> {
    if !same_grid(&delta.grid, &kernel.grid) {
        return Err(BcsError::InvalidInput(
            "gap_map: delta lives on a different grid".into(),
        ));
    }
    if params.temperature <= 0.0 {
        return Err(BcsError::Domain(
            "gap_map: requires T > 0 (K_T^Delta may vanish at T = 0)".into(),
        ));
    }
    let grid = &kernel.grid;
    let n = grid.len();
    let mut u = DVector::zeros(n);
    for j in 0..n {
        let d = delta.values[j];
        let k = kt_delta_symbol(params, grid.nodes[j], d.abs());
        u[j] = grid.sym_factor(j) * d / k;
    }
    let w = &kernel.matrix * u;
    let values: Vec<f64> = (0..n).map(|i| -w[i] / grid.sym_factor(i)).collect();
    GridFunction::new(grid.clone(), values)
}

/// Cap on Newton steps in the refinement stage; quadratic convergence uses
/// far fewer, the cap only bounds pathological backtracking sequences.
const NEWTON_MAX_STEPS: usize = 40;

/// d/dDelta of `Delta / K_T^Delta(p)` at fixed p; strictly positive for
/// T > 0 since E K'(E)/K(E) = 1 - 2y/sinh(2y) < 1 at y = E/(2T).
fn pair_slope(params: &DispersionParams, p: f64, delta: f64) -> f64 {
    let k = kt_delta_symbol(params, p, delta.abs());
    if delta == 0.0 {
        return 1.0 / k;
    }
    let x = p * p - params.mu;
    let e = x.hypot(delta);
    (1.0 - delta * delta * symbol_slope(e, params.temperature) / (e * k)) / k
}

fn sup_diff(a: &GridFunction, b: &GridFunction) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .fold(0.0f64, |m, (&x, &y)| m.max((x - y).abs()))
}

/// Default start: the ground eigenvector of the linear sector operator,
/// mapped out of symmetrized coordinates and scaled to sup-norm
/// 0.1 max(1, |mu|). Near T_c the nontrivial branch is tangent to this
/// eigenvector.
fn default_init(kernel: &SectorKernel, params: &DispersionParams) -> Result<GridFunction> {
    let a = assemble_operator(params, kernel, None)?;
    let pairs = lowest_eigenvalues(&a, 1)?;
    let mut f = GridFunction::from_sym_coords(&kernel.grid, &pairs.eigenvectors[0])?;
    let sup = f.sup_norm();
    if sup == 0.0 {
        return Err(BcsError::Numeric("default_init: zero eigenvector".into()));
    }
    let anchor = kernel.grid.nearest_node(params.mu.max(0.0).sqrt());
    let sign = if f.values[anchor] < 0.0 { -1.0 } else { 1.0 };
    let scale = sign * 0.1 * params.mu.abs().max(1.0) / sup;
    for v in &mut f.values {
        *v *= scale;
    }
    Ok(f)
}

/// Solve `Delta = G(Delta)` by damped iteration with safeguarded geometric
/// extrapolation. Non-convergence within `max_iter` is reported in the
/// returned flags, not as an error; NaN contamination is a divergence error
/// carrying the recent residual trail.
pub fn solve_gap(
    kernel: &SectorKernel,
    params: &DispersionParams,
    init: Option<&GridFunction>,
    opts: &SolverOptions,
) -> Result<GapFunction> {
    opts.validate()?;
    if params.temperature <= 0.0 {
        return Err(BcsError::Domain("solve_gap: requires T > 0".into()));
    }
    let mut cur = match init {
        Some(f) => {
            if !same_grid(&f.grid, &kernel.grid) {
                return Err(BcsError::InvalidInput(
                    "solve_gap: init lives on a different grid".into(),
                ));
            }
            f.clone()
        }
        None => default_init(kernel, params)?,
    };

    let mut mixing = opts.mixing;
    let mut halvings = 0u32;
    let mut prev_residual = f64::INFINITY;
    let mut prev_step: Option<DVector<f64>> = None;
    let mut rate = f64::NAN;
    let mut trail: Vec<f64> = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut checkpoint = f64::INFINITY;
    let stall_floor = 1e-4 * params.mu.abs().max(1.0);

    for iter in 1..=opts.max_iter {
        iterations = iter;
        let image = gap_map(kernel, params, &cur)?;
        residual = sup_diff(&image, &cur);
        if trail.len() == 32 {
            trail.remove(0);
        }
        trail.push(residual);
        if !residual.is_finite() {
            return Err(BcsError::Divergence {
                iterations: iter,
                trail,
            });
        }
        if residual <= opts.tol {
            break;
        }
        // A small residual shrinking by less than a factor of 1/0.6 per 32
        // iterations marks the slow near-critical mode; the Newton stage
        // below finishes faster than the damped tail. Growing residuals
        // (the iterate still climbing toward a distant branch) fall through.
        if iter % 32 == 0 {
            if iter >= 64 && residual <= stall_floor && residual > 0.6 * checkpoint
                && residual <= checkpoint
            {
                break;
            }
            checkpoint = residual;
        }
        if residual > prev_residual && halvings < 4 {
            mixing *= 0.5;
            halvings += 1;
        }
        prev_residual = residual;

        let step = DVector::from_iterator(
            cur.values.len(),
            image
                .values
                .iter()
                .zip(&cur.values)
                .map(|(&g, &c)| mixing * (g - c)),
        );
        if let Some(dp) = &prev_step {
            let denom = dp.dot(dp);
            if denom > 0.0 {
                rate = step.dot(dp) / denom;
            }
        }
        let mut next_values: Vec<f64> = cur
            .values
            .iter()
            .zip(step.iter())
            .map(|(&c, &s)| c + s)
            .collect();

        // Extrapolate x + d r/(1-r) when consecutive steps look geometric;
        // keep the jump only if it beats the current residual.
        let mut jumped = false;
        if iter % 8 == 0 && prev_step.is_some() && rate > 0.0 && rate < 1.0 - 1e-12 {
            let gain = rate / (1.0 - rate);
            let cand_values: Vec<f64> = next_values
                .iter()
                .zip(step.iter())
                .map(|(&x, &s)| x + s * gain)
                .collect();
            if cand_values.iter().all(|v| v.is_finite()) {
                let cand = GridFunction::new(kernel.grid.clone(), cand_values)?;
                let cand_image = gap_map(kernel, params, &cand)?;
                let cand_residual = sup_diff(&cand_image, &cand);
                if cand_residual.is_finite() && cand_residual < residual {
                    next_values = cand.values;
                    prev_residual = cand_residual;
                    jumped = true;
                }
            }
        }
        if !next_values.iter().all(|v| v.is_finite()) {
            return Err(BcsError::Divergence {
                iterations: iter,
                trail,
            });
        }
        prev_step = if jumped { None } else { Some(step) };
        cur = GridFunction::new(kernel.grid.clone(), next_values)?;
    }

    // Newton refinement on F = Delta - G(Delta). The Jacobian is exact,
    // J_ik = delta_ik + (s_k/s_i) M_ik d(Delta_k/K_k)/dDelta_k with s the
    // symmetrization diagonal, so each step costs one LU solve. A step is
    // kept only if it strictly lowers the residual, so the stage never
    // worsens the iterate it received.
    let n = kernel.grid.len();
    for _ in 0..NEWTON_MAX_STEPS {
        let image = gap_map(kernel, params, &cur)?;
        residual = sup_diff(&image, &cur);
        if !residual.is_finite() || residual <= 1e-6 * opts.tol {
            break;
        }
        let mut jac = DMatrix::zeros(n, n);
        for col in 0..n {
            let slope = pair_slope(params, kernel.grid.nodes[col], cur.values[col]);
            let scaled = kernel.grid.sym_factor(col) * slope;
            for row in 0..n {
                jac[(row, col)] = kernel.matrix[(row, col)] * scaled / kernel.grid.sym_factor(row);
            }
            jac[(col, col)] += 1.0;
        }
        let rhs = DVector::from_iterator(
            n,
            image.values.iter().zip(&cur.values).map(|(&g, &c)| g - c),
        );
        let step = match jac.lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => break,
        };
        let mut scale = 1.0f64;
        let mut accepted = false;
        for _ in 0..8 {
            let cand_values: Vec<f64> = (0..n)
                .map(|i| cur.values[i] + scale * step[i])
                .collect();
            if cand_values.iter().all(|v| v.is_finite()) {
                let cand = GridFunction::new(kernel.grid.clone(), cand_values)?;
                let cand_image = gap_map(kernel, params, &cand)?;
                let cand_residual = sup_diff(&cand_image, &cand);
                if cand_residual.is_finite() && cand_residual < residual {
                    cur = cand;
                    residual = cand_residual;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        iterations += 1;
        if !accepted || scale * step.amax() <= 1e-3 * opts.tol {
            break;
        }
    }
    let converged = residual <= opts.tol;

    let anchor = kernel.grid.nearest_node(params.mu.max(0.0).sqrt());
    if cur.values[anchor] < 0.0 {
        for v in &mut cur.values {
            *v = -*v;
        }
    }
    Ok(GapFunction {
        ell: kernel.ell,
        temperature: params.temperature,
        values: cur,
        converged,
        iterations,
        residual,
    })
}

/// Discretized L2 norm of `(K_T^Delta + V_l) sigma` at the solved gap;
/// equals half the fixed-point residual in the measure norm.
pub fn el_residual(
    kernel: &SectorKernel,
    params: &DispersionParams,
    gap: &GapFunction,
) -> Result<f64> {
    let sigma = pair_profile(params, gap)?;
    let a = assemble_operator(params, kernel, Some(&gap.values))?;
    Ok((a * sigma.sym_coords()).norm())
}

/// Pair amplitude sigma(p) = -Delta(p) / (2 K_T^Delta(p)) of a gap profile.
pub fn pair_profile(params: &DispersionParams, gap: &GapFunction) -> Result<GridFunction> {
    let grid = &gap.values.grid;
    let values: Vec<f64> = (0..grid.len())
        .map(|i| {
            let d = gap.values.values[i];
            -d / (2.0 * kt_delta_symbol(params, grid.nodes[i], d.abs()))
        })
        .collect();
    GridFunction::new(grid.clone(), values)
}

/// A quasi-free pairing state on the radial grid: occupation gamma and pair
/// amplitude sigma, admissible when `sigma^2 <= gamma (1 - gamma)` nodewise.
#[derive(Clone, Debug)]
pub struct BcsState {
    pub gamma: GridFunction,
    pub sigma: GridFunction,
    pub ell: i32,
    pub temperature: f64,
    /// E(p) = sqrt((p^2-mu)^2 + Delta(p)^2), present when the state came
    /// from a solved gap.
    pub quasiparticle_energy: Option<GridFunction>,
}

impl BcsState {
    /// Validated manual construction (perturbation studies).
    pub fn new(
        gamma: GridFunction,
        sigma: GridFunction,
        ell: i32,
        temperature: f64,
    ) -> Result<Self> {
        if !same_grid(&gamma.grid, &sigma.grid) {
            return Err(BcsError::InvalidInput(
                "BcsState: gamma and sigma on different grids".into(),
            ));
        }
        for i in 0..gamma.grid.len() {
            let g = gamma.values[i];
            let s = sigma.values[i];
            if !(-1e-12..=1.0 + 1e-12).contains(&g) {
                return Err(BcsError::Admissibility(format!(
                    "gamma = {g} outside [0, 1] at node {i}"
                )));
            }
            if s * s > g * (1.0 - g) + 1e-12 {
                return Err(BcsError::Admissibility(format!(
                    "sigma^2 = {} exceeds gamma(1-gamma) = {} at node {i}",
                    s * s,
                    g * (1.0 - g)
                )));
            }
        }
        Ok(BcsState {
            gamma,
            sigma,
            ell,
            temperature,
            quasiparticle_energy: None,
        })
    }
}

/// Euler-Lagrange state of a gap profile:
/// gamma = 1/2 - (p^2-mu)/(2 K_T^Delta), sigma = -Delta/(2 K_T^Delta).
pub fn construct_state(gap: &GapFunction, params: &DispersionParams) -> Result<BcsState> {
    if params.temperature <= 0.0 {
        return Err(BcsError::Domain("construct_state: requires T > 0".into()));
    }
    let grid = &gap.values.grid;
    let n = grid.len();
    let mut gamma = Vec::with_capacity(n);
    let mut energy = Vec::with_capacity(n);
    for i in 0..n {
        let p = grid.nodes[i];
        let k = p * p - params.mu;
        let d = gap.values.values[i];
        let big_k = kt_delta_symbol(params, p, d.abs());
        gamma.push(0.5 - k / (2.0 * big_k));
        energy.push(k.hypot(d));
    }
    let gamma = GridFunction::new(grid.clone(), gamma)?;
    let sigma = pair_profile(params, gap)?;
    let mut state = BcsState::new(gamma, sigma, gap.ell, params.temperature)?;
    state.quasiparticle_energy = Some(GridFunction::new(grid.clone(), energy)?);
    Ok(state)
}

/// Occupation of the normal state at (mu, T), written through tanh for
/// overflow safety: (1 + e^{k/T})^{-1} = (1 - tanh(k/(2T)))/2.
fn normal_occupation(params: &DispersionParams, p: f64) -> f64 {
    0.5 * (1.0 - ((p * p - params.mu) / (2.0 * params.temperature)).tanh())
}

/// Von Neumann entropy density of the 2x2 shell state with eigenvalues
/// lambda_pm = 1/2 +- sqrt((gamma - 1/2)^2 + sigma^2), under the
/// half-trace normalization (lambda_+ + lambda_- = 1).
fn shell_entropy(gamma: f64, sigma: f64) -> Result<f64> {
    let radius = (gamma - 0.5).hypot(sigma);
    let lo = 0.5 - radius;
    let hi = 0.5 + radius;
    if lo < -1e-12 || hi > 1.0 + 1e-12 {
        return Err(BcsError::Admissibility(format!(
            "shell eigenvalues ({lo}, {hi}) outside [0, 1]"
        )));
    }
    let xlnx = |x: f64| {
        let x = x.clamp(0.0, 1.0);
        if x == 0.0 {
            0.0
        } else {
            x * x.ln()
        }
    };
    Ok(-(xlnx(lo) + xlnx(hi)))
}

/// Free energy of `state` minus the free energy of the normal state at the
/// same (mu, T): kinetic difference + <sigma, V_l sigma> - T (S - S_0).
pub fn free_energy_relative(
    state: &BcsState,
    kernel: &SectorKernel,
    params: &DispersionParams,
) -> Result<f64> {
    if !same_grid(&state.gamma.grid, &kernel.grid) {
        return Err(BcsError::InvalidInput(
            "free_energy_relative: state lives on a different grid".into(),
        ));
    }
    if params.temperature <= 0.0 {
        return Err(BcsError::Domain(
            "free_energy_relative: requires T > 0".into(),
        ));
    }
    let grid = &kernel.grid;
    let t = params.temperature;
    let mut kinetic = 0.0;
    let mut entropy_diff = 0.0;
    for i in 0..grid.len() {
        let p = grid.nodes[i];
        let m = grid.cell_measure(i);
        let k = p * p - params.mu;
        let g = state.gamma.values[i];
        let s = state.sigma.values[i];
        let g0 = normal_occupation(params, p);
        kinetic += m * k * (g - g0);
        entropy_diff += m * (shell_entropy(g, s)? - shell_entropy(g0, 0.0)?);
    }
    let v = state.sigma.sym_coords();
    let interaction = (&kernel.matrix * &v).dot(&v);
    Ok(kinetic + interaction - t * entropy_diff)
}

/// Evaluate the converged gap off the grid through one application of the
/// integral map (Nystrom interpolation): well-defined at any p >= 0 because
/// the fixed point extends through the kernel integral.
pub fn gap_value_at(
    spec: &PotentialSpec,
    kernel: &SectorKernel,
    params: &DispersionParams,
    gap: &GapFunction,
    p: f64,
) -> Result<f64> {
    if !p.is_finite() || p < 0.0 {
        return Err(BcsError::InvalidInput(format!("gap_value_at: p = {p}")));
    }
    let grid = &kernel.grid;
    let c = grid.dimension.fourier_const();
    let mut acc = 0.0;
    for j in 0..grid.len() {
        let q = grid.nodes[j];
        let d = gap.values.values[j];
        let k = kt_delta_symbol(params, q, d.abs());
        acc += grid.cell_measure(j) * spec.angular_kernel(kernel.ell, p, q)? * d / k;
    }
    Ok(-c * acc)
}

/// Sup-norm of the gap as a function on [0, p_max]: every nodal local
/// maximum of |Delta| is refined by golden-section search on the Nystrom
/// interpolant, making the result stable under grid refinement (the raw
/// node maximum moves by O(spacing^2) between grids).
pub fn gap_sup_norm(
    spec: &PotentialSpec,
    kernel: &SectorKernel,
    params: &DispersionParams,
    gap: &GapFunction,
) -> Result<f64> {
    let grid = &kernel.grid;
    let n = grid.len();
    let node_abs: Vec<f64> = gap.values.values.iter().map(|v| v.abs()).collect();
    let mut best = node_abs.iter().copied().fold(0.0f64, f64::max);
    if best == 0.0 {
        return Ok(0.0);
    }
    let eval = |p: f64| gap_value_at(spec, kernel, params, gap, p).map(f64::abs);
    for i in 0..n {
        let left_ok = i == 0 || node_abs[i] >= node_abs[i - 1];
        let right_ok = i + 1 == n || node_abs[i] >= node_abs[i + 1];
        if !(left_ok && right_ok) || node_abs[i] < 0.5 * best {
            continue;
        }
        let mut a = if i == 0 { 0.0 } else { grid.nodes[i - 1] };
        let mut b = if i + 1 == n {
            grid.p_max
        } else {
            grid.nodes[i + 1]
        };
        // Golden-section ascent on |Delta|; the bracket width shrinks by
        // the golden ratio each step.
        let phi = 0.5 * (5.0f64.sqrt() - 1.0);
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let mut f1 = eval(x1)?;
        let mut f2 = eval(x2)?;
        while b - a > 1e-8 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = eval(x2)?;
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = eval(x1)?;
            }
        }
        best = best.max(f1).max(f2);
    }
    Ok(best)
}
