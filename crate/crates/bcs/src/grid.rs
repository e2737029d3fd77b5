//! Radial momentum grids and grid functions.
//!
//! A grid carries composite Gauss-Legendre panels on (0, p_max). For mu > 0
//! the panel boundaries are refined geometrically toward the Fermi radius
//! sqrt(mu) so that the sharp structure of 1/K_T is resolved; sqrt(mu) itself
//! is always a panel boundary in that case. Panel boundaries depend only on
//! (p_max, mu), never on n_points, so doubling n_points refines every panel
//! in place and discretized quantities converge cleanly.

use std::sync::Arc;

use crate::error::{BcsError, Result};
use crate::quadrature::gauss_legendre_on;

/// Spatial dimension of the model. Radial integrals carry the surface
/// measure of the sphere in this dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Dimension {
    Two,
    Three,
}

impl Dimension {
    /// Surface measure density: 2*pi*p in 2D, 4*pi*p^2 in 3D.
    pub fn measure_density(self, p: f64) -> f64 {
        match self {
            Dimension::Two => 2.0 * std::f64::consts::PI * p,
            Dimension::Three => 4.0 * std::f64::consts::PI * p * p,
        }
    }

    /// Convolution constant (2*pi)^(-d/2) of the symmetric Fourier
    /// convention.
    pub fn fourier_const(self) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        match self {
            Dimension::Two => 1.0 / two_pi,
            Dimension::Three => 1.0 / two_pi.powf(1.5),
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Dimension::Two => 2,
            Dimension::Three => 3,
        }
    }
}

/// Panel layout used by a grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum GridScheme {
    /// Uniform composite panels (mu <= 0: no Fermi surface to resolve).
    GaussLegendreComposite,
    /// Uniform panels plus geometric refinement toward sqrt(mu).
    GaussLegendrePanelsAtFermi,
}

/// Radial quadrature grid on (0, p_max). Nodes exclude both endpoints.
#[derive(Clone, Debug)]
pub struct RadialGrid {
    pub dimension: Dimension,
    pub p_max: f64,
    pub scheme: GridScheme,
    /// Panel boundaries, strictly increasing, boundaries[0] = 0,
    /// boundaries.last() = p_max.
    pub boundaries: Vec<f64>,
    /// Quadrature nodes, strictly increasing, all in (0, p_max).
    pub nodes: Vec<f64>,
    /// Plain dr-weights matching `nodes`.
    pub weights: Vec<f64>,
    /// Smallest per-panel node count; the rule is exact for polynomials in r
    /// up to degree 2 * min_panel_nodes - 1 on every panel.
    pub min_panel_nodes: usize,
}

impl RadialGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// w_i times the surface measure density at node i: the weight of node i
    /// in d-dimensional integrals of radial functions.
    pub fn cell_measure(&self, i: usize) -> f64 {
        self.weights[i] * self.dimension.measure_density(self.nodes[i])
    }

    /// sqrt of `cell_measure`, the diagonal of the symmetrization map.
    pub fn sym_factor(&self, i: usize) -> f64 {
        self.cell_measure(i).sqrt()
    }

    /// Index of the node nearest to momentum `p`.
    pub fn nearest_node(&self, p: f64) -> usize {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (i, &x) in self.nodes.iter().enumerate() {
            let d = (x - p).abs();
            if d < dist {
                dist = d;
                best = i;
            }
        }
        best
    }
}

/// Grids are interchangeable when they were built from identical inputs;
/// node lists then agree bitwise.
pub fn same_grid(a: &RadialGrid, b: &RadialGrid) -> bool {
    std::ptr::eq(a, b)
        || (a.dimension == b.dimension
            && a.p_max == b.p_max
            && a.nodes.len() == b.nodes.len()
            && a.nodes == b.nodes)
}

/// Default momentum cutoff: max(8, 4*sqrt(|mu| + 1)) scaled by the inverse
/// length scale of the potential.
pub fn default_p_max(mu: f64, length_scale: f64) -> f64 {
    8.0f64.max(4.0 * (mu.abs() + 1.0).sqrt()) / length_scale
}

/// Build a radial grid with `n_points` total nodes on (0, p_max).
pub fn build_grid(
    p_max: f64,
    n_points: usize,
    mu: f64,
    dimension: Dimension,
) -> Result<Arc<RadialGrid>> {
    if !p_max.is_finite() || !mu.is_finite() {
        return Err(BcsError::InvalidInput(
            "build_grid: non-finite p_max or mu".into(),
        ));
    }
    if p_max <= 0.0 || p_max * p_max <= mu.abs() {
        return Err(BcsError::InvalidInput(format!(
            "build_grid: p_max = {p_max} must satisfy p_max^2 > |mu| = {}",
            mu.abs()
        )));
    }
    if n_points < 16 {
        return Err(BcsError::InvalidInput(format!(
            "build_grid: n_points = {n_points} < 16"
        )));
    }

    let refine = mu > 0.0;
    // Shrink refinement depth, then base panel count, until every panel can
    // hold at least 8 nodes: per-panel order matters more than panel count.
    let mut base_panels = 8usize;
    let mut depth = if refine { 4u32 } else { 0 };
    let boundaries = loop {
        let b = panel_boundaries(p_max, mu, base_panels, depth);
        if 8 * (b.len() - 1) <= n_points {
            break b;
        }
        if depth > 0 {
            depth -= 1;
        } else if base_panels > 2 {
            base_panels -= 1;
        } else {
            break panel_boundaries(p_max, mu, 2, 0);
        }
    };

    let n_panels = boundaries.len() - 1;
    let lengths: Vec<f64> = boundaries.windows(2).map(|w| w[1] - w[0]).collect();
    let counts = apportion(n_points, &lengths);

    let mut nodes = Vec::with_capacity(n_points);
    let mut weights = Vec::with_capacity(n_points);
    for k in 0..n_panels {
        let (x, w) = gauss_legendre_on(counts[k], boundaries[k], boundaries[k + 1])?;
        nodes.extend(x);
        weights.extend(w);
    }

    let scheme = if refine && depth > 0 {
        GridScheme::GaussLegendrePanelsAtFermi
    } else {
        GridScheme::GaussLegendreComposite
    };
    Ok(Arc::new(RadialGrid {
        dimension,
        p_max,
        scheme,
        boundaries,
        min_panel_nodes: counts.iter().copied().min().unwrap_or(0),
        nodes,
        weights,
    }))
}

/// Panel boundaries: `base_panels` uniform panels on [0, p_max], with a
/// geometric cluster sqrt(mu) * (1 +/- 2^-k), k = 1..=depth, replacing the
/// uniform boundaries that fall inside the cluster span.
fn panel_boundaries(p_max: f64, mu: f64, base_panels: usize, depth: u32) -> Vec<f64> {
    let mut b: Vec<f64> = Vec::new();
    let pf = if mu > 0.0 { mu.sqrt() } else { -1.0 };
    let mut cluster: Vec<f64> = Vec::new();
    if mu > 0.0 && depth > 0 {
        for k in 1..=depth {
            let off = 0.5f64.powi(k as i32);
            cluster.push(pf * (1.0 - off));
            cluster.push(pf * (1.0 + off));
        }
        cluster.push(pf);
        cluster.retain(|&x| x > 0.0 && x < p_max);
        cluster.sort_by(f64::total_cmp);
    }
    let (span_lo, span_hi) = if cluster.is_empty() {
        (f64::INFINITY, f64::NEG_INFINITY)
    } else {
        (cluster[0], *cluster.last().unwrap())
    };
    for i in 0..=base_panels {
        let x = p_max * i as f64 / base_panels as f64;
        if x < span_lo - 1e-12 || x > span_hi + 1e-12 {
            b.push(x);
        }
    }
    b.extend(cluster);
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Equal-count apportionment of `total` nodes over panels; leftovers go to
/// the longest panels first. Doubling `total` doubles every panel's count,
/// so refinement is nested.
fn apportion(total: usize, lengths: &[f64]) -> Vec<usize> {
    let n = lengths.len();
    let base = total / n;
    let extra = total % n;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| lengths[j].total_cmp(&lengths[i]).then(i.cmp(&j)));
    let mut counts = vec![base; n];
    for &i in order.iter().take(extra) {
        counts[i] += 1;
    }
    counts
}

/// Real-valued function sampled on the nodes of a grid.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(BcsError::InvalidInput(format!(
                "grid function: {} values on a {}-node grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BcsError::InvalidInput(
                "grid function: non-finite value".into(),
            ));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: &Arc<RadialGrid>, f: F) -> Result<Self> {
        let values = grid.nodes.iter().map(|&p| f(p)).collect();
        GridFunction::new(Arc::clone(grid), values)
    }

    pub fn zero(grid: &Arc<RadialGrid>) -> Self {
        GridFunction {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
        }
    }

    /// Coordinates in the symmetrized (isometric) basis: v_i = sym_factor * f_i.
    pub fn sym_coords(&self) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_iterator(
            self.values.len(),
            self.values
                .iter()
                .enumerate()
                .map(|(i, &v)| self.grid.sym_factor(i) * v),
        )
    }

    /// Inverse of `sym_coords`.
    pub fn from_sym_coords(grid: &Arc<RadialGrid>, v: &nalgebra::DVector<f64>) -> Result<Self> {
        if v.len() != grid.len() {
            return Err(BcsError::InvalidInput(
                "from_sym_coords: length mismatch".into(),
            ));
        }
        let values = v
            .iter()
            .enumerate()
            .map(|(i, &x)| x / grid.sym_factor(i))
            .collect();
        GridFunction::new(Arc::clone(grid), values)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// L^2 norm under the d-dimensional radial measure.
    pub fn l2_norm(&self) -> f64 {
        inner_product(self, self).expect("same grid").sqrt()
    }
}

/// Discrete L^2 pairing sum_i w_i mu(p_i) f_i g_i under the grid's
/// d-dimensional measure.
pub fn inner_product(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    if !same_grid(&f.grid, &g.grid) {
        return Err(BcsError::InvalidInput(
            "inner_product: functions live on different grids".into(),
        ));
    }
    Ok(f.values
        .iter()
        .zip(&g.values)
        .enumerate()
        .map(|(i, (a, b))| f.grid.cell_measure(i) * a * b)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn builder_rejects_bad_inputs() {
        assert!(build_grid(2.0, 64, 5.0, Dimension::Two).is_err());
        assert!(build_grid(-1.0, 64, 0.0, Dimension::Two).is_err());
        assert!(build_grid(8.0, 8, 1.0, Dimension::Two).is_err());
        assert!(build_grid(f64::NAN, 64, 1.0, Dimension::Two).is_err());
    }

    #[test]
    fn nodes_and_weights_are_well_formed() {
        let g = build_grid(8.0, 256, 1.0, Dimension::Two).unwrap();
        assert_eq!(g.len(), 256);
        assert!(g.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(g.nodes.iter().all(|&p| p > 0.0 && p < 8.0));
        assert!(g.weights.iter().all(|&w| w > 0.0));
        assert_eq!(g.scheme, GridScheme::GaussLegendrePanelsAtFermi);
    }

    #[test]
    fn fermi_radius_is_a_panel_boundary() {
        for mu in [0.25, 1.0, 4.0] {
            let g = build_grid(12.0, 256, mu, Dimension::Two).unwrap();
            let pf = mu.sqrt();
            assert!(
                g.boundaries.iter().any(|&b| (b - pf).abs() < 1e-14),
                "sqrt(mu) = {pf} missing from {:?}",
                g.boundaries
            );
        }
    }

    #[test]
    fn negative_mu_uses_plain_composite_scheme() {
        let g = build_grid(8.0, 64, -1.0, Dimension::Two).unwrap();
        assert_eq!(g.scheme, GridScheme::GaussLegendreComposite);
        assert_eq!(g.boundaries.len(), 9);
    }

    #[test]
    fn small_grids_still_get_at_least_eight_nodes_per_panel() {
        let g = build_grid(8.0, 16, 1.0, Dimension::Two).unwrap();
        assert_eq!(g.len(), 16);
        assert!(g.min_panel_nodes >= 8);
    }

    #[test]
    fn quadrature_exact_for_polynomials_up_to_scheme_degree() {
        let g = build_grid(8.0, 128, 1.0, Dimension::Two).unwrap();
        let degree = 2 * g.min_panel_nodes - 1;
        for k in 0..=degree.min(9) {
            let num: f64 = g
                .nodes
                .iter()
                .zip(&g.weights)
                .map(|(p, w)| w * p.powi(k as i32))
                .sum();
            let exact = 8.0f64.powi(k as i32 + 1) / (k as f64 + 1.0);
            assert_relative_eq!(num, exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn radial_gaussian_integrals_match_closed_forms() {
        // int 2 pi p exp(-p^2) dp over (0, inf) = pi.
        let g2 = build_grid(8.0, 128, 1.0, Dimension::Two).unwrap();
        let f2 = GridFunction::from_fn(&g2, |p| (-p * p).exp()).unwrap();
        let one = GridFunction::from_fn(&g2, |_| 1.0).unwrap();
        let v2: f64 = inner_product(&f2, &one).unwrap();
        assert_relative_eq!(v2, std::f64::consts::PI, max_relative = 1e-12);

        // int 4 pi p^2 exp(-p^2) dp over (0, inf) = pi^(3/2).
        let g3 = build_grid(8.0, 128, 1.0, Dimension::Three).unwrap();
        let f3 = GridFunction::from_fn(&g3, |p| (-p * p).exp()).unwrap();
        let one3 = GridFunction::from_fn(&g3, |_| 1.0).unwrap();
        let v3: f64 = inner_product(&f3, &one3).unwrap();
        assert_relative_eq!(v3, std::f64::consts::PI.powf(1.5), max_relative = 1e-12);
    }

    #[test]
    fn doubling_n_points_keeps_panel_boundaries() {
        let a = build_grid(8.0, 128, 1.0, Dimension::Two).unwrap();
        let b = build_grid(8.0, 256, 1.0, Dimension::Two).unwrap();
        assert_eq!(a.boundaries, b.boundaries);
    }

    #[test]
    fn inner_product_rejects_mismatched_grids() {
        let a = build_grid(8.0, 64, 1.0, Dimension::Two).unwrap();
        let b = build_grid(8.0, 72, 1.0, Dimension::Two).unwrap();
        let fa = GridFunction::zero(&a);
        let fb = GridFunction::zero(&b);
        assert!(inner_product(&fa, &fb).is_err());
    }

    #[test]
    fn symmetrization_round_trips() {
        let g = build_grid(8.0, 64, 1.0, Dimension::Two).unwrap();
        let f = GridFunction::from_fn(&g, |p| (1.0 + p).recip()).unwrap();
        let back = GridFunction::from_sym_coords(&g, &f.sym_coords()).unwrap();
        for (a, b) in f.values.iter().zip(&back.values) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }
}
