//! Damped Picard iteration for the nonlinear transmission problem: each step
//! freezes the coefficients at the current iterate, solves the linear
//! problem for the correction psi, and maps `phi -> psi + phi_0`.
//! Divergence detection stands in for the compactness argument that
//! guarantees a fixed point for small perturbations.

use crate::duct::{dirichlet_g, BackgroundPotentials, WallPerturbation};
use crate::error::{Error, Result};
use crate::gas::{flux_a, Layer};
use crate::grid::{LagrangianGrid, NodeField};
use crate::transmission::{assemble_coefficients, assemble_system, solve, weak_flux_residual};

/// Iteration tolerances and limits.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Sup-norm iterate delta required for convergence.
    pub tol_fp: f64,
    /// Relative residual of the inner linear solves.
    pub tol_lin: f64,
    /// Nonlinear weak residual required for convergence.
    pub tol_res: f64,
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { tol_fp: 1e-11, tol_lin: 1e-10, tol_res: 1e-9, max_iterations: 100 }
    }
}

/// Starting iterate of the fixed-point loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// The connector potential phi_0 (the natural center of the iteration set).
    Connector,
    /// The left background potential phi_l (used by the uniqueness probe).
    LeftBackground,
}

/// One line of the per-iteration log.
#[derive(Debug, Clone, Copy)]
pub struct IterRecord {
    pub step: usize,
    pub delta: f64,
    pub residual: f64,
    pub lambda_min: f64,
    pub damping: f64,
}

/// Converged iterate plus diagnostics.
#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub phi: NodeField,
    pub iterations: Vec<IterRecord>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Discrete C1 distance of the converged iterate from phi_l.
    pub km_deviation: f64,
}

/// Dirichlet values of phi on the whole truncated boundary: g + phi_0.
pub fn boundary_values(
    grid: &LagrangianGrid,
    wp: &WallPerturbation,
    bg: &BackgroundPotentials,
) -> Vec<Option<f64>> {
    let mut bc = vec![None; grid.node_count()];
    for j in 0..grid.nrows() {
        for i in 0..grid.ncols() {
            if grid.is_boundary(i, j) {
                let (x, y) = (grid.xs[i], grid.ys[j]);
                let layer = grid.row_layer(j);
                bc[grid.node_index(i, j)] =
                    Some(dirichlet_g(x, y, wp, &bg.ff) + bg.phi_0(x, y, layer));
            }
        }
    }
    bc
}

/// Connector potential sampled on the grid nodes.
pub fn connector_field(grid: &LagrangianGrid, bg: &BackgroundPotentials) -> NodeField {
    NodeField::from_fn(grid, |x, y| {
        bg.phi_0(x, y, if y >= 0.0 { Layer::Top } else { Layer::Bottom })
    })
}

/// Left background potential sampled on the grid nodes.
pub fn left_background_field(grid: &LagrangianGrid, bg: &BackgroundPotentials) -> NodeField {
    NodeField::from_fn(grid, |_, y| {
        bg.phi_l(y, if y >= 0.0 { Layer::Top } else { Layer::Bottom })
    })
}

/// Max weak residual of `div A(grad phi) = 0` over unconstrained nodes.
pub fn nonlinear_residual(
    phi: &NodeField,
    grid: &LagrangianGrid,
    bg: &BackgroundPotentials,
    bc: &[Option<f64>],
) -> Result<f64> {
    let res = weak_flux_residual(grid, |ci, cj, qp| {
        let layer = grid.cell_layer(cj);
        let q = grid.gradient_at_quadrature(phi, ci, cj, qp);
        flux_a(&q, bg.layer_invariants(layer), &bg.gc)
            .map_err(|e| Error::IterateInadmissible { x: qp.x, y: qp.y, source: Box::new(e) })
    })?;
    Ok(res
        .iter()
        .enumerate()
        .filter(|(node, _)| bc[*node].is_none())
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max))
}

/// Discrete C1 surrogate of the iteration-set radius: max over nodes of
/// |phi - phi_l| plus max over quadrature points of |D(phi - phi_l)|,
/// taken per half so the interface row never mixes layers.
pub fn km_deviation(phi: &NodeField, grid: &LagrangianGrid, bg: &BackgroundPotentials) -> f64 {
    let phi_l = left_background_field(grid, bg);
    let sup = phi.max_abs_diff(&phi_l);
    let mut grad_dev = 0.0f64;
    let (ncx, ncy) = grid.cell_count();
    for cj in 0..ncy {
        let layer = grid.cell_layer(cj);
        let gl = bg.grad_phi_l(layer);
        for ci in 0..ncx {
            for qp in grid.quad_points(ci, cj) {
                let q = grid.gradient_at_quadrature(phi, ci, cj, &qp);
                grad_dev = grad_dev.max((q.q1 - gl.q1).abs()).max((q.q2 - gl.q2).abs());
            }
        }
    }
    sup + grad_dev
}

/// Minimum of the vertical derivative of phi over all quadrature points.
pub fn min_dy_phi(phi: &NodeField, grid: &LagrangianGrid) -> f64 {
    let mut min_q2 = f64::INFINITY;
    let (ncx, ncy) = grid.cell_count();
    for cj in 0..ncy {
        for ci in 0..ncx {
            for qp in grid.quad_points(ci, cj) {
                min_q2 = min_q2.min(grid.gradient_at_quadrature(phi, ci, cj, &qp).q2);
            }
        }
    }
    min_q2
}

const DAMPING_FLOOR: f64 = 0.125;
const MAX_CONSECUTIVE_INCREASES: usize = 3;

/// Run the fixed-point loop until both the iterate delta and the nonlinear
/// residual are below tolerance.
pub fn run(
    wp: &WallPerturbation,
    bg: &BackgroundPotentials,
    grid: &LagrangianGrid,
    opts: &Tolerances,
    init: Init,
) -> Result<PicardOutcome> {
    let bc = boundary_values(grid, wp, bg);
    let phi_0 = connector_field(grid, bg);

    // The linear problems are posed for the correction psi = phi - phi_0,
    // whose Dirichlet trace is g alone.
    let mut bc_psi = vec![None; grid.node_count()];
    for j in 0..grid.nrows() {
        for i in 0..grid.ncols() {
            if grid.is_boundary(i, j) {
                bc_psi[grid.node_index(i, j)] =
                    Some(dirichlet_g(grid.xs[i], grid.ys[j], wp, &bg.ff));
            }
        }
    }

    // F0 = A(D phi_l) - A(D phi_0) with the connector differentiated through
    // the same bilinear elements as the iterate, so that the fixed point
    // zeroes the discrete weak residual exactly. Precompute per quad point.
    let (ncx, ncy) = grid.cell_count();
    let mut f0 = Vec::with_capacity(ncx * ncy * 4);
    for cj in 0..ncy {
        let layer = grid.cell_layer(cj);
        let inv = bg.layer_invariants(layer);
        let a_l = flux_a(&bg.grad_phi_l(layer), inv, &bg.gc)?;
        for ci in 0..ncx {
            for qp in grid.quad_points(ci, cj) {
                let q0 = grid.gradient_at_quadrature(&phi_0, ci, cj, &qp);
                let a_0 = flux_a(&q0, inv, &bg.gc)
                    .map_err(|_| Error::ConnectorInadmissible { x: qp.x, y: qp.y })?;
                f0.push((a_l.0 - a_0.0, a_l.1 - a_0.1));
            }
        }
    }

    let mut phi = match init {
        Init::Connector => phi_0.clone(),
        Init::LeftBackground => left_background_field(grid, bg),
    };

    let mut iterations = Vec::new();
    let mut damping = 1.0f64;
    let mut prev_delta = f64::INFINITY;
    let mut increases = 0usize;
    let mut lambda_min = f64::INFINITY;
    let mut lambda_max: f64 = 0.0;

    for step in 1..=opts.max_iterations {
        let coeff = assemble_coefficients(&phi, &phi_0, grid, bg)?;
        lambda_min = lambda_min.min(coeff.lambda_min);
        lambda_max = lambda_max.max(coeff.lambda_max);

        // Assembly visits quadrature points in the same order the source was
        // precomputed in; index by position.
        let mut idx = 0;
        let sys = assemble_system(
            &coeff,
            grid,
            |_ci, _cj, _qp| {
                let f = f0[idx];
                idx += 1;
                f
            },
            &bc_psi,
        );
        let psi = solve(&sys, opts.tol_lin)?;

        let mut next = NodeField { values: Vec::with_capacity(grid.node_count()) };
        for node in 0..grid.node_count() {
            let candidate = phi_0.values[node] + psi[node];
            next.values
                .push((1.0 - damping) * phi.values[node] + damping * candidate);
        }

        let delta = next.max_abs_diff(&phi);
        let residual = nonlinear_residual(&next, grid, bg, &bc)?;
        iterations.push(IterRecord {
            step,
            delta,
            residual,
            lambda_min: coeff.lambda_min,
            damping,
        });

        phi = next;
        if delta <= opts.tol_fp && residual <= opts.tol_res {
            let km = km_deviation(&phi, grid, bg);
            return Ok(PicardOutcome {
                phi,
                iterations,
                lambda_min,
                lambda_max,
                km_deviation: km,
            });
        }

        if delta > prev_delta {
            increases += 1;
            damping = (damping / 2.0).max(DAMPING_FLOOR);
            if increases >= MAX_CONSECUTIVE_INCREASES {
                return Err(Error::IterationDiverged(MAX_CONSECUTIVE_INCREASES));
            }
        } else {
            increases = 0;
        }
        prev_delta = delta;
    }
    Err(Error::IterationDiverged(opts.max_iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duct::Wall;
    use crate::farfield::{solve_farfield, LeftState};
    use crate::gas::GasConstants;

    fn gamma14() -> GasConstants {
        GasConstants::new(1.4).unwrap()
    }

    fn reference_left() -> LeftState {
        LeftState { u_top: 0.5, u_bot: 0.3, p: 1.0, rho_top: 1.0, rho_bot: 1.2 }
    }

    fn setup(
        omega_plus: f64,
        amp: f64,
        sigma: f64,
    ) -> (WallPerturbation, BackgroundPotentials, LagrangianGrid) {
        let gc = gamma14();
        let left = reference_left();
        let ff = solve_farfield(&left, omega_plus, 0.0, &gc).unwrap();
        let bg =
            BackgroundPotentials::new(&ff, left.p, left.top_layer(&gc), left.bot_layer(&gc), &gc);
        let wp = WallPerturbation {
            h_plus: Wall::top(omega_plus, amp, 1.0),
            h_minus: Wall::bottom(0.0, 0.0, 1.0),
            omega_plus,
            omega_minus: 0.0,
            sigma,
        };
        let grid = LagrangianGrid::build_unchecked(10.0, 40, 8, 8, ff.m_top, ff.m_bot);
        (wp, bg, grid)
    }

    #[test]
    fn unperturbed_duct_converges_immediately_to_phi_l() {
        let (wp, bg, grid) = setup(0.0, 0.0, 1e-12);
        let out = run(&wp, &bg, &grid, &Tolerances::default(), Init::Connector).unwrap();
        assert_eq!(out.iterations.len(), 1);
        let phi_l = left_background_field(&grid, &bg);
        assert!(out.phi.max_abs_diff(&phi_l) < 1e-12);
        assert!(out.iterations[0].residual < 1e-13);
    }

    #[test]
    fn flat_duct_residual_is_machine_zero_at_phi_l() {
        let (wp, bg, grid) = setup(0.0, 0.0, 1e-12);
        let bc = boundary_values(&grid, &wp, &bg);
        let phi_l = left_background_field(&grid, &bg);
        let r = nonlinear_residual(&phi_l, &grid, &bg, &bc).unwrap();
        assert!(r < 1e-13, "residual {r}");
    }

    #[test]
    fn connector_is_not_a_solution_when_perturbed() {
        let (wp, bg, grid) = setup(0.01, 0.0, 0.015);
        let bc = boundary_values(&grid, &wp, &bg);
        let phi_0 = connector_field(&grid, &bg);
        let r = nonlinear_residual(&phi_0, &grid, &bg, &bc).unwrap();
        assert!(r > 1e-6, "residual {r} should be strictly positive");
    }

    #[test]
    fn perturbed_run_converges_and_stays_invertible() {
        let (wp, bg, grid) = setup(0.01, 0.005, 0.015);
        let out = run(&wp, &bg, &grid, &Tolerances::default(), Init::Connector).unwrap();
        assert!(out.iterations.len() >= 2);
        let last = out.iterations.last().unwrap();
        assert!(last.delta <= 1e-11);
        assert!(min_dy_phi(&out.phi, &grid) > 0.0);
        assert!(out.lambda_min > 0.0);
    }

    #[test]
    fn two_initializations_agree() {
        let (wp, bg, grid) = setup(0.01, 0.005, 0.015);
        let opts = Tolerances::default();
        let a = run(&wp, &bg, &grid, &opts, Init::Connector).unwrap();
        let b = run(&wp, &bg, &grid, &opts, Init::LeftBackground).unwrap();
        assert!(a.phi.max_abs_diff(&b.phi) <= 10.0 * opts.tol_fp);
    }
}
