//! Linear elliptic transmission problem on the truncated grid:
//! `div(a^(phi) grad psi) = div F0` with Dirichlet data on the whole
//! boundary, assembled in weak Galerkin form with bilinear elements so that
//! continuity of psi and of the vertical flux across the interface hold
//! naturally.

use crate::duct::BackgroundPotentials;
use crate::error::{Error, Result};
use crate::gas::{flux_jacobian, sym_eigenvalues, Gradient};
use crate::grid::{LagrangianGrid, NodeField, QuadPoint};
use std::io::Write;

/// Symmetric coefficient matrices per quadrature point, stored (a11, a12, a22).
#[derive(Debug, Clone)]
pub struct CoefficientField {
    /// Indexed `[cell_j * nx + cell_i] * 4 + qp`.
    pub a: Vec<[f64; 3]>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl CoefficientField {
    pub fn identity(grid: &LagrangianGrid) -> Self {
        let (ncx, ncy) = grid.cell_count();
        Self { a: vec![[1.0, 0.0, 1.0]; ncx * ncy * 4], lambda_min: 1.0, lambda_max: 1.0 }
    }

    pub fn at(&self, grid: &LagrangianGrid, ci: usize, cj: usize, qp: usize) -> [f64; 3] {
        self.a[(cj * grid.nx + ci) * 4 + qp]
    }
}

/// 3-point Gauss-Legendre rule on [0, 1].
const T_NODES: [f64; 3] = [
    0.112_701_665_379_258_3,
    0.5,
    0.887_298_334_620_741_7,
];
const T_WEIGHTS: [f64; 3] = [
    0.277_777_777_777_777_8,
    0.444_444_444_444_444_4,
    0.277_777_777_777_777_8,
];

/// Coefficients `a^(phi) = \int_0^1 D_q A(D phi_0 + t (D phi - D phi_0)) dt`
/// at every quadrature point, with the ellipticity bounds recorded.
///
/// `phi_0` is the nodal connector iterate; using its discrete gradient (and
/// the matching discrete source in the right-hand side) makes the Picard
/// fixed point satisfy the discrete nonlinear weak equation exactly.
pub fn assemble_coefficients(
    phi: &NodeField,
    phi_0: &NodeField,
    grid: &LagrangianGrid,
    bg: &BackgroundPotentials,
) -> Result<CoefficientField> {
    let (ncx, ncy) = grid.cell_count();
    let mut a = Vec::with_capacity(ncx * ncy * 4);
    let mut lambda_min = f64::INFINITY;
    let mut lambda_max: f64 = 0.0;
    for cj in 0..ncy {
        let layer = grid.cell_layer(cj);
        let inv = bg.layer_invariants(layer);
        for ci in 0..ncx {
            for qp in grid.quad_points(ci, cj) {
                let q_phi = grid.gradient_at_quadrature(phi, ci, cj, &qp);
                let q0 = grid.gradient_at_quadrature(phi_0, ci, cj, &qp);
                let mut acc = [0.0; 3];
                for (t, w) in T_NODES.iter().zip(&T_WEIGHTS) {
                    let q = Gradient::new(
                        q0.q1 + t * (q_phi.q1 - q0.q1),
                        q0.q2 + t * (q_phi.q2 - q0.q2),
                    );
                    let d = flux_jacobian(&q, inv, &bg.gc).map_err(|e| {
                        Error::IterateInadmissible { x: qp.x, y: qp.y, source: Box::new(e) }
                    })?;
                    acc[0] += w * d[0][0];
                    acc[1] += w * d[0][1];
                    acc[2] += w * d[1][1];
                }
                let (lo, hi) = sym_eigenvalues(&[[acc[0], acc[1]], [acc[1], acc[2]]]);
                if lo <= 0.0 {
                    return Err(Error::IterateInadmissible {
                        x: qp.x,
                        y: qp.y,
                        source: Box::new(Error::EllipticityLost { q1: q_phi.q1, q2: q_phi.q2 }),
                    });
                }
                lambda_min = lambda_min.min(lo);
                lambda_max = lambda_max.max(hi);
                a.push(acc);
            }
        }
    }
    Ok(CoefficientField { a, lambda_min, lambda_max })
}

/// Sparse SPD system with Dirichlet constraints eliminated symmetrically.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    /// CSR over unknowns only.
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub rhs: Vec<f64>,
    /// node -> unknown index, or usize::MAX for constrained nodes.
    pub unknown_of_node: Vec<usize>,
    /// Dirichlet value per node (NaN where unconstrained).
    pub bc: Vec<f64>,
    pub n_nodes: usize,
}

/// 9-point stencil offset index for neighbor displacement (di, dj).
fn stencil_slot(di: isize, dj: isize) -> usize {
    ((dj + 1) * 3 + (di + 1)) as usize
}

/// Assemble the Galerkin system `K psi = b` for bilinear elements.
///
/// `f0` supplies the flux vector at each quadrature point; the weak right-hand
/// side is `b_m = sum_cells int F0 . grad N_m`. `bc` holds the Dirichlet value
/// per node where `Some`. Constrained values are folded into the right-hand
/// side so the reduced matrix stays SPD.
pub fn assemble_system(
    coeff: &CoefficientField,
    grid: &LagrangianGrid,
    mut f0: impl FnMut(usize, usize, &QuadPoint) -> (f64, f64),
    bc: &[Option<f64>],
) -> LinearSystem {
    let n = grid.node_count();
    let ncols = grid.ncols();
    assert_eq!(bc.len(), n);

    // Stencil accumulation: 9 slots per node, deterministic order.
    let mut stencil = vec![[0.0f64; 9]; n];
    let mut load = vec![0.0f64; n];

    let (ncx, ncy) = grid.cell_count();
    for cj in 0..ncy {
        for ci in 0..ncx {
            let nodes = grid.cell_nodes(ci, cj);
            for (k, qp) in grid.quad_points(ci, cj).iter().enumerate() {
                let a = coeff.at(grid, ci, cj, k);
                // Flux a . grad(N_n) per trial function.
                let mut ag = [[0.0f64; 2]; 4];
                for nn in 0..4 {
                    let g = qp.shape_grad[nn];
                    ag[nn] = [a[0] * g[0] + a[1] * g[1], a[1] * g[0] + a[2] * g[1]];
                }
                let (fx, fy) = f0(ci, cj, qp);
                for m in 0..4 {
                    let gm = qp.shape_grad[m];
                    let node_m = nodes[m];
                    let (im, jm) = (node_m % ncols, node_m / ncols);
                    for nn in 0..4 {
                        let node_n = nodes[nn];
                        let (i_n, j_n) = (node_n % ncols, node_n / ncols);
                        let slot = stencil_slot(
                            i_n as isize - im as isize,
                            j_n as isize - jm as isize,
                        );
                        stencil[node_m][slot] +=
                            qp.weight * (ag[nn][0] * gm[0] + ag[nn][1] * gm[1]);
                    }
                    load[node_m] += qp.weight * (fx * gm[0] + fy * gm[1]);
                }
            }
        }
    }

    // Numbering of unknowns.
    let mut unknown_of_node = vec![usize::MAX; n];
    let mut bc_values = vec![f64::NAN; n];
    let mut n_unknowns = 0;
    for node in 0..n {
        match bc[node] {
            Some(v) => bc_values[node] = v,
            None => {
                unknown_of_node[node] = n_unknowns;
                n_unknowns += 1;
            }
        }
    }

    // Reduced CSR with the constrained columns folded into the load vector.
    let mut row_ptr = Vec::with_capacity(n_unknowns + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    let mut rhs = Vec::with_capacity(n_unknowns);
    row_ptr.push(0);
    let nrows = grid.nrows();
    for node in 0..n {
        if unknown_of_node[node] == usize::MAX {
            continue;
        }
        let (i, j) = (node % ncols, node / ncols);
        let mut b = load[node];
        for dj in -1isize..=1 {
            for di in -1isize..=1 {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni < 0 || nj < 0 || ni >= ncols as isize || nj >= nrows as isize {
                    continue;
                }
                let neighbor = nj as usize * ncols + ni as usize;
                let v = stencil[node][stencil_slot(di, dj)];
                if v == 0.0 {
                    continue;
                }
                let u = unknown_of_node[neighbor];
                if u == usize::MAX {
                    b -= v * bc_values[neighbor];
                } else {
                    col_idx.push(u);
                    values.push(v);
                }
            }
        }
        rhs.push(b);
        row_ptr.push(col_idx.len());
    }

    LinearSystem {
        row_ptr,
        col_idx,
        values,
        rhs,
        unknown_of_node,
        bc: bc_values,
        n_nodes: n,
    }
}

impl LinearSystem {
    pub fn n_unknowns(&self) -> usize {
        self.row_ptr.len() - 1
    }

    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for (row, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *o = acc;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let n = self.n_unknowns();
        let mut d = vec![0.0; n];
        for row in 0..n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                if self.col_idx[k] == row {
                    d[row] = self.values[k];
                }
            }
        }
        d
    }

    /// Expand an unknown vector to a full node field with the Dirichlet
    /// values in place.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_nodes];
        for node in 0..self.n_nodes {
            let u = self.unknown_of_node[node];
            full[node] = if u == usize::MAX { self.bc[node] } else { x[u] };
        }
        full
    }

    /// Coordinate-format dump (row, col, value) of the reduced matrix,
    /// for external verification.
    pub fn dump_coo(&self, mut w: impl Write) -> std::io::Result<()> {
        for row in 0..self.n_unknowns() {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                writeln!(w, "{} {} {:.16e}", row, self.col_idx[k], self.values[k])?;
            }
        }
        Ok(())
    }
}

/// Jacobi-preconditioned conjugate gradients.
///
/// Converges when the residual drops below `tol * |b|` (absolute when b = 0).
/// Iteration cap is `50 sqrt(n)` plus a floor for tiny systems.
pub fn solve(sys: &LinearSystem, tol: f64) -> Result<Vec<f64>> {
    let n = sys.n_unknowns();
    if n == 0 {
        return Ok(sys.expand(&[]));
    }
    let b_norm = sys.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok(sys.expand(&vec![0.0; n]));
    }
    let max_iter = (50.0 * (n as f64).sqrt()).ceil() as usize + 100;

    let diag = sys.diagonal();
    let inv_diag: Vec<f64> = diag.iter().map(|&d| 1.0 / d).collect();

    let mut x = vec![0.0; n];
    let mut r = sys.rhs.clone();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();

    for iter in 0..max_iter {
        sys.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::LinearSolveFailed {
                residual: f64::NAN,
                iterations: iter,
                history,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        history.push(r_norm / b_norm);
        if r_norm <= tol * b_norm {
            return Ok(sys.expand(&x));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolveFailed {
        residual: *history.last().unwrap_or(&f64::NAN),
        iterations: max_iter,
        history,
    })
}

/// Residual of the full (unreduced) Galerkin operator at every node, for a
/// given flux field `A(grad phi)`; zero at unconstrained nodes characterizes
/// the discrete solution of the nonlinear problem.
pub fn weak_flux_residual(
    grid: &LagrangianGrid,
    mut flux: impl FnMut(usize, usize, &QuadPoint) -> Result<(f64, f64)>,
) -> Result<Vec<f64>> {
    let mut res = vec![0.0; grid.node_count()];
    let (ncx, ncy) = grid.cell_count();
    for cj in 0..ncy {
        for ci in 0..ncx {
            let nodes = grid.cell_nodes(ci, cj);
            for qp in grid.quad_points(ci, cj) {
                let (ax, ay) = flux(ci, cj, &qp)?;
                for m in 0..4 {
                    let g = qp.shape_grad[m];
                    res[nodes[m]] += qp.weight * (ax * g[0] + ay * g[1]);
                }
            }
        }
    }
    Ok(res)
}
