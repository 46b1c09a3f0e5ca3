//! Reconstruction of primitive fields from the stream potential and the
//! inverse Euler-Lagrange map back to physical coordinates.
//!
//! Node gradients use central differences in x and third-order one-sided
//! stencils in Y at the walls and on both sides of the interface, preserving
//! the piecewise-C1 structure across Y = 0. The Eulerian image of a node
//! (x, Y) is (x, phi(x, Y)); the contact curve is g_cd(x) = phi(x, 0).

use crate::duct::{BackgroundPotentials, WallPerturbation};
use crate::error::{Error, Result};
use crate::gas::{reconstruct_state, GasState, Gradient, Layer};
use crate::grid::{LagrangianGrid, NodeField};
use std::io::Write;

/// Primitive fields on the Lagrangian grid, with both one-sided states
/// stored along the interface row.
#[derive(Debug, Clone)]
pub struct LagrangianSolution {
    pub phi: NodeField,
    /// State per node; the interface row carries the top-side state here.
    pub states: Vec<GasState>,
    /// Bottom-side states along the interface row, one per column.
    pub interface_bottom: Vec<GasState>,
}

/// Mapped point set with attached states and the contact curve.
#[derive(Debug, Clone)]
pub struct EulerianSolution {
    pub grid: LagrangianGrid,
    /// Physical y per node: y = phi(x, Y).
    pub y: Vec<f64>,
    pub states: Vec<GasState>,
    pub interface_bottom: Vec<GasState>,
    /// Contact curve per column: g_cd(x) = phi(x, 0).
    pub contact: Vec<f64>,
    pub omega_star: f64,
}

/// Second-order difference of a column of phi in x at column i.
fn ddx(grid: &LagrangianGrid, phi: &NodeField, i: usize, j: usize) -> f64 {
    let dx = grid.xs[1] - grid.xs[0];
    let v = |ii: usize| phi.values[grid.node_index(ii, j)];
    if i == 0 {
        (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * dx)
    } else if i == grid.nx {
        (3.0 * v(i) - 4.0 * v(i - 1) + v(i - 2)) / (2.0 * dx)
    } else {
        (v(i + 1) - v(i - 1)) / (2.0 * dx)
    }
}

/// Third-order one-sided difference away from row j (increasing index).
fn forward3(v: &dyn Fn(usize) -> f64, j: usize, dy: f64) -> f64 {
    (-11.0 * v(j) + 18.0 * v(j + 1) - 9.0 * v(j + 2) + 2.0 * v(j + 3)) / (6.0 * dy)
}

/// Third-order one-sided difference away from row j (decreasing index).
fn backward3(v: &dyn Fn(usize) -> f64, j: usize, dy: f64) -> f64 {
    (11.0 * v(j) - 18.0 * v(j - 1) + 9.0 * v(j - 2) - 2.0 * v(j - 3)) / (6.0 * dy)
}

/// Difference in Y at row j: centered in the layer interior, third-order
/// one-sided toward `layer` at the interface and at the walls.
fn ddy(grid: &LagrangianGrid, phi: &NodeField, i: usize, j: usize, layer: Layer) -> f64 {
    let iface = grid.interface_row();
    let v = |jj: usize| phi.values[grid.node_index(i, jj)];
    match layer {
        Layer::Bottom => {
            let dy = grid.m_bot / grid.ny_bot as f64;
            if j == 0 {
                forward3(&v, 0, dy)
            } else if j == iface {
                backward3(&v, j, dy)
            } else {
                (v(j + 1) - v(j - 1)) / (2.0 * dy)
            }
        }
        Layer::Top => {
            let dy = grid.m_top / grid.ny_top as f64;
            let top_row = grid.nrows() - 1;
            if j == iface {
                forward3(&v, j, dy)
            } else if j == top_row {
                backward3(&v, j, dy)
            } else {
                (v(j + 1) - v(j - 1)) / (2.0 * dy)
            }
        }
    }
}

/// Nodal gradient of phi, one-sided toward `layer` where required.
pub fn node_gradient(
    grid: &LagrangianGrid,
    phi: &NodeField,
    i: usize,
    j: usize,
    layer: Layer,
) -> Gradient {
    Gradient::new(ddx(grid, phi, i, j), ddy(grid, phi, i, j, layer))
}

/// Recover (u, v, p, rho) at every node from the potential.
pub fn reconstruct(
    phi: &NodeField,
    grid: &LagrangianGrid,
    bg: &BackgroundPotentials,
) -> Result<LagrangianSolution> {
    let iface = grid.interface_row();
    let mut states = Vec::with_capacity(grid.node_count());
    for j in 0..grid.nrows() {
        let layer = if j >= iface { Layer::Top } else { Layer::Bottom };
        for i in 0..grid.ncols() {
            let q = node_gradient(grid, phi, i, j, layer);
            if q.q2 <= 0.0 {
                return Err(Error::NotInvertible { x: grid.xs[i], y: grid.ys[j], value: q.q2 });
            }
            states.push(reconstruct_state(&q, bg.layer_invariants(layer), &bg.gc)?);
        }
    }
    let mut interface_bottom = Vec::with_capacity(grid.ncols());
    for i in 0..grid.ncols() {
        let q = node_gradient(grid, phi, i, iface, Layer::Bottom);
        if q.q2 <= 0.0 {
            return Err(Error::NotInvertible { x: grid.xs[i], y: 0.0, value: q.q2 });
        }
        interface_bottom.push(reconstruct_state(&q, bg.layer_invariants(Layer::Bottom), &bg.gc)?);
    }
    Ok(LagrangianSolution { phi: phi.clone(), states, interface_bottom })
}

/// Map the Lagrangian solution to physical coordinates.
pub fn to_eulerian(
    sol: &LagrangianSolution,
    grid: &LagrangianGrid,
    bg: &BackgroundPotentials,
    _wp: &WallPerturbation,
) -> EulerianSolution {
    let iface = grid.interface_row();
    let y = sol.phi.values.clone();
    let contact: Vec<f64> = (0..grid.ncols())
        .map(|i| sol.phi.values[grid.node_index(i, iface)])
        .collect();
    EulerianSolution {
        grid: grid.clone(),
        y,
        states: sol.states.clone(),
        interface_bottom: sol.interface_bottom.clone(),
        contact,
        omega_star: bg.ff.omega_star,
    }
}

impl EulerianSolution {
    pub fn state(&self, i: usize, j: usize) -> &GasState {
        &self.states[self.grid.node_index(i, j)]
    }

    pub fn y_at(&self, i: usize, j: usize) -> f64 {
        self.y[self.grid.node_index(i, j)]
    }

    /// One row per node: (x, Y, y, u, v, p, rho, layer); interface nodes are
    /// emitted twice, once per one-sided state.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "x,Y,y,u,v,p,rho,layer")?;
        let g = &self.grid;
        let iface = g.interface_row();
        for j in 0..g.nrows() {
            for i in 0..g.ncols() {
                let node = g.node_index(i, j);
                let y = self.y[node];
                if j == iface {
                    let b = &self.interface_bottom[i];
                    writeln!(
                        w,
                        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},bottom",
                        g.xs[i], g.ys[j], y, b.u, b.v, b.p, b.rho
                    )?;
                }
                let s = &self.states[node];
                let layer = if j >= iface { "top" } else { "bottom" };
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                    g.xs[i], g.ys[j], y, s.u, s.v, s.p, s.rho, layer
                )?;
            }
        }
        Ok(())
    }

    /// Contact curve: (x, g_cd(x), omega_* eta(x)).
    pub fn write_contact_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "x,g_cd,omega_star_eta")?;
        for (i, &x) in self.grid.xs.iter().enumerate() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e}",
                x,
                self.contact[i],
                self.omega_star * crate::duct::eta(x)
            )?;
        }
        Ok(())
    }
}
