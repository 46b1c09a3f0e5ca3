//! Discretization of the truncated Lagrangian duct `[-R, R] x [-m0^-, m0^+]`.
//!
//! The interface Y = 0 is always a mesh line: the bottom block has `ny_bot`
//! uniform cells over `[-m0^-, 0]` and the top block `ny_top` cells over
//! `[0, m0^+]`, so every cell lies entirely in one layer. Nodes are indexed
//! row-major from the bottom-left corner.

use crate::error::{Error, Result};
use crate::farfield::FarFieldSolution;
use crate::gas::{Gradient, Layer};

/// Tensor-product grid on the truncated Lagrangian duct.
#[derive(Debug, Clone)]
pub struct LagrangianGrid {
    pub r: f64,
    pub nx: usize,
    pub ny_top: usize,
    pub ny_bot: usize,
    pub m_top: f64,
    pub m_bot: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

/// One scalar value per grid node.
#[derive(Debug, Clone)]
pub struct NodeField {
    pub values: Vec<f64>,
}

impl NodeField {
    pub fn zeros(grid: &LagrangianGrid) -> Self {
        Self { values: vec![0.0; grid.node_count()] }
    }

    pub fn from_fn(grid: &LagrangianGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.node_count());
        for j in 0..grid.nrows() {
            for i in 0..grid.ncols() {
                values.push(f(grid.xs[i], grid.ys[j]));
            }
        }
        Self { values }
    }

    pub fn max_abs_diff(&self, other: &NodeField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Gauss point abscissa on the reference square.
const GAUSS: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

/// Quadrature point of a bilinear cell: location, weight, and the shape
/// gradients of the four corner nodes (SW, SE, NE, NW order).
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
    pub shape: [f64; 4],
    pub shape_grad: [[f64; 2]; 4],
}

impl LagrangianGrid {
    pub fn build(
        r: f64,
        nx: usize,
        ny_top: usize,
        ny_bot: usize,
        ff: &FarFieldSolution,
    ) -> Result<Self> {
        if r < 10.0 {
            return Err(Error::InvalidConfig(format!("truncation radius must be >= 10, got {r}")));
        }
        if nx < 4 || ny_top < 4 || ny_bot < 4 {
            // The grid itself tolerates counts >= 1; tests below 4 cells per
            // direction are built through `build_unchecked`.
            return Err(Error::InvalidConfig(format!(
                "cell counts must be >= 4, got nx={nx}, ny_top={ny_top}, ny_bot={ny_bot}"
            )));
        }
        Ok(Self::build_unchecked(r, nx, ny_top, ny_bot, ff.m_top, ff.m_bot))
    }

    pub fn build_unchecked(
        r: f64,
        nx: usize,
        ny_top: usize,
        ny_bot: usize,
        m_top: f64,
        m_bot: f64,
    ) -> Self {
        let dx = 2.0 * r / nx as f64;
        let xs: Vec<f64> = (0..=nx).map(|i| -r + i as f64 * dx).collect();
        let dyb = m_bot / ny_bot as f64;
        let dyt = m_top / ny_top as f64;
        let mut ys = Vec::with_capacity(ny_bot + ny_top + 1);
        for j in 0..ny_bot {
            ys.push(-m_bot + j as f64 * dyb);
        }
        ys.push(0.0); // the interface row, exact
        for j in 1..=ny_top {
            ys.push(j as f64 * dyt);
        }
        Self { r, nx, ny_top, ny_bot, m_top, m_bot, xs, ys }
    }

    pub fn ncols(&self) -> usize {
        self.nx + 1
    }

    pub fn nrows(&self) -> usize {
        self.ny_bot + self.ny_top + 1
    }

    pub fn node_count(&self) -> usize {
        self.ncols() * self.nrows()
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.ncols() + i
    }

    /// Row index of the interface Y = 0.
    pub fn interface_row(&self) -> usize {
        self.ny_bot
    }

    pub fn cell_count(&self) -> (usize, usize) {
        (self.nx, self.ny_bot + self.ny_top)
    }

    /// Layer of a whole cell column-row; no cell straddles the interface.
    pub fn cell_layer(&self, cj: usize) -> Layer {
        if cj < self.ny_bot {
            Layer::Bottom
        } else {
            Layer::Top
        }
    }

    /// Node layer for reconstruction; the interface row reports `Top` here
    /// and callers needing both sides handle the row explicitly.
    pub fn row_layer(&self, j: usize) -> Layer {
        if j < self.ny_bot {
            Layer::Bottom
        } else {
            Layer::Top
        }
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || i == self.nx || j == 0 || j == self.nrows() - 1
    }

    /// Corner node indices of cell (ci, cj): SW, SE, NE, NW.
    pub fn cell_nodes(&self, ci: usize, cj: usize) -> [usize; 4] {
        [
            self.node_index(ci, cj),
            self.node_index(ci + 1, cj),
            self.node_index(ci + 1, cj + 1),
            self.node_index(ci, cj + 1),
        ]
    }

    /// The four 2x2 Gauss points of cell (ci, cj).
    pub fn quad_points(&self, ci: usize, cj: usize) -> [QuadPoint; 4] {
        let x0 = self.xs[ci];
        let x1 = self.xs[ci + 1];
        let y0 = self.ys[cj];
        let y1 = self.ys[cj + 1];
        let hx = x1 - x0;
        let hy = y1 - y0;
        let mut out = [QuadPoint {
            x: 0.0,
            y: 0.0,
            weight: 0.0,
            shape: [0.0; 4],
            shape_grad: [[0.0; 2]; 4],
        }; 4];
        let mut k = 0;
        for &gy in &[-GAUSS, GAUSS] {
            for &gx in &[-GAUSS, GAUSS] {
                // Reference coordinates in [-1, 1]^2.
                let x = x0 + hx * (gx + 1.0) / 2.0;
                let y = y0 + hy * (gy + 1.0) / 2.0;
                let np = |sx: f64, sy: f64| (1.0 + sx * gx) * (1.0 + sy * gy) / 4.0;
                let dndx = |sx: f64, sy: f64| sx * (1.0 + sy * gy) / (2.0 * hx);
                let dndy = |sx: f64, sy: f64| sy * (1.0 + sx * gx) / (2.0 * hy);
                let signs = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
                let mut shape = [0.0; 4];
                let mut shape_grad = [[0.0; 2]; 4];
                for (n, &(sx, sy)) in signs.iter().enumerate() {
                    shape[n] = np(sx, sy);
                    shape_grad[n] = [dndx(sx, sy), dndy(sx, sy)];
                }
                out[k] = QuadPoint { x, y, weight: hx * hy / 4.0, shape, shape_grad };
                k += 1;
            }
        }
        out
    }

    /// Bilinear-element gradient of a node field at one quadrature point.
    pub fn gradient_at_quadrature(
        &self,
        field: &NodeField,
        ci: usize,
        cj: usize,
        qp: &QuadPoint,
    ) -> Gradient {
        let nodes = self.cell_nodes(ci, cj);
        let mut gx = 0.0;
        let mut gy = 0.0;
        for (n, &id) in nodes.iter().enumerate() {
            gx += field.values[id] * qp.shape_grad[n][0];
            gy += field.values[id] * qp.shape_grad[n][1];
        }
        Gradient::new(gx, gy)
    }

    /// Field value at one quadrature point.
    pub fn value_at_quadrature(
        &self,
        field: &NodeField,
        ci: usize,
        cj: usize,
        qp: &QuadPoint,
    ) -> f64 {
        let nodes = self.cell_nodes(ci, cj);
        nodes
            .iter()
            .enumerate()
            .map(|(n, &id)| field.values[id] * qp.shape[n])
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_grid() -> LagrangianGrid {
        LagrangianGrid::build_unchecked(10.0, 8, 2, 2, 0.5, 0.36)
    }

    #[test]
    fn node_counts_and_interface_row() {
        let g = small_grid();
        assert_eq!(g.ncols(), 9);
        assert_eq!(g.nrows(), 5);
        assert_eq!(g.interface_row(), 2);
        assert_eq!(g.ys[2], 0.0);

        let g2 = LagrangianGrid::build_unchecked(10.0, 8, 2, 3, 0.5, 0.36);
        assert_eq!(g2.interface_row(), 3);
        assert_eq!(g2.ys[3], 0.0);
    }

    #[test]
    fn doubling_nx_halves_dx() {
        let g1 = small_grid();
        let g2 = LagrangianGrid::build_unchecked(10.0, 16, 2, 2, 0.5, 0.36);
        let dx1 = g1.xs[1] - g1.xs[0];
        let dx2 = g2.xs[1] - g2.xs[0];
        assert_eq!(dx1, 2.0 * dx2);
        // Nested refinement: every coarse node is a fine node.
        for (i, &x) in g1.xs.iter().enumerate() {
            assert_eq!(x, g2.xs[2 * i]);
        }
    }

    #[test]
    fn linear_fields_have_exact_gradients() {
        let g = small_grid();
        // phi_l in the top layer: y / m0+ -> gradient (0, 1/m0+).
        let phi = NodeField::from_fn(&g, |_, y| if y >= 0.0 { y / 0.5 } else { y / 0.36 });
        for cj in 2..4 {
            for ci in 0..g.nx {
                for qp in g.quad_points(ci, cj) {
                    let q = g.gradient_at_quadrature(&phi, ci, cj, &qp);
                    assert_relative_eq!(q.q1, 0.0, epsilon = 1e-14);
                    assert_relative_eq!(q.q2, 2.0, epsilon = 1e-12);
                }
            }
        }

        let constant = NodeField::from_fn(&g, |_, _| 3.0);
        let qp = g.quad_points(0, 0)[0];
        let q = g.gradient_at_quadrature(&constant, 0, 0, &qp);
        assert_relative_eq!(q.q1, 0.0, epsilon = 1e-13);
        assert_relative_eq!(q.q2, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn bilinear_xy_gradient_at_centroid() {
        let g = small_grid();
        let phi = NodeField::from_fn(&g, |x, y| x * y);
        // Average the four Gauss points to hit the centroid exactly.
        let (mut gx, mut gy, mut xc, mut yc) = (0.0, 0.0, 0.0, 0.0);
        for qp in g.quad_points(3, 1) {
            let q = g.gradient_at_quadrature(&phi, 3, 1, &qp);
            gx += q.q1 / 4.0;
            gy += q.q2 / 4.0;
            xc += qp.x / 4.0;
            yc += qp.y / 4.0;
        }
        assert_relative_eq!(gx, yc, epsilon = 1e-13);
        assert_relative_eq!(gy, xc, epsilon = 1e-13);
    }

    #[test]
    fn no_quad_point_on_interface_and_layers_unambiguous() {
        let g = small_grid();
        let (ncx, ncy) = g.cell_count();
        for cj in 0..ncy {
            let layer = g.cell_layer(cj);
            for ci in 0..ncx {
                for qp in g.quad_points(ci, cj) {
                    assert!(qp.y != 0.0);
                    match layer {
                        Layer::Top => assert!(qp.y > 0.0),
                        Layer::Bottom => assert!(qp.y < 0.0),
                    }
                }
            }
        }
    }

    #[test]
    fn build_validates_inputs() {
        let ff = crate::farfield::FarFieldSolution {
            p_r: 1.0,
            u_r_top: 0.5,
            u_r_bot: 0.3,
            rho_r_top: 1.0,
            rho_r_bot: 1.2,
            omega_star: 0.0,
            m_top: 0.5,
            m_bot: 0.36,
        };
        assert!(LagrangianGrid::build(5.0, 8, 4, 4, &ff).is_err());
        assert!(LagrangianGrid::build(10.0, 2, 4, 4, &ff).is_err());
        assert!(LagrangianGrid::build(10.0, 8, 4, 4, &ff).is_ok());
    }
}
