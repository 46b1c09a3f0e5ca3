//! Duct geometry: wall perturbations, cutoff functions, the background and
//! connector stream potentials, the source term feeding the transmission
//! problem, and the Dirichlet boundary data.

use crate::error::{Error, Result};
use crate::farfield::FarFieldSolution;
use crate::gas::{flux_a, GasConstants, Gradient, Layer, LayerInvariants};

/// Quintic smoothstep: 0 for t <= 0, 1 for t >= 1, C^2 at the junctions.
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    }
}

fn smoothstep_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        30.0 * t * t * (t - 1.0) * (t - 1.0)
    }
}

/// Horizontal cutoff: 0 for x <= -1, 1 for x >= 1, max slope 15/16.
pub fn eta(x: f64) -> f64 {
    smoothstep((x + 1.0) / 2.0)
}

pub fn eta_deriv(x: f64) -> f64 {
    smoothstep_deriv((x + 1.0) / 2.0) / 2.0
}

/// One duct wall: the built-in parametric family or tabulated samples.
#[derive(Debug, Clone)]
pub enum Wall {
    /// `h(x) = base + omega_signed * eta(x) + amp * exp(-x^2 / width^2)`.
    ///
    /// `base` is +1 (top) or -1 (bottom); `omega_signed` is `omega_+` for the
    /// top wall and `-omega_-` for the bottom wall, so the duct width tends to
    /// `2 + omega_+ + omega_-` on the right.
    Analytic {
        base: f64,
        omega_signed: f64,
        amp: f64,
        width: f64,
    },
    /// Natural cubic spline through (x, h) samples, clamped to the end values
    /// outside the table.
    Tabulated(CubicSpline),
}

impl Wall {
    pub fn top(omega_plus: f64, amp: f64, width: f64) -> Self {
        Wall::Analytic { base: 1.0, omega_signed: omega_plus, amp, width }
    }

    pub fn bottom(omega_minus: f64, amp: f64, width: f64) -> Self {
        Wall::Analytic { base: -1.0, omega_signed: -omega_minus, amp, width }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Wall::Analytic { base, omega_signed, amp, width } => {
                base + omega_signed * eta(x) + amp * (-x * x / (width * width)).exp()
            }
            Wall::Tabulated(sp) => sp.eval(x),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            Wall::Analytic { omega_signed, amp, width, .. } => {
                omega_signed * eta_deriv(x)
                    + amp * (-2.0 * x / (width * width)) * (-x * x / (width * width)).exp()
            }
            Wall::Tabulated(sp) => sp.deriv(x),
        }
    }
}

/// Natural cubic spline on strictly increasing knots.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::InvalidConfig("spline needs >= 2 matching samples".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("spline abscissae must be strictly increasing".into()));
        }
        let n = xs.len();
        // Tridiagonal solve for natural boundary conditions (m[0] = m[n-1] = 0).
        let mut m = vec![0.0; n];
        if n > 2 {
            let mut sub = vec![0.0; n - 2];
            let mut diag = vec![0.0; n - 2];
            let mut sup = vec![0.0; n - 2];
            let mut rhs = vec![0.0; n - 2];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                sub[i - 1] = h0;
                diag[i - 1] = 2.0 * (h0 + h1);
                sup[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            // Thomas algorithm.
            for i in 1..n - 2 {
                let w = sub[i] / diag[i - 1];
                diag[i] -= w * sup[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[n - 2] = rhs[n - 3] / diag[n - 3];
            for i in (1..n - 2).rev() {
                m[i] = (rhs[i - 1] - sup[i - 1] * m[i + 1]) / diag[i - 1];
            }
        }
        Ok(Self { xs, ys, m })
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.xs.len() - 2),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] || x >= self.xs[n - 1] {
            return 0.0;
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        (self.ys[i + 1] - self.ys[i]) / h
            + ((3.0 * b * b - 1.0) * self.m[i + 1] - (3.0 * a * a - 1.0) * self.m[i]) * h / 6.0
    }
}

/// Perturbed duct boundary.
#[derive(Debug, Clone)]
pub struct WallPerturbation {
    pub h_plus: Wall,
    pub h_minus: Wall,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub sigma: f64,
}

impl WallPerturbation {
    /// Sampled validation of the smallness constraints. Violations are
    /// reported as warnings; the constants in the constraints are not sharp.
    pub fn validate(&self, half_length: f64) -> Vec<String> {
        let mut warnings = Vec::new();
        if self.omega_plus.abs() > self.sigma {
            warnings.push(format!(
                "|omega_+| = {} exceeds sigma = {}",
                self.omega_plus.abs(),
                self.sigma
            ));
        }
        if self.omega_minus.abs() > self.sigma {
            warnings.push(format!(
                "|omega_-| = {} exceeds sigma = {}",
                self.omega_minus.abs(),
                self.sigma
            ));
        }
        let n = 2001;
        let dx = 2.0 * half_length / (n - 1) as f64;
        let mut h1_sq = 0.0;
        let mut sup_c1 = 0.0f64;
        for k in 0..n {
            let x = -half_length + k as f64 * dx;
            let hp = self.h_plus.eval(x);
            let hm = self.h_minus.eval(x);
            if hm >= hp {
                warnings.push(format!("walls cross at x = {x}: h_- = {hm} >= h_+ = {hp}"));
                break;
            }
            let dev_p = hp - 1.0 - self.omega_plus * eta(x);
            let dev_m = hm + 1.0 + self.omega_minus * eta(x);
            let ddev_p = self.h_plus.deriv(x) - self.omega_plus * eta_deriv(x);
            let ddev_m = self.h_minus.deriv(x) + self.omega_minus * eta_deriv(x);
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            h1_sq += w * dx * (dev_p * dev_p + ddev_p * ddev_p + dev_m * dev_m + ddev_m * ddev_m);
            sup_c1 = sup_c1
                .max((hp - 1.0).abs())
                .max((hm + 1.0).abs())
                .max(self.h_plus.deriv(x).abs())
                .max(self.h_minus.deriv(x).abs());
        }
        if h1_sq.sqrt() > self.sigma {
            warnings.push(format!(
                "discrete H1 deviation {} exceeds sigma = {}",
                h1_sq.sqrt(),
                self.sigma
            ));
        }
        if sup_c1 > 2.0 * self.sigma {
            warnings.push(format!(
                "discrete C1 deviation {} exceeds 2 sigma = {}",
                sup_c1,
                2.0 * self.sigma
            ));
        }
        warnings
    }
}

/// Background potentials of the asymptotic states and their connector.
#[derive(Debug, Clone)]
pub struct BackgroundPotentials {
    pub ff: FarFieldSolution,
    pub gc: GasConstants,
    /// Left-layer pressure (equals `A2(D phi_l)` in both layers).
    pub p_l: f64,
    pub top_layer: LayerInvariants,
    pub bot_layer: LayerInvariants,
    /// Right-layer mass fluxes `rho_r^± u_r^±`.
    g_top: f64,
    g_bot: f64,
}

impl BackgroundPotentials {
    pub fn new(
        ff: &FarFieldSolution,
        p_l: f64,
        top_layer: LayerInvariants,
        bot_layer: LayerInvariants,
        gc: &GasConstants,
    ) -> Self {
        Self {
            ff: *ff,
            gc: *gc,
            p_l,
            top_layer,
            bot_layer,
            g_top: ff.rho_r_top * ff.u_r_top,
            g_bot: ff.rho_r_bot * ff.u_r_bot,
        }
    }

    pub fn layer_invariants(&self, layer: Layer) -> &LayerInvariants {
        match layer {
            Layer::Top => &self.top_layer,
            Layer::Bottom => &self.bot_layer,
        }
    }

    /// Left background potential `phi_l(Y) = Y / m0^±`.
    pub fn phi_l(&self, yy: f64, layer: Layer) -> f64 {
        match layer {
            Layer::Top => yy / self.ff.m_top,
            Layer::Bottom => yy / self.ff.m_bot,
        }
    }

    pub fn grad_phi_l(&self, layer: Layer) -> Gradient {
        match layer {
            Layer::Top => Gradient::new(0.0, 1.0 / self.ff.m_top),
            Layer::Bottom => Gradient::new(0.0, 1.0 / self.ff.m_bot),
        }
    }

    /// Right background potential `phi_r(Y) = Y / (rho_r^± u_r^±) + omega_*`.
    pub fn phi_r(&self, yy: f64, layer: Layer) -> f64 {
        match layer {
            Layer::Top => yy / self.g_top + self.ff.omega_star,
            Layer::Bottom => yy / self.g_bot + self.ff.omega_star,
        }
    }

    pub fn grad_phi_r(&self, layer: Layer) -> Gradient {
        match layer {
            Layer::Top => Gradient::new(0.0, 1.0 / self.g_top),
            Layer::Bottom => Gradient::new(0.0, 1.0 / self.g_bot),
        }
    }

    /// Connector `phi_0 = (1 - eta) phi_l + eta phi_r`.
    pub fn phi_0(&self, x: f64, yy: f64, layer: Layer) -> f64 {
        let e = eta(x);
        (1.0 - e) * self.phi_l(yy, layer) + e * self.phi_r(yy, layer)
    }

    pub fn grad_phi_0(&self, x: f64, yy: f64, layer: Layer) -> Gradient {
        let e = eta(x);
        let de = eta_deriv(x);
        let gl = self.grad_phi_l(layer);
        let gr = self.grad_phi_r(layer);
        Gradient::new(
            de * (self.phi_r(yy, layer) - self.phi_l(yy, layer)),
            (1.0 - e) * gl.q2 + e * gr.q2,
        )
    }

    /// Source `F0 = A(D phi_l) - A(D phi_0)`, using the invariants of `layer`.
    ///
    /// `A(D phi_l) = (0, p_l)` in both layers; equals `(0, 0)` for x <= -1 and
    /// `(0, p_l - p_r)` for x >= 1.
    pub fn source_f0(&self, x: f64, yy: f64, layer: Layer) -> Result<(f64, f64)> {
        if x <= -1.0 {
            return Ok((0.0, 0.0));
        }
        if x >= 1.0 {
            return Ok((0.0, self.p_l - self.ff.p_r));
        }
        let q0 = self.grad_phi_0(x, yy, layer);
        let a0 = flux_a(&q0, self.layer_invariants(layer), &self.gc)
            .map_err(|_| Error::ConnectorInadmissible { x, y: yy })?;
        Ok((-a0.0, self.p_l - a0.1))
    }
}

/// Vertical cutoff: 1 for Y <= -m0^-/2, 0 for Y >= m0^+/2, monotone decreasing.
pub fn chi0(yy: f64, m_bot: f64, m_top: f64) -> f64 {
    let t = (yy + m_bot / 2.0) / ((m_bot + m_top) / 2.0);
    1.0 - smoothstep(t)
}

/// Boundary corrections on the walls.
///
/// `g_+ = h_+ - 1 - eta * omega_+` and `g_- = h_- + 1 + eta * omega_-`:
/// exactly `h_± - phi_0` on the respective wall, vanishing as |x| -> infinity.
pub fn g_plus(x: f64, wp: &WallPerturbation) -> f64 {
    wp.h_plus.eval(x) - 1.0 - eta(x) * wp.omega_plus
}

pub fn g_minus(x: f64, wp: &WallPerturbation) -> f64 {
    wp.h_minus.eval(x) + 1.0 + eta(x) * wp.omega_minus
}

/// Dirichlet data on the truncated boundary:
/// `g(x,Y) = g_-(x) chi0(Y) + g_+(x) (1 - chi0(Y))`.
pub fn dirichlet_g(x: f64, yy: f64, wp: &WallPerturbation, ff: &FarFieldSolution) -> f64 {
    let c = chi0(yy, ff.m_bot, ff.m_top);
    g_minus(x, wp) * c + g_plus(x, wp) * (1.0 - c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::farfield::{solve_farfield, LeftState};
    use approx::assert_relative_eq;

    fn gamma14() -> GasConstants {
        GasConstants::new(1.4).unwrap()
    }

    fn reference_left() -> LeftState {
        LeftState { u_top: 0.5, u_bot: 0.3, p: 1.0, rho_top: 1.0, rho_bot: 1.2 }
    }

    fn background(omega_plus: f64, omega_minus: f64) -> BackgroundPotentials {
        let gc = gamma14();
        let left = reference_left();
        let ff = solve_farfield(&left, omega_plus, omega_minus, &gc).unwrap();
        BackgroundPotentials::new(&ff, left.p, left.top_layer(&gc), left.bot_layer(&gc), &gc)
    }

    #[test]
    fn eta_endpoints_and_midpoint() {
        assert_eq!(eta(-1.0), 0.0);
        assert_eq!(eta(1.0), 1.0);
        assert_eq!(eta(-5.0), 0.0);
        assert_eq!(eta(5.0), 1.0);
        assert_relative_eq!(eta(0.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn eta_slope_bounded() {
        let mut max_slope = 0.0f64;
        for k in 0..=4000 {
            let x = -2.0 + k as f64 * 0.001;
            let d = eta_deriv(x);
            assert!(d >= 0.0);
            max_slope = max_slope.max(d);
        }
        assert_relative_eq!(max_slope, 15.0 / 16.0, epsilon = 1e-6);
        assert!(max_slope <= 10.0);
    }

    #[test]
    fn source_f0_tails() {
        let bg = background(0.01, 0.0);
        let f = bg.source_f0(-2.0, 0.2, Layer::Top).unwrap();
        assert_eq!(f, (0.0, 0.0));
        let f = bg.source_f0(2.0, -0.1, Layer::Bottom).unwrap();
        assert_eq!(f.0, 0.0);
        assert_relative_eq!(f.1, 1.0 - bg.ff.p_r, epsilon = 1e-15);
    }

    #[test]
    fn source_f0_vanishes_unperturbed() {
        let bg = background(0.0, 0.0);
        for &(x, yy, layer) in &[
            (0.0, 0.25, Layer::Top),
            (-0.5, 0.1, Layer::Top),
            (0.7, -0.2, Layer::Bottom),
        ] {
            let f = bg.source_f0(x, yy, layer).unwrap();
            assert!(f.0.abs() < 1e-13 && f.1.abs() < 1e-13, "F0 = {f:?} at ({x},{yy})");
        }
    }

    #[test]
    fn connector_continuity_and_tails() {
        let bg = background(0.01, -0.005);
        // [phi_0] = 0 across Y = 0.
        for &x in &[-3.0, -0.5, 0.0, 0.5, 3.0] {
            let top = bg.phi_0(x, 0.0, Layer::Top);
            let bot = bg.phi_0(x, 0.0, Layer::Bottom);
            assert_relative_eq!(top, bot, epsilon = 1e-15);
        }
        // phi_0 == phi_l for x <= -1 and phi_r for x >= 1.
        assert_eq!(bg.phi_0(-1.5, 0.3, Layer::Top), bg.phi_l(0.3, Layer::Top));
        assert_eq!(bg.phi_0(1.5, 0.3, Layer::Top), bg.phi_r(0.3, Layer::Top));
    }

    #[test]
    fn wall_values_of_connector() {
        // phi_0 on the walls is ±1 ± eta(x) omega_±, so g_± = h_± - phi_0 there.
        let bg = background(0.01, -0.005);
        for &x in &[-2.0, -0.3, 0.4, 2.0] {
            let top = bg.phi_0(x, bg.ff.m_top, Layer::Top);
            assert_relative_eq!(top, 1.0 + eta(x) * 0.01, epsilon = 1e-13);
            let bot = bg.phi_0(x, -bg.ff.m_bot, Layer::Bottom);
            assert_relative_eq!(bot, -1.0 - eta(x) * (-0.005), epsilon = 1e-13);
        }
    }

    #[test]
    fn dirichlet_g_flat_duct_is_zero() {
        let gc = gamma14();
        let left = reference_left();
        let ff = solve_farfield(&left, 0.0, 0.0, &gc).unwrap();
        let wp = WallPerturbation {
            h_plus: Wall::top(0.0, 0.0, 1.0),
            h_minus: Wall::bottom(0.0, 0.0, 1.0),
            omega_plus: 0.0,
            omega_minus: 0.0,
            sigma: 1e-12,
        };
        for &x in &[-5.0, 0.0, 3.0] {
            for &yy in &[-ff.m_bot, -0.1, 0.0, 0.2, ff.m_top] {
                assert_eq!(dirichlet_g(x, yy, &wp, &ff), 0.0);
            }
        }
    }

    #[test]
    fn dirichlet_g_wall_rows() {
        let gc = gamma14();
        let left = reference_left();
        let ff = solve_farfield(&left, 0.01, 0.002, &gc).unwrap();
        let wp = WallPerturbation {
            h_plus: Wall::top(0.01, 0.004, 1.0),
            h_minus: Wall::bottom(0.002, -0.003, 1.5),
            omega_plus: 0.01,
            omega_minus: 0.002,
            sigma: 0.015,
        };
        for &x in &[-4.0, -0.2, 1.3] {
            assert_relative_eq!(
                dirichlet_g(x, ff.m_top, &wp, &ff),
                g_plus(x, &wp),
                epsilon = 1e-15
            );
            assert_relative_eq!(
                dirichlet_g(x, -ff.m_bot, &wp, &ff),
                g_minus(x, &wp),
                epsilon = 1e-15
            );
        }
        // g_± decay at the truncation radius.
        assert!(g_plus(40.0, &wp).abs() < 1e-10);
        assert!(g_minus(-40.0, &wp).abs() < 1e-10);
    }

    #[test]
    fn spline_wall_reproduces_cubic() {
        // Sample a smooth bump and check mid-knot interpolation error.
        let xs: Vec<f64> = (0..=200).map(|k| -10.0 + 0.1 * k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 1.0 + 0.01 * (-x * x).exp()).collect();
        let sp = CubicSpline::new(xs, ys).unwrap();
        let wall = Wall::Tabulated(sp);
        for k in 0..100 {
            let x = -5.0 + 0.105 * k as f64;
            let exact = 1.0 + 0.01 * (-x * x).exp();
            assert!((wall.eval(x) - exact).abs() < 1e-6);
        }
        // Clamped outside the table.
        assert_eq!(wall.eval(-50.0), wall.eval(-10.0));
    }

    #[test]
    fn validate_flags_large_omega() {
        let wp = WallPerturbation {
            h_plus: Wall::top(0.1, 0.0, 1.0),
            h_minus: Wall::bottom(0.0, 0.0, 1.0),
            omega_plus: 0.1,
            omega_minus: 0.0,
            sigma: 0.01,
        };
        let warnings = wp.validate(10.0);
        assert!(!warnings.is_empty());
    }
}
