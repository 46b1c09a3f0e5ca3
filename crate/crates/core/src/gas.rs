//! Ideal polytropic gas thermodynamics in stream-potential variables.
//!
//! The stream potential carries the flow through its gradient
//! `q = (q1, q2) = (v/u, 1/(rho*u))`. Given the per-layer Bernoulli and
//! entropy constants, the density is recovered as the subsonic root of
//!
//! ```text
//! G(rho, q) = B rho^2 - gamma/(gamma-1) S rho^(gamma+1) - (1 + q1^2)/(2 q2^2) = 0
//! ```
//!
//! and the nonlinear flux map is `A(q) = (q1/(rho q2), S rho^gamma)`.

use crate::error::{Error, Result};

/// Which side of the contact interface a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Top,
    Bottom,
}

/// Adiabatic exponent context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasConstants {
    pub gamma: f64,
}

impl GasConstants {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(Error::Domain(format!("gamma must exceed 1, got {gamma}")));
        }
        Ok(Self { gamma })
    }
}

/// Primitive flow variables at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasState {
    pub u: f64,
    pub v: f64,
    pub p: f64,
    pub rho: f64,
}

impl GasState {
    pub fn speed_sq(&self) -> f64 {
        self.u * self.u + self.v * self.v
    }
}

/// Bernoulli and entropy constants of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerInvariants {
    /// Bernoulli constant `B = |u|^2/2 + gamma p / ((gamma-1) rho)`.
    pub b: f64,
    /// Entropy constant `S = p / rho^gamma`.
    pub s: f64,
}

impl LayerInvariants {
    /// Constants carried by a uniform state.
    pub fn of_state(state: &GasState, gc: &GasConstants) -> Result<Self> {
        Ok(Self {
            b: bernoulli(state, gc)?,
            s: state.p / state.rho.powf(gc.gamma),
        })
    }
}

/// Stream-potential gradient `(v/u, 1/(rho u))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient {
    pub q1: f64,
    pub q2: f64,
}

impl Gradient {
    pub fn new(q1: f64, q2: f64) -> Self {
        Self { q1, q2 }
    }
}

/// Sound speed `c = sqrt(gamma p / rho)`.
pub fn sound_speed(state: &GasState, gc: &GasConstants) -> Result<f64> {
    if state.p <= 0.0 || state.rho <= 0.0 {
        return Err(Error::Domain(format!(
            "sound speed needs p > 0 and rho > 0, got p={}, rho={}",
            state.p, state.rho
        )));
    }
    Ok((gc.gamma * state.p / state.rho).sqrt())
}

/// Bernoulli invariant `|u|^2/2 + gamma p / ((gamma-1) rho)`.
pub fn bernoulli(state: &GasState, gc: &GasConstants) -> Result<f64> {
    if state.p <= 0.0 || state.rho <= 0.0 {
        return Err(Error::Domain(format!(
            "Bernoulli needs p > 0 and rho > 0, got p={}, rho={}",
            state.p, state.rho
        )));
    }
    Ok(0.5 * state.speed_sq() + gc.gamma * state.p / ((gc.gamma - 1.0) * state.rho))
}

/// `G(rho, q)` whose subsonic root defines the density.
pub fn density_residual(rho: f64, q: &Gradient, layer: &LayerInvariants, gc: &GasConstants) -> f64 {
    let g = gc.gamma;
    layer.b * rho * rho - g / (g - 1.0) * layer.s * rho.powf(g + 1.0)
        - (1.0 + q.q1 * q.q1) / (2.0 * q.q2 * q.q2)
}

fn density_residual_drho(rho: f64, layer: &LayerInvariants, gc: &GasConstants) -> f64 {
    let g = gc.gamma;
    2.0 * layer.b * rho - g * (g + 1.0) / (g - 1.0) * layer.s * rho.powf(g)
}

/// Critical density: the unique interior maximum of `rho -> G(rho, q)`.
pub fn critical_density(layer: &LayerInvariants, gc: &GasConstants) -> f64 {
    let g = gc.gamma;
    (2.0 * layer.b * (g - 1.0) / (g * (g + 1.0) * layer.s)).powf(1.0 / (g - 1.0))
}

/// Stagnation density: where the kinetic energy `B - gamma/(gamma-1) S rho^(gamma-1)` vanishes.
pub fn stagnation_density(layer: &LayerInvariants, gc: &GasConstants) -> f64 {
    let g = gc.gamma;
    ((g - 1.0) * layer.b / (g * layer.s)).powf(1.0 / (g - 1.0))
}

const DENSITY_REL_TOL: f64 = 1e-13;

/// Unique subsonic density root of `G(rho, q) = 0`.
///
/// The root is bracketed in `[rho_cr, rho_stag]`, the branch on which
/// `dG/drho < 0` (equivalently `|u| < c`). Safeguarded Newton with
/// bisection fallback, relative tolerance 1e-13.
pub fn density_from_gradient(
    q: &Gradient,
    layer: &LayerInvariants,
    gc: &GasConstants,
) -> Result<f64> {
    if q.q2 <= 0.0 {
        return Err(Error::Domain(format!("q2 must be positive, got {}", q.q2)));
    }
    let rho_cr = critical_density(layer, gc);
    let rho_stag = stagnation_density(layer, gc);
    if density_residual(rho_cr, q, layer, gc) <= 0.0 {
        return Err(Error::NoSubsonicRoot { q1: q.q1, q2: q.q2 });
    }

    // G(rho_cr) > 0 and G(rho_stag) = -(1+q1^2)/(2 q2^2) < 0, so the bracket
    // contains exactly one root and dG/drho < 0 on it.
    let mut lo = rho_cr;
    let mut hi = rho_stag;
    let mut rho = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = density_residual(rho, q, layer, gc);
        if f > 0.0 {
            lo = rho;
        } else {
            hi = rho;
        }
        let df = density_residual_drho(rho, layer, gc);
        let mut next = rho - f / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - rho).abs() <= DENSITY_REL_TOL * rho {
            return Ok(next);
        }
        rho = next;
    }
    Ok(rho)
}

/// Reconstruct primitive variables from an admissible gradient.
pub fn reconstruct_state(
    q: &Gradient,
    layer: &LayerInvariants,
    gc: &GasConstants,
) -> Result<GasState> {
    let rho = density_from_gradient(q, layer, gc)?;
    let u = 1.0 / (rho * q.q2);
    let v = q.q1 / (rho * q.q2);
    let p = layer.s * rho.powf(gc.gamma);
    Ok(GasState { u, v, p, rho })
}

/// Nonlinear flux map `A(q) = (q1/(rho q2), S rho^gamma)`.
pub fn flux_a(q: &Gradient, layer: &LayerInvariants, gc: &GasConstants) -> Result<(f64, f64)> {
    let rho = density_from_gradient(q, layer, gc)?;
    Ok((q.q1 / (rho * q.q2), layer.s * rho.powf(gc.gamma)))
}

/// Jacobian `D_q A`, symmetric and positive definite at subsonic states.
///
/// Entries:
/// ```text
/// dA1/dq1 = u (c^2 - u^2) / (c^2 - |u|^2)
/// dA2/dq2 = rho^2 c^2 u |u|^2 / (c^2 - |u|^2)
/// dA1/dq2 = dA2/dq1 = -rho c^2 u v / (c^2 - |u|^2)
/// ```
pub fn flux_jacobian(
    q: &Gradient,
    layer: &LayerInvariants,
    gc: &GasConstants,
) -> Result<[[f64; 2]; 2]> {
    let state = reconstruct_state(q, layer, gc)?;
    let c2 = gc.gamma * state.p / state.rho;
    let speed2 = state.speed_sq();
    if c2 - speed2 <= 0.0 {
        return Err(Error::EllipticityLost { q1: q.q1, q2: q.q2 });
    }
    let denom = c2 - speed2;
    let d11 = state.u * (c2 - state.u * state.u) / denom;
    let d22 = state.rho * state.rho * c2 * state.u * speed2 / denom;
    let d12 = -state.rho * c2 * state.u * state.v / denom;
    Ok([[d11, d12], [d12, d22]])
}

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
pub fn sym_eigenvalues(m: &[[f64; 2]; 2]) -> (f64, f64) {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    (tr / 2.0 - disc, tr / 2.0 + disc)
}
