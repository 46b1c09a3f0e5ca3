//! Asymptotic two-layer states at the duct ends.
//!
//! The left state is prescribed. The right state is determined by the total
//! width change `omega = omega_+ + omega_-` through the algebraic system
//!
//! ```text
//! G(p_r, B+, S+) (1 + omega_+ - omega_*) = m0+
//! G(p_r, B-, S-) (1 + omega_- + omega_*) = m0-
//! ```
//!
//! with the layer mass-flux function `G(p, B, S) = (p/S)^(1/gamma) *
//! sqrt(2 (B - gamma/(gamma-1) (S p^(gamma-1))^(1/gamma)))`. Eliminating
//! `omega_*` reduces this to a scalar root problem `H(p_r, omega) = 0`.

use crate::error::{Error, Result};
use crate::gas::{GasConstants, GasState, LayerInvariants};

/// Left asymptotic state: two uniform subsonic layers at common pressure.
#[derive(Debug, Clone, Copy)]
pub struct LeftState {
    pub u_top: f64,
    pub u_bot: f64,
    pub p: f64,
    pub rho_top: f64,
    pub rho_bot: f64,
}

impl LeftState {
    pub fn validate(&self, gc: &GasConstants) -> Result<()> {
        for (name, v) in [
            ("u_top", self.u_top),
            ("u_bot", self.u_bot),
            ("p", self.p),
            ("rho_top", self.rho_top),
            ("rho_bot", self.rho_bot),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("left state {name} must be positive, got {v}")));
            }
        }
        if self.u_top == self.u_bot {
            return Err(Error::InvalidConfig(
                "left state must carry a velocity jump: u_top != u_bot".into(),
            ));
        }
        let c_top = (gc.gamma * self.p / self.rho_top).sqrt();
        let c_bot = (gc.gamma * self.p / self.rho_bot).sqrt();
        if self.u_top >= c_top || self.u_bot >= c_bot {
            return Err(Error::InvalidConfig("left state must be subsonic".into()));
        }
        Ok(())
    }

    pub fn top_state(&self) -> GasState {
        GasState { u: self.u_top, v: 0.0, p: self.p, rho: self.rho_top }
    }

    pub fn bot_state(&self) -> GasState {
        GasState { u: self.u_bot, v: 0.0, p: self.p, rho: self.rho_bot }
    }

    pub fn top_layer(&self, gc: &GasConstants) -> LayerInvariants {
        LayerInvariants::of_state(&self.top_state(), gc).expect("left state validated")
    }

    pub fn bot_layer(&self, gc: &GasConstants) -> LayerInvariants {
        LayerInvariants::of_state(&self.bot_state(), gc).expect("left state validated")
    }

    /// Layer mass fluxes `m0+ = rho_l+ u_l+`, `m0- = rho_l- u_l-`.
    pub fn mass_fluxes(&self) -> (f64, f64) {
        (self.rho_top * self.u_top, self.rho_bot * self.u_bot)
    }
}

/// Right asymptotic state plus the limiting interface offset.
#[derive(Debug, Clone, Copy)]
pub struct FarFieldSolution {
    pub p_r: f64,
    pub u_r_top: f64,
    pub u_r_bot: f64,
    pub rho_r_top: f64,
    pub rho_r_bot: f64,
    pub omega_star: f64,
    /// Top-layer mass flux `m0+`.
    pub m_top: f64,
    /// Bottom-layer mass flux `m0-`.
    pub m_bot: f64,
}

impl FarFieldSolution {
    pub fn right_top_state(&self) -> GasState {
        GasState { u: self.u_r_top, v: 0.0, p: self.p_r, rho: self.rho_r_top }
    }

    pub fn right_bot_state(&self) -> GasState {
        GasState { u: self.u_r_bot, v: 0.0, p: self.p_r, rho: self.rho_r_bot }
    }
}

/// Layer mass flux `G(p, B, S)` per unit width.
pub fn mass_flux_g(p: f64, b: f64, s: f64, gc: &GasConstants) -> Result<f64> {
    let g = gc.gamma;
    let enthalpy = g / (g - 1.0) * (s * p.powf(g - 1.0)).powf(1.0 / g);
    let radicand = 2.0 * (b - enthalpy);
    if radicand <= 0.0 {
        return Err(Error::StagnationExceeded { p });
    }
    Ok((p / s).powf(1.0 / g) * radicand.sqrt())
}

/// Analytic `dG/dp = rho (u^2 - c^2) / (gamma p u)`; negative for subsonic states.
pub fn mass_flux_g_dp(p: f64, b: f64, s: f64, gc: &GasConstants) -> Result<f64> {
    let g = gc.gamma;
    let rho = (p / s).powf(1.0 / g);
    let c2 = g * p / rho;
    let enthalpy = c2 / (g - 1.0);
    let radicand = 2.0 * (b - enthalpy);
    if radicand <= 0.0 {
        return Err(Error::StagnationExceeded { p });
    }
    let u = radicand.sqrt();
    Ok(rho * (u * u - c2) / (g * p * u))
}

/// `H(p, omega) = G(p,B-,S-)(2 + omega - m0+/G(p,B+,S+)) - m0-`.
pub fn h_residual(p: f64, omega: f64, left: &LeftState, gc: &GasConstants) -> Result<f64> {
    let top = left.top_layer(gc);
    let bot = left.bot_layer(gc);
    let (m_top, m_bot) = left.mass_fluxes();
    let g_top = mass_flux_g(p, top.b, top.s, gc)?;
    let g_bot = mass_flux_g(p, bot.b, bot.s, gc)?;
    Ok(g_bot * (2.0 + omega - m_top / g_top) - m_bot)
}

fn h_residual_dp(p: f64, omega: f64, left: &LeftState, gc: &GasConstants) -> Result<f64> {
    let top = left.top_layer(gc);
    let bot = left.bot_layer(gc);
    let (m_top, _) = left.mass_fluxes();
    let g_top = mass_flux_g(p, top.b, top.s, gc)?;
    let g_bot = mass_flux_g(p, bot.b, bot.s, gc)?;
    let dg_top = mass_flux_g_dp(p, top.b, top.s, gc)?;
    let dg_bot = mass_flux_g_dp(p, bot.b, bot.s, gc)?;
    Ok(dg_bot * (2.0 + omega - m_top / g_top) + g_bot * m_top * dg_top / (g_top * g_top))
}

const H_TOL: f64 = 1e-13;

/// Solve `H(p_r, omega) = 0` and assemble the right asymptotic state.
///
/// Safeguarded Newton started at `p_l`, bracket expanded geometrically from
/// `[0.8 p_l, 1.2 p_l]`. Fails if no sign change is found in the expansion or
/// if either right layer stops being subsonic.
pub fn solve_farfield(
    left: &LeftState,
    omega_plus: f64,
    omega_minus: f64,
    gc: &GasConstants,
) -> Result<FarFieldSolution> {
    left.validate(gc)?;
    let omega = omega_plus + omega_minus;
    let (m_top, m_bot) = left.mass_fluxes();

    // omega = 0 reproduces the left state exactly: H(p_l, 0) = 0.
    let p_r = if omega == 0.0 {
        left.p
    } else {
        solve_h_root(left, omega, gc)?
    };

    let top = left.top_layer(gc);
    let bot = left.bot_layer(gc);
    let g_top = mass_flux_g(p_r, top.b, top.s, gc)?;
    let g_bot = mass_flux_g(p_r, bot.b, bot.s, gc)?;
    let omega_star = if omega == 0.0 { 0.0 } else { 1.0 + omega_plus - m_top / g_top };

    let gamma = gc.gamma;
    let rho_r_top = (p_r / top.s).powf(1.0 / gamma);
    let rho_r_bot = (p_r / bot.s).powf(1.0 / gamma);
    let u_r_top = g_top / rho_r_top;
    let u_r_bot = g_bot / rho_r_bot;

    let c2_top = gamma * p_r / rho_r_top;
    let c2_bot = gamma * p_r / rho_r_bot;
    if u_r_top * u_r_top >= c2_top || u_r_bot * u_r_bot >= c2_bot {
        return Err(Error::SubsonicityLost { p_r });
    }
    if !(omega_star > -1.0 - omega_minus && omega_star < 1.0 + omega_plus) {
        return Err(Error::OmegaOutOfRange { omega });
    }

    Ok(FarFieldSolution {
        p_r,
        u_r_top,
        u_r_bot,
        rho_r_top,
        rho_r_bot,
        omega_star,
        m_top,
        m_bot,
    })
}

fn solve_h_root(left: &LeftState, omega: f64, gc: &GasConstants) -> Result<f64> {
    let eval = |p: f64| h_residual(p, omega, left, gc);
    let f_l = eval(left.p)?;
    if f_l.abs() <= H_TOL {
        return Ok(left.p);
    }

    // H is strictly decreasing in p on the subsonic branch and H(p_l) has the
    // sign of omega, so walk from p_l toward the root. G_top is undefined past
    // the top-layer stagnation pressure; an Err probe means we overshot, so
    // halve the step instead of expanding.
    let dir = if f_l > 0.0 { 1.0 } else { -1.0 };
    let mut step = 0.02 * left.p;
    let mut near = left.p; // same sign as f_l
    let mut f_near = f_l;
    let mut far = f64::NAN; // opposite sign once found
    for _ in 0..400 {
        let cand = near + dir * step;
        if cand <= 0.0 {
            step *= 0.5;
            continue;
        }
        match eval(cand) {
            Err(_) => step *= 0.5,
            Ok(f) if f.signum() == f_l.signum() => {
                near = cand;
                f_near = f;
                step *= 1.5;
            }
            Ok(_) => {
                far = cand;
                break;
            }
        }
        if step < 1e-14 * left.p {
            break;
        }
    }
    if !far.is_finite() {
        return Err(Error::OmegaOutOfRange { omega });
    }

    // Safeguarded Newton inside the bracket [near, far] (unordered).
    let (mut lo, mut hi) = (near.min(far), near.max(far));
    let mut p = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = eval(p)?;
        if f.abs() <= H_TOL {
            return Ok(p);
        }
        if f.signum() == f_near.signum() {
            if near < far {
                lo = p;
            } else {
                hi = p;
            }
        } else if near < far {
            hi = p;
        } else {
            lo = p;
        }
        let df = h_residual_dp(p, omega, left, gc)?;
        let mut next = p - f / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - p).abs() <= 1e-16 * p {
            return Ok(next);
        }
        p = next;
    }
    Ok(p)
}

/// Bisect for the largest admissible `|omega|` (to 1e-4), probing both signs.
///
/// Constructive stand-in for the non-quantified constant the existence proof
/// extracts from the implicit function theorem.
pub fn probe_max_omega(left: &LeftState, gc: &GasConstants) -> Result<(f64, f64)> {
    left.validate(gc)?;
    let admissible = |omega: f64| solve_farfield(left, omega, 0.0, gc).is_ok();
    let probe = |sign: f64| -> f64 {
        let mut lo = 0.0;
        let mut hi = 2.0;
        if admissible(sign * hi) {
            return sign * hi;
        }
        while hi - lo > 1e-4 {
            let mid = 0.5 * (lo + hi);
            if admissible(sign * mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        sign * lo
    };
    Ok((probe(-1.0), probe(1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_left() -> LeftState {
        LeftState { u_top: 0.5, u_bot: 0.3, p: 1.0, rho_top: 1.0, rho_bot: 1.2 }
    }

    fn gamma14() -> GasConstants {
        GasConstants::new(1.4).unwrap()
    }

    #[test]
    fn mass_flux_identity_at_left_state() {
        let gc = gamma14();
        let left = reference_left();
        let top = left.top_layer(&gc);
        let bot = left.bot_layer(&gc);
        let (m_top, m_bot) = left.mass_fluxes();
        assert_relative_eq!(mass_flux_g(left.p, top.b, top.s, &gc).unwrap(), m_top, epsilon = 1e-13);
        assert_relative_eq!(mass_flux_g(left.p, bot.b, bot.s, &gc).unwrap(), m_bot, epsilon = 1e-13);
        // Reference top layer: G(1, 3.625, 1) = 0.5.
        assert_relative_eq!(mass_flux_g(1.0, 3.625, 1.0, &gc).unwrap(), 0.5, epsilon = 1e-13);
    }

    #[test]
    fn mass_flux_derivative_negative_and_matches_fd() {
        let gc = gamma14();
        let left = reference_left();
        for layer in [left.top_layer(&gc), left.bot_layer(&gc)] {
            let dp = mass_flux_g_dp(left.p, layer.b, layer.s, &gc).unwrap();
            assert!(dp < 0.0);
            let h = 1e-7;
            let fd = (mass_flux_g(left.p + h, layer.b, layer.s, &gc).unwrap()
                - mass_flux_g(left.p - h, layer.b, layer.s, &gc).unwrap())
                / (2.0 * h);
            assert_relative_eq!(dp, fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn unperturbed_farfield_is_left_state() {
        let gc = gamma14();
        let left = reference_left();
        let ff = solve_farfield(&left, 0.0, 0.0, &gc).unwrap();
        assert_eq!(ff.p_r, left.p);
        assert_eq!(ff.omega_star, 0.0);
        assert_relative_eq!(ff.u_r_top, left.u_top, epsilon = 1e-13);
        assert_relative_eq!(ff.u_r_bot, left.u_bot, epsilon = 1e-13);
        assert_relative_eq!(ff.rho_r_top, left.rho_top, epsilon = 1e-13);
        assert_relative_eq!(ff.rho_r_bot, left.rho_bot, epsilon = 1e-13);
    }

    /// Bisection oracle on H over [0.95 p_l, 1.05 p_l], independent of Newton.
    /// (Both layers stay away from stagnation on this window.)
    fn bisect_pr(left: &LeftState, omega: f64, gc: &GasConstants) -> f64 {
        let mut lo = 0.95 * left.p;
        let mut hi = 1.05 * left.p;
        let flo = h_residual(lo, omega, left, gc).unwrap();
        assert!(flo.signum() != h_residual(hi, omega, left, gc).unwrap().signum());
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if h_residual(mid, omega, left, gc).unwrap().signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn perturbed_farfield_matches_bisection_oracle() {
        let gc = gamma14();
        let left = reference_left();
        let ff = solve_farfield(&left, 0.01, 0.0, &gc).unwrap();
        let oracle = bisect_pr(&left, 0.01, &gc);
        assert_relative_eq!(ff.p_r, oracle, epsilon = 1e-12);
        assert!(h_residual(ff.p_r, 0.01, &left, &gc).unwrap().abs() < 1e-12);
    }

    #[test]
    fn pressure_monotone_in_omega() {
        let gc = gamma14();
        let left = reference_left();
        let p_minus = solve_farfield(&left, -0.01, 0.0, &gc).unwrap().p_r;
        let p_zero = solve_farfield(&left, 0.0, 0.0, &gc).unwrap().p_r;
        let p_plus = solve_farfield(&left, 0.01, 0.0, &gc).unwrap().p_r;
        assert!(p_minus < p_zero && p_zero < p_plus);
    }

    #[test]
    fn mass_flux_consistency() {
        let gc = gamma14();
        let left = reference_left();
        let (op, om) = (0.013, -0.004);
        let ff = solve_farfield(&left, op, om, &gc).unwrap();
        let top = left.top_layer(&gc);
        let bot = left.bot_layer(&gc);
        let g_top = mass_flux_g(ff.p_r, top.b, top.s, &gc).unwrap();
        let g_bot = mass_flux_g(ff.p_r, bot.b, bot.s, &gc).unwrap();
        assert_relative_eq!(g_top * (1.0 + op - ff.omega_star), ff.m_top, epsilon = 1e-10);
        assert_relative_eq!(g_bot * (1.0 + om + ff.omega_star), ff.m_bot, epsilon = 1e-10);
    }

    #[test]
    fn perturbation_bound_linear_in_sigma() {
        let gc = gamma14();
        let left = reference_left();
        let deviation = |sigma: f64| {
            let ff = solve_farfield(&left, sigma, 0.0, &gc).unwrap();
            (ff.u_r_top - left.u_top).abs()
                + (ff.u_r_bot - left.u_bot).abs()
                + (ff.p_r - left.p).abs()
                + (ff.rho_r_top - left.rho_top).abs()
                + (ff.rho_r_bot - left.rho_bot).abs()
                + ff.omega_star.abs()
        };
        let base = deviation(0.02) / 0.02;
        for sigma in [0.01, 0.005, 0.0025] {
            let c = deviation(sigma) / sigma;
            assert!((c - base).abs() / base < 0.1, "C drifted: {c} vs {base}");
        }
    }

    #[test]
    fn strict_monotonicity_on_sampled_grid() {
        let gc = gamma14();
        let left = reference_left();
        let mut prev = f64::NEG_INFINITY;
        let mut min_slope = f64::INFINITY;
        let mut prev_omega = 0.0;
        for k in -20..=20 {
            let omega = k as f64 * 0.002;
            let p = solve_farfield(&left, omega, 0.0, &gc).unwrap().p_r;
            if k > -20 {
                assert!(p > prev, "p_r not increasing at omega={omega}");
                min_slope = min_slope.min((p - prev) / (omega - prev_omega));
            }
            prev = p;
            prev_omega = omega;
        }
        assert!(min_slope > 0.0);
    }

    #[test]
    fn probe_reports_positive_range() {
        let gc = gamma14();
        let left = reference_left();
        let (lo, hi) = probe_max_omega(&left, &gc).unwrap();
        assert!(lo < -0.01 && hi > 0.01);
    }

    #[test]
    fn rejects_supersonic_left_state() {
        let gc = gamma14();
        let left = LeftState { u_top: 2.0, u_bot: 0.3, p: 1.0, rho_top: 1.0, rho_bot: 1.2 };
        assert!(solve_farfield(&left, 0.0, 0.0, &gc).is_err());
    }
}
