//! Independent verification of a computed solution: jump conditions on the
//! contact curve, conservation, transport invariants, smallness estimates,
//! and asymptotic behavior.
//!
//! All checks consume only the emitted solution fields and recompute fluxes,
//! jumps and norms from scratch. In particular the contact curve used by the
//! normal-velocity check is re-integrated from the bottom wall through
//! `dy = dY / (rho u)`, so it does not share a stencil with the solver's own
//! reconstruction.

use crate::duct::{eta, WallPerturbation};
use crate::farfield::{FarFieldSolution, LeftState};
use crate::fields::EulerianSolution;
use crate::gas::{GasState, Layer};

/// One named check. `note` carries a skip reason or context; a skipped check
/// has `pass = true` and `value = NAN`.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
    pub note: String,
}

impl CheckResult {
    fn measured(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, pass: value <= bound, note: String::new() }
    }

    fn skipped(name: &str, reason: &str) -> Self {
        Self { name: name.into(), value: f64::NAN, bound: f64::NAN, pass: true, note: reason.into() }
    }
}

/// The full battery of checks for one run.
#[derive(Debug, Clone, Default)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One check per line: name, value, bound, verdict.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let verdict = if !c.note.is_empty() && c.value.is_nan() {
                "SKIP"
            } else if c.pass {
                "PASS"
            } else {
                "FAIL"
            };
            out.push_str(&format!(
                "{:<28} value={:<24.16e} bound={:<12.3e} {}{}\n",
                c.name,
                c.value,
                c.bound,
                verdict,
                if c.note.is_empty() { String::new() } else { format!("  ({})", c.note) }
            ));
        }
        out
    }

    /// Machine-readable key=value document.
    pub fn render_kv(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!("check.{}.value={:.16e}\n", c.name, c.value));
            out.push_str(&format!("check.{}.bound={:.16e}\n", c.name, c.bound));
            out.push_str(&format!("check.{}.pass={}\n", c.name, c.pass));
            if !c.note.is_empty() {
                out.push_str(&format!("check.{}.note={}\n", c.name, c.note));
            }
        }
        out
    }
}

/// The eta-interpolated background state: `U_l^±` for x <= -1 blending to
/// `U_r^±` for x >= 1, per layer.
#[derive(Debug, Clone, Copy)]
pub struct ConnectorState {
    pub left_top: GasState,
    pub left_bot: GasState,
    pub right_top: GasState,
    pub right_bot: GasState,
}

impl ConnectorState {
    pub fn new(left: &LeftState, ff: &FarFieldSolution) -> Self {
        Self {
            left_top: left.top_state(),
            left_bot: left.bot_state(),
            right_top: ff.right_top_state(),
            right_bot: ff.right_bot_state(),
        }
    }

    pub fn eval(&self, x: f64, layer: Layer) -> GasState {
        let e = eta(x);
        let (l, r) = match layer {
            Layer::Top => (&self.left_top, &self.right_top),
            Layer::Bottom => (&self.left_bot, &self.right_bot),
        };
        GasState {
            u: (1.0 - e) * l.u + e * r.u,
            v: 0.0,
            p: (1.0 - e) * l.p + e * r.p,
            rho: (1.0 - e) * l.rho + e * r.rho,
        }
    }
}

fn state_distance(a: &GasState, b: &GasState) -> f64 {
    (a.u - b.u)
        .abs()
        .max((a.v - b.v).abs())
        .max((a.p - b.p).abs())
        .max((a.rho - b.rho).abs())
}

fn state_distance_sq(a: &GasState, b: &GasState) -> f64 {
    let du = a.u - b.u;
    let dv = a.v - b.v;
    let dp = a.p - b.p;
    let dr = a.rho - b.rho;
    du * du + dv * dv + dp * dp + dr * dr
}

/// Floor added to ratio/refinement bounds so machine-zero quantities
/// (e.g. every jump in a flat duct) never produce spurious verdicts.
pub const MACHINE_FLOOR: f64 = 1e-12;

/// Calibration constants for the single-run verdicts, fitted once on the
/// reference configuration at the smallest sigma and then held fixed; the
/// scaling behavior (not the constant) is what the acceptance suite tests.
pub const C_RH: f64 = 20.0;
pub const C_L2: f64 = 60.0;
pub const C_ASYM: f64 = 10.0;
pub const C_SLIP: f64 = 2.0;

/// Contact curve recomputed from the bottom wall by trapezoidal integration
/// of `1/(rho u)` in Y, independent of the solver's potential.
pub fn independent_contact_curve(sol: &EulerianSolution, wp: &WallPerturbation) -> Vec<f64> {
    let g = &sol.grid;
    let iface = g.interface_row();
    let dy = g.m_bot / g.ny_bot as f64;
    let mut curve = Vec::with_capacity(g.ncols());
    for i in 0..g.ncols() {
        let spec_vol = |j: usize| {
            let s = if j == iface { &sol.interface_bottom[i] } else { sol.state(i, j) };
            1.0 / (s.rho * s.u)
        };
        let mut y = wp.h_minus.eval(g.xs[i]);
        for j in 0..iface {
            y += 0.5 * dy * (spec_vol(j) + spec_vol(j + 1));
        }
        curve.push(y);
    }
    curve
}

/// Second-order derivative of a sampled curve on the uniform x grid.
fn curve_deriv(curve: &[f64], dx: f64, i: usize) -> f64 {
    let n = curve.len();
    if i == 0 {
        (-3.0 * curve[0] + 4.0 * curve[1] - curve[2]) / (2.0 * dx)
    } else if i == n - 1 {
        (3.0 * curve[n - 1] - 4.0 * curve[n - 2] + curve[n - 3]) / (2.0 * dx)
    } else {
        (curve[i + 1] - curve[i - 1]) / (2.0 * dx)
    }
}

/// Jump conditions on the contact curve: continuous pressure, vanishing
/// normal velocity on both sides, persistent tangential jump.
pub fn check_rh(
    sol: &EulerianSolution,
    wp: &WallPerturbation,
    left: &LeftState,
) -> Vec<CheckResult> {
    let g = &sol.grid;
    let iface = g.interface_row();
    let dx = g.xs[1] - g.xs[0];
    let h = dx.max(g.m_top / g.ny_top as f64).max(g.m_bot / g.ny_bot as f64);
    let bound = C_RH * h * h + MACHINE_FLOOR;

    let curve = independent_contact_curve(sol, wp);

    let mut p_jump = 0.0f64;
    let mut vn_top = 0.0f64;
    let mut vn_bot = 0.0f64;
    let mut tan_jump = f64::INFINITY;
    for i in 0..g.ncols() {
        let top = sol.state(i, iface);
        let bot = &sol.interface_bottom[i];
        p_jump = p_jump.max((top.p - bot.p).abs());
        let slope = curve_deriv(&curve, dx, i);
        let norm = (1.0 + slope * slope).sqrt();
        vn_top = vn_top.max((top.v - top.u * slope).abs() / norm);
        vn_bot = vn_bot.max((bot.v - bot.u * slope).abs() / norm);
        // Tangential component along (1, slope)/norm.
        let tt = (top.u + top.v * slope) / norm;
        let tb = (bot.u + bot.v * slope) / norm;
        tan_jump = tan_jump.min((tt - tb).abs());
    }

    let floor = 0.5 * (left.u_top - left.u_bot).abs();
    vec![
        CheckResult::measured("rh_pressure_jump", p_jump, bound),
        CheckResult::measured("rh_normal_velocity_top", vn_top, bound),
        CheckResult::measured("rh_normal_velocity_bottom", vn_bot, bound),
        CheckResult {
            name: "rh_tangential_jump".into(),
            value: tan_jump,
            bound: floor,
            pass: tan_jump >= floor,
            note: "lower bound: jump must persist".into(),
        },
    ]
}

/// Trapezoidal `L2(-R, R)` norm of `g_cd - omega_* eta` and the Lagrangian
/// `L2` norm of `U - U_0` with the physical area weight `dY / (rho u)`.
pub fn l2_norms(sol: &EulerianSolution, cs: &ConnectorState) -> (f64, f64) {
    let g = &sol.grid;
    let dx = g.xs[1] - g.xs[0];
    let iface = g.interface_row();

    let mut contact_sq = 0.0;
    for i in 0..g.ncols() {
        let wx = if i == 0 || i == g.nx { 0.5 } else { 1.0 };
        let dev = sol.contact[i] - sol.omega_star * eta(g.xs[i]);
        contact_sq += wx * dx * dev * dev;
    }

    let mut state_sq = 0.0;
    let mut add_layer = |rows: std::ops::RangeInclusive<usize>, layer: Layer, dy: f64| {
        let (lo, hi) = (*rows.start(), *rows.end());
        for j in lo..=hi {
            let wy = if j == lo || j == hi { 0.5 } else { 1.0 };
            for i in 0..g.ncols() {
                let wx = if i == 0 || i == g.nx { 0.5 } else { 1.0 };
                let s = if j == iface && layer == Layer::Bottom {
                    &sol.interface_bottom[i]
                } else {
                    sol.state(i, j)
                };
                let u0 = cs.eval(g.xs[i], layer);
                state_sq += wx * wy * dx * dy * state_distance_sq(s, &u0) / (s.rho * s.u);
            }
        }
    };
    add_layer(0..=iface, Layer::Bottom, g.m_bot / g.ny_bot as f64);
    add_layer(iface..=g.nrows() - 1, Layer::Top, g.m_top / g.ny_top as f64);

    (contact_sq.sqrt(), state_sq.sqrt())
}

/// Smallness of the contact-curve and state deviations, linear in sigma.
pub fn check_l2_estimates(
    sol: &EulerianSolution,
    cs: &ConnectorState,
    sigma: f64,
) -> Vec<CheckResult> {
    let (contact, state) = l2_norms(sol, cs);
    let bound = C_L2 * sigma + MACHINE_FLOOR;
    vec![
        CheckResult::measured("l2_contact_deviation", contact, bound),
        CheckResult::measured("l2_state_deviation", state, bound),
    ]
}

/// Sup deviation of the state from a reference over the columns of an
/// end window of width `window` in x.
pub fn window_deviation(
    sol: &EulerianSolution,
    refs: (&GasState, &GasState),
    right_end: bool,
    window: f64,
) -> f64 {
    let g = &sol.grid;
    let iface = g.interface_row();
    let mut dev = 0.0f64;
    for i in 0..g.ncols() {
        let x = g.xs[i];
        let in_window = if right_end { x >= g.r - window } else { x <= -g.r + window };
        if !in_window {
            continue;
        }
        for j in 0..g.nrows() {
            let reference = if j >= iface { refs.0 } else { refs.1 };
            dev = dev.max(state_distance(sol.state(i, j), reference));
        }
        dev = dev.max(state_distance(&sol.interface_bottom[i], refs.1));
    }
    dev
}

/// End-window deviations from the asymptotic states, plus positivity floors.
pub fn check_asymptotics(
    sol: &EulerianSolution,
    left: &LeftState,
    ff: &FarFieldSolution,
    sigma: f64,
    gamma: f64,
) -> Vec<CheckResult> {
    let left_dev = window_deviation(sol, (&left.top_state(), &left.bot_state()), false, 2.0);
    let right_dev =
        window_deviation(sol, (&ff.right_top_state(), &ff.right_bot_state()), true, 2.0);
    let bound = C_ASYM * sigma + MACHINE_FLOOR;

    let rho_floor = left.rho_top.min(left.rho_bot) / 10.0;
    let u_floor = left.u_top.min(left.u_bot) / 10.0;
    let mut rho_min = f64::INFINITY;
    let mut u_min = f64::INFINITY;
    let mut sub_margin = f64::INFINITY;
    for s in sol.states.iter().chain(sol.interface_bottom.iter()) {
        rho_min = rho_min.min(s.rho);
        u_min = u_min.min(s.u);
        // subsonic <=> rho |u|^2 < gamma p
        sub_margin = sub_margin.min(gamma * s.p - s.rho * (s.u * s.u + s.v * s.v));
    }

    vec![
        CheckResult::measured("asym_left_window", left_dev, bound),
        CheckResult::measured("asym_right_window", right_dev, bound),
        CheckResult {
            name: "positivity_rho".into(),
            value: rho_min,
            bound: rho_floor,
            pass: rho_min >= rho_floor,
            note: "lower bound".into(),
        },
        CheckResult {
            name: "positivity_u".into(),
            value: u_min,
            bound: u_floor,
            pass: u_min >= u_floor,
            note: "lower bound".into(),
        },
        CheckResult {
            name: "subsonic_margin".into(),
            value: sub_margin,
            bound: 0.0,
            pass: sub_margin > 0.0,
            note: "gamma p - rho |u|^2, lower bound".into(),
        },
    ]
}

/// Per-layer and total column mass fluxes, trapezoidal over the mapped
/// y-coordinates, against the exact constants.
pub fn check_conservation(sol: &EulerianSolution, m_top: f64, m_bot: f64) -> Vec<CheckResult> {
    let g = &sol.grid;
    let iface = g.interface_row();
    let dy = (g.m_top / g.ny_top as f64).max(g.m_bot / g.ny_bot as f64);
    let bound = 10.0 * dy * dy;

    let mut err_top = 0.0f64;
    let mut err_bot = 0.0f64;
    let mut err_tot = 0.0f64;
    for i in 0..g.ncols() {
        let flux = |j: usize, bottom_side: bool| {
            let s = if j == iface && bottom_side { &sol.interface_bottom[i] } else { sol.state(i, j) };
            s.rho * s.u
        };
        let mut bot = 0.0;
        for j in 0..iface {
            let dyj = sol.y_at(i, j + 1) - sol.y_at(i, j);
            bot += 0.5 * dyj * (flux(j, true) + flux(j + 1, true));
        }
        let mut top = 0.0;
        for j in iface..g.nrows() - 1 {
            let dyj = sol.y_at(i, j + 1) - sol.y_at(i, j);
            top += 0.5 * dyj * (flux(j, false) + flux(j + 1, false));
        }
        err_top = err_top.max((top - m_top).abs() / m_top);
        err_bot = err_bot.max((bot - m_bot).abs() / m_bot);
        err_tot = err_tot.max((top + bot - m_top - m_bot).abs() / (m_top + m_bot));
    }

    vec![
        CheckResult::measured("mass_flux_top_layer", err_top, bound),
        CheckResult::measured("mass_flux_bottom_layer", err_bot, bound),
        CheckResult::measured("mass_flux_total", err_tot, bound),
    ]
}

/// Entropy and Bernoulli recomputed from primitives, slip on the walls,
/// invertibility of the vertical map.
pub fn check_invariants(
    sol: &EulerianSolution,
    wp: &WallPerturbation,
    left: &LeftState,
    gamma: f64,
) -> Vec<CheckResult> {
    let g = &sol.grid;
    let iface = g.interface_row();

    // Layer constants from the prescribed left state.
    let s_top = left.p / left.rho_top.powf(gamma);
    let s_bot = left.p / left.rho_bot.powf(gamma);
    let b_top = 0.5 * left.u_top * left.u_top + gamma * left.p / ((gamma - 1.0) * left.rho_top);
    let b_bot = 0.5 * left.u_bot * left.u_bot + gamma * left.p / ((gamma - 1.0) * left.rho_bot);

    let mut s_dev = 0.0f64;
    let mut b_dev = 0.0f64;
    let mut probe = |s: &GasState, sc: f64, bc: f64| {
        s_dev = s_dev.max((s.p / s.rho.powf(gamma) - sc).abs());
        let b = 0.5 * (s.u * s.u + s.v * s.v) + gamma * s.p / ((gamma - 1.0) * s.rho);
        b_dev = b_dev.max((b - bc).abs());
    };
    for j in 0..g.nrows() {
        for i in 0..g.ncols() {
            let (sc, bc) = if j >= iface { (s_top, b_top) } else { (s_bot, b_bot) };
            probe(sol.state(i, j), sc, bc);
        }
    }
    for s in &sol.interface_bottom {
        probe(s, s_bot, b_bot);
    }

    // Slip: v/u matches the wall slope at the wall rows.
    let dx = g.xs[1] - g.xs[0];
    let h = dx.max(g.m_top / g.ny_top as f64).max(g.m_bot / g.ny_bot as f64);
    let mut slip_top = 0.0f64;
    let mut slip_bot = 0.0f64;
    for i in 0..g.ncols() {
        let x = g.xs[i];
        let st = sol.state(i, g.nrows() - 1);
        let sb = sol.state(i, 0);
        slip_top = slip_top.max((st.v - st.u * wp.h_plus.deriv(x)).abs());
        slip_bot = slip_bot.max((sb.v - sb.u * wp.h_minus.deriv(x)).abs());
    }

    // Invertibility: min dy/dY across all vertical node pairs.
    let mut min_slope = f64::INFINITY;
    for i in 0..g.ncols() {
        for j in 1..g.nrows() {
            let dyy =
                if j <= iface { g.m_bot / g.ny_bot as f64 } else { g.m_top / g.ny_top as f64 };
            min_slope = min_slope.min((sol.y_at(i, j) - sol.y_at(i, j - 1)) / dyy);
        }
    }

    vec![
        CheckResult::measured("entropy_constancy", s_dev, 1e-12),
        CheckResult::measured("bernoulli_constancy", b_dev, 1e-12),
        CheckResult::measured("slip_top_wall", slip_top, C_SLIP * h + MACHINE_FLOOR),
        CheckResult::measured("slip_bottom_wall", slip_bot, C_SLIP * h + MACHINE_FLOOR),
        CheckResult {
            name: "invertibility_min_dy".into(),
            value: min_slope,
            bound: 0.0,
            pass: min_slope > 0.0,
            note: "lower bound: map must be strictly increasing in Y".into(),
        },
    ]
}

/// Assemble every check for one run. Solver-side diagnostics (ellipticity
/// bound, nonlinear residual) are appended when available so that the report
/// is complete even though they are not recomputable from the emitted fields.
#[allow(clippy::too_many_arguments)]
pub fn full_report(
    sol: &EulerianSolution,
    wp: &WallPerturbation,
    left: &LeftState,
    ff: &FarFieldSolution,
    gamma: f64,
    sigma: f64,
    lambda_min: Option<f64>,
    nonlinear_residual: Option<f64>,
    tol_res: f64,
) -> VerificationReport {
    let cs = ConnectorState::new(left, ff);
    let mut checks = Vec::new();
    checks.extend(check_rh(sol, wp, left));
    checks.extend(check_l2_estimates(sol, &cs, sigma));
    checks.extend(check_asymptotics(sol, left, ff, sigma, gamma));
    checks.extend(check_conservation(sol, ff.m_top, ff.m_bot));
    checks.extend(check_invariants(sol, wp, left, gamma));
    match lambda_min {
        Some(l) => checks.push(CheckResult {
            name: "ellipticity_lambda_min".into(),
            value: l,
            bound: 0.0,
            pass: l > 0.0,
            note: "lower bound, from solver coefficients".into(),
        }),
        None => checks.push(CheckResult::skipped(
            "ellipticity_lambda_min",
            "solver diagnostics not available",
        )),
    }
    match nonlinear_residual {
        Some(r) => checks.push(CheckResult {
            name: "weak_residual".into(),
            value: r,
            bound: tol_res,
            pass: r <= tol_res,
            note: "Galerkin test space approximates smooth test functions".into(),
        }),
        None => checks.push(CheckResult::skipped(
            "weak_residual",
            "solver diagnostics not available",
        )),
    }
    VerificationReport { checks }
}
