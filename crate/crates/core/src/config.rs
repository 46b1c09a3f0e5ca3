//! Flat key=value run configuration.
//!
//! All quantities are dimensionless. Keys are sectioned with dots
//! (`left.u_top`, `grid.nx`, ...); `#` starts a comment; unknown keys are
//! rejected so typos fail loudly.

use crate::duct::{CubicSpline, Wall, WallPerturbation};
use crate::error::{Error, Result};
use crate::farfield::LeftState;
use crate::picard::Tolerances;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub gamma: f64,
    pub left: LeftState,
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// Gaussian bump amplitudes and shared width of the analytic wall family.
    pub amp_plus: f64,
    pub amp_minus: f64,
    pub wall_width: f64,
    /// Tabulated wall samples (CSV of `x,h` rows); override the analytic family.
    pub table_plus: Option<PathBuf>,
    pub table_minus: Option<PathBuf>,
    pub sigma: f64,
    pub r: f64,
    pub nx: usize,
    pub ny_top: usize,
    pub ny_bot: usize,
    pub tol: Tolerances,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    /// The reference perturbed configuration.
    fn default() -> Self {
        Self {
            gamma: 1.4,
            left: LeftState { u_top: 0.5, u_bot: 0.3, p: 1.0, rho_top: 1.0, rho_bot: 1.2 },
            omega_plus: 0.01,
            omega_minus: 0.0,
            amp_plus: 0.005,
            amp_minus: 0.0,
            wall_width: 1.5,
            table_plus: None,
            table_minus: None,
            sigma: 0.015,
            r: 10.0,
            nx: 256,
            ny_top: 48,
            ny_bot: 48,
            tol: Tolerances::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Environment variable overriding the root under which `output.dir` lives.
pub const OUTPUT_ROOT_ENV: &str = "DUCTFLOW_OUT";

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key=value, got `{raw}`", lineno + 1))
            })?;
            if kv.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate key `{}`", k.trim())));
            }
        }

        let mut cfg = RunConfig::default();
        let mut num = |key: &str, slot: &mut f64| -> Result<()> {
            if let Some(v) = kv.remove(key) {
                *slot = v
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("key `{key}`: bad number `{v}`")))?;
            }
            Ok(())
        };
        num("gamma", &mut cfg.gamma)?;
        num("left.u_top", &mut cfg.left.u_top)?;
        num("left.u_bot", &mut cfg.left.u_bot)?;
        num("left.p", &mut cfg.left.p)?;
        num("left.rho_top", &mut cfg.left.rho_top)?;
        num("left.rho_bot", &mut cfg.left.rho_bot)?;
        num("wall.omega_plus", &mut cfg.omega_plus)?;
        num("wall.omega_minus", &mut cfg.omega_minus)?;
        num("wall.amp_plus", &mut cfg.amp_plus)?;
        num("wall.amp_minus", &mut cfg.amp_minus)?;
        num("wall.width", &mut cfg.wall_width)?;
        num("wall.sigma", &mut cfg.sigma)?;
        num("grid.r", &mut cfg.r)?;
        num("tol.fixed_point", &mut cfg.tol.tol_fp)?;
        num("tol.linear", &mut cfg.tol.tol_lin)?;
        num("tol.residual", &mut cfg.tol.tol_res)?;

        let mut count = |key: &str, slot: &mut usize| -> Result<()> {
            if let Some(v) = kv.remove(key) {
                *slot = v
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("key `{key}`: bad integer `{v}`")))?;
            }
            Ok(())
        };
        count("grid.nx", &mut cfg.nx)?;
        count("grid.ny_top", &mut cfg.ny_top)?;
        count("grid.ny_bot", &mut cfg.ny_bot)?;
        count("tol.max_iterations", &mut cfg.tol.max_iterations)?;

        if let Some(v) = kv.remove("wall.table_plus") {
            cfg.table_plus = Some(PathBuf::from(v));
        }
        if let Some(v) = kv.remove("wall.table_minus") {
            cfg.table_minus = Some(PathBuf::from(v));
        }
        if let Some(v) = kv.remove("output.dir") {
            cfg.output_dir = PathBuf::from(v);
        }

        if let Some(key) = kv.keys().next() {
            return Err(Error::InvalidConfig(format!("unknown key `{key}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) {
            return Err(Error::InvalidConfig(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        let gc = crate::gas::GasConstants::new(self.gamma)?;
        self.left.validate(&gc)?;
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.wall_width > 0.0) {
            return Err(Error::InvalidConfig("wall.width must be positive".into()));
        }
        if self.r < 10.0 {
            return Err(Error::InvalidConfig(format!(
                "grid.r must be at least 10 (perturbations live in |x| < width), got {}",
                self.r
            )));
        }
        if self.nx < 4 || self.ny_top < 4 || self.ny_bot < 4 {
            return Err(Error::InvalidConfig("grid counts must be at least 4".into()));
        }
        Ok(())
    }

    /// Build the wall perturbation, loading tabulated walls when configured.
    pub fn walls(&self) -> Result<WallPerturbation> {
        let h_plus = match &self.table_plus {
            Some(path) => Wall::Tabulated(load_wall_table(path)?),
            None => Wall::top(self.omega_plus, self.amp_plus, self.wall_width),
        };
        let h_minus = match &self.table_minus {
            Some(path) => Wall::Tabulated(load_wall_table(path)?),
            None => Wall::bottom(self.omega_minus, self.amp_minus, self.wall_width),
        };
        Ok(WallPerturbation {
            h_plus,
            h_minus,
            omega_plus: self.omega_plus,
            omega_minus: self.omega_minus,
            sigma: self.sigma,
        })
    }

    /// Output directory with the environment root override applied.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) => PathBuf::from(root).join(&self.output_dir),
            None => self.output_dir.clone(),
        }
    }

    /// Echo the effective configuration as the same key=value format.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("gamma={}\n", self.gamma));
        s.push_str(&format!("left.u_top={}\n", self.left.u_top));
        s.push_str(&format!("left.u_bot={}\n", self.left.u_bot));
        s.push_str(&format!("left.p={}\n", self.left.p));
        s.push_str(&format!("left.rho_top={}\n", self.left.rho_top));
        s.push_str(&format!("left.rho_bot={}\n", self.left.rho_bot));
        s.push_str(&format!("wall.omega_plus={}\n", self.omega_plus));
        s.push_str(&format!("wall.omega_minus={}\n", self.omega_minus));
        s.push_str(&format!("wall.amp_plus={}\n", self.amp_plus));
        s.push_str(&format!("wall.amp_minus={}\n", self.amp_minus));
        s.push_str(&format!("wall.width={}\n", self.wall_width));
        if let Some(p) = &self.table_plus {
            s.push_str(&format!("wall.table_plus={}\n", p.display()));
        }
        if let Some(p) = &self.table_minus {
            s.push_str(&format!("wall.table_minus={}\n", p.display()));
        }
        s.push_str(&format!("wall.sigma={}\n", self.sigma));
        s.push_str(&format!("grid.r={}\n", self.r));
        s.push_str(&format!("grid.nx={}\n", self.nx));
        s.push_str(&format!("grid.ny_top={}\n", self.ny_top));
        s.push_str(&format!("grid.ny_bot={}\n", self.ny_bot));
        s.push_str(&format!("tol.fixed_point={:e}\n", self.tol.tol_fp));
        s.push_str(&format!("tol.linear={:e}\n", self.tol.tol_lin));
        s.push_str(&format!("tol.residual={:e}\n", self.tol.tol_res));
        s.push_str(&format!("tol.max_iterations={}\n", self.tol.max_iterations));
        s.push_str(&format!("output.dir={}\n", self.output_dir.display()));
        s
    }
}

fn load_wall_table(path: &Path) -> Result<CubicSpline> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read wall table {}: {e}", path.display())))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue; // blank, comment, or header
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|t| t.trim().parse().ok()).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "wall table {} line {}: expected `x,h`",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        xs.push(parse(parts.next())?);
        ys.push(parse(parts.next())?);
    }
    CubicSpline::new(xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_reference_roundtrip() {
        let cfg = RunConfig::default();
        let parsed = RunConfig::parse(&cfg.render()).unwrap();
        assert_eq!(parsed.nx, cfg.nx);
        assert_eq!(parsed.sigma, cfg.sigma);
        assert_eq!(parsed.left.u_bot, cfg.left.u_bot);
        assert_eq!(parsed.tol.tol_fp, cfg.tol.tol_fp);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(matches!(
            RunConfig::parse("grid.xn=3\n"),
            Err(Error::InvalidConfig(msg)) if msg.contains("unknown key")
        ));
        assert!(matches!(
            RunConfig::parse("gamma=1.4\ngamma=1.4\n"),
            Err(Error::InvalidConfig(msg)) if msg.contains("duplicate")
        ));
    }

    #[test]
    fn rejects_supersonic_left_state() {
        let err = RunConfig::parse("left.u_top=3.0\n").unwrap_err();
        assert!(err.to_string().contains("subsonic"), "{err}");
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let cfg = RunConfig::parse("# reference\n\ngamma=1.4  # ratio of specific heats\n").unwrap();
        assert_eq!(cfg.gamma, 1.4);
    }

    #[test]
    fn tabulated_wall_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wall.csv");
        let mut body = String::from("x,h\n");
        for k in 0..=100 {
            let x = -10.0 + 0.2 * k as f64;
            body.push_str(&format!("{x},{}\n", 1.0 + 0.004 * (-x * x).exp()));
        }
        std::fs::write(&path, body).unwrap();
        let mut cfg = RunConfig::default();
        cfg.table_plus = Some(path);
        cfg.omega_plus = 0.0;
        let wp = cfg.walls().unwrap();
        assert!((wp.h_plus.eval(0.0) - 1.004).abs() < 1e-6);
    }
}
