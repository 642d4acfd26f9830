//! Run configuration: one TOML file per run, with `key.path=value` overrides of scalars.

use std::path::{Path, PathBuf};

use caloron_core::geometry::{GridSpec, ProductGrid};
use caloron_core::holomap::{eta_from_blip, BlipMap, EtaField, ParabolicMode};
use caloron_core::hymflow::FlowConfig;
use caloron_core::looporbit::LoopAlgebraElement;
use caloron_core::quad::QuadSpec;
use caloron_core::rational::parse_rational;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, CliError, Result};

/// Holomorphic input data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputMap {
    /// `eta = 0` in dimension `dim`.
    Zero { dim: usize },
    /// `eta = (z - 1) dP/dW` for `P = v v^* / |v|^2`; `v` holds rational functions of `W`.
    Blip { v: Vec<String> },
    /// `eta = sum_k coeffs[k] z^k`, each row-major with `dim * dim` rational entries.
    Eta { dim: usize, coeffs: Vec<Vec<String>> },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeConfig {
    Strict,
    #[default]
    Permissive,
}

impl From<ModeConfig> for ParabolicMode {
    fn from(m: ModeConfig) -> Self {
        match m {
            ModeConfig::Strict => ParabolicMode::Strict,
            ModeConfig::Permissive => ParabolicMode::Permissive,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputConfig {
    #[serde(flatten)]
    pub map: InputMap,
    /// Diagonal of `i xi_0`.
    pub phases: Vec<f64>,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default)]
    pub mode: ModeConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub nu: usize,
    pub nphi: usize,
    pub r_w: f64,
    /// `ln eps`.
    pub ln_eps: f64,
    pub delta: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let s = GridSpec::default();
        Self { nx: s.nx, ny: s.ny, nu: s.nu, nphi: s.nphi, r_w: s.r_w, ln_eps: s.eps.ln(), delta: s.delta }
    }
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            nx: self.nx,
            ny: self.ny,
            nu: self.nu,
            nphi: self.nphi,
            r_w: self.r_w,
            eps: self.ln_eps.exp(),
            delta: self.delta,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub dt: Option<f64>,
    pub cfl_factor: f64,
    pub t_max: f64,
    pub tol_b: f64,
    pub check_every: usize,
    pub tau_steps: usize,
}

impl Default for FlowSection {
    fn default() -> Self {
        let f = FlowConfig::default();
        Self {
            dt: f.dt,
            cfl_factor: f.cfl_factor,
            t_max: f.t_max,
            tol_b: f.tol_b,
            check_every: f.check_every,
            tau_steps: f.tau_steps,
        }
    }
}

impl FlowSection {
    pub fn config(&self) -> FlowConfig {
        FlowConfig {
            dt: self.dt,
            cfl_factor: self.cfl_factor,
            t_max: self.t_max,
            tol_b: self.tol_b,
            check_every: self.check_every,
            tau_steps: self.tau_steps,
        }
    }
}

/// `ln eps` values of an exhaustion schedule; `delta` stays at the grid's value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExhaustionConfig {
    pub ln_eps: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadConfig {
    pub n_polar: usize,
    pub n_azimuth: usize,
    pub tol: f64,
}

impl QuadConfig {
    pub fn spec(&self) -> QuadSpec {
        QuadSpec { n_polar: self.n_polar, n_azimuth: self.n_azimuth, tol: self.tol }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservablesConfig {
    /// Contour charge and degree.
    pub charge: bool,
    /// Energy identity of the initial data over the whole domain.
    pub initial_energy: bool,
    /// Energy split and ASD residual of the converged connection on the grid.
    pub grid_energy: bool,
    /// `sup |B(H_xi, eta)| / (1 - |z|)`.
    pub initial_bound: bool,
    /// Decay fits of the fields on `S^1 x R^3`.
    pub decay: bool,
    pub quad: QuadConfig,
    pub energy_quad: QuadConfig,
}

impl Default for ObservablesConfig {
    fn default() -> Self {
        let q = QuadSpec::default();
        Self {
            charge: true,
            initial_energy: true,
            grid_energy: true,
            initial_bound: true,
            decay: false,
            quad: QuadConfig { n_polar: q.n_polar, n_azimuth: q.n_azimuth, tol: q.tol },
            energy_quad: QuadConfig { n_polar: 24, n_azimuth: 24, tol: 1e-4 },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckpointConfig {
    pub enabled: bool,
    /// Monitor checks between checkpoint writes.
    pub every: usize,
}

impl Default for CheckpointConfig {
    fn default() -> Self {
        Self { enabled: true, every: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of the randomized checks in `verify`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub input: InputConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub exhaustion: ExhaustionConfig,
    #[serde(default)]
    pub observables: ObservablesConfig,
    #[serde(default)]
    pub checkpoint: CheckpointConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Reads `path`, applies `overrides` (`a.b=value`, value parsed as TOML, else as a string) and validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::from_toml(&text, overrides)?;
        if cfg.output.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.output = dir.join(&cfg.output);
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        let g = &self.grid;
        if !(g.ln_eps.is_finite() && g.delta > 0.0 && g.delta < 1.0) {
            return bad(format!("need eps > 0 and 0 < delta < 1, got ln_eps = {}, delta = {}", g.ln_eps, g.delta));
        }
        if g.ln_eps >= g.delta.ln() {
            return bad(format!("eps = e^{} must be below delta = {}", g.ln_eps, g.delta));
        }
        let f = &self.flow;
        if !(f.t_max > 0.0 && f.tol_b > 0.0 && f.cfl_factor > 0.0) || f.check_every == 0 || f.tau_steps == 0 {
            return bad("flow steps, tolerances and t_max must be positive".into());
        }
        if f.dt.is_some_and(|dt| !(dt > 0.0)) {
            return bad("dt must be positive".into());
        }
        if self.checkpoint.every == 0 {
            return bad("checkpoint.every must be positive".into());
        }
        if self.exhaustion.ln_eps.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("exhaustion.ln_eps must strictly decrease".into());
        }
        ProductGrid::new(g.spec())?;
        self.flow.config().resolve_dt(&ProductGrid::new(g.spec())?)?;
        self.eta()?;
        self.xi0()?;
        Ok(())
    }

    pub fn eta(&self) -> Result<EtaField> {
        let inp = &self.input;
        let mode = ParabolicMode::from(inp.mode);
        let parse = |s: &String| parse_rational(s).map_err(CliError::from);
        let e = match &inp.map {
            InputMap::Zero { dim } => {
                check_dim(*dim, inp.phases.len())?;
                EtaField::zero(*dim, inp.phases.clone(), inp.mu)?
            }
            InputMap::Blip { v } => {
                check_dim(v.len(), inp.phases.len())?;
                let v = v.iter().map(parse).collect::<Result<Vec<_>>>()?;
                eta_from_blip(&BlipMap { v, phases: inp.phases.clone(), mu: inp.mu }, mode)?
            }
            InputMap::Eta { dim, coeffs } => {
                check_dim(*dim, inp.phases.len())?;
                let rows = coeffs
                    .iter()
                    .map(|r| r.iter().map(parse).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                EtaField::new(*dim, inp.phases.clone(), inp.mu, rows, mode)?
            }
        };
        Ok(e)
    }

    pub fn xi0(&self) -> Result<LoopAlgebraElement> {
        Ok(LoopAlgebraElement::from_phases(&self.input.phases, self.input.mu)?)
    }

    /// SHA-256 of the canonical JSON of everything except `output`.
    pub fn hash(&self) -> [u8; 32] {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(bytes).into()
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash())
    }
}

fn check_dim(dim: usize, phases: usize) -> Result<()> {
    if dim == 0 || dim != phases {
        return Err(CliError::Config(format!("input has dimension {dim} but {phases} phases")));
    }
    Ok(())
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) =
        spec.split_once('=').ok_or_else(|| CliError::Config(format!("override `{spec}` is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    if matches!(value, toml::Value::Array(_) | toml::Value::Table(_)) {
        return Err(CliError::Config(format!("override `{key}` must be a scalar")));
    }
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut t = table;
    for p in path {
        t = t
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BLIP: &str = r#"
        output = "o"
        [input]
        kind = "blip"
        v = ["1", "W"]
        phases = [0.0, 0.0]
        [grid]
        nx = 7
        ny = 7
        nu = 9
        nphi = 4
    "#;

    #[test]
    fn parses_defaults_and_overrides() {
        let c = RunConfig::from_toml(BLIP, &["flow.t_max=3.5".into(), "seed=9".into()]).unwrap();
        assert_eq!(c.flow.t_max, 3.5);
        assert_eq!(c.seed, 9);
        assert_eq!(c.grid.delta, GridSpec::default().delta);
        assert_eq!(c.eta().unwrap().degree_in_z(), 1);
    }

    #[test]
    fn rejects_bad_domains_and_keys() {
        assert!(matches!(RunConfig::from_toml(BLIP, &["grid.ln_eps=0.5".into()]), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::from_toml(BLIP, &["grid.delta=1.0".into()]), Err(CliError::Config(_))));
        assert!(RunConfig::from_toml(BLIP, &["grid.bogus=1".into()]).is_err());
        assert!(RunConfig::from_toml(BLIP, &["input.phases=[1]".into()]).is_err());
        assert!(RunConfig::from_toml(BLIP, &["input.v=x".into()]).is_err());
    }

    #[test]
    fn hash_ignores_output_only() {
        let a = RunConfig::from_toml(BLIP, &[]).unwrap();
        let b = RunConfig::from_toml(BLIP, &["output=elsewhere".into()]).unwrap();
        let c = RunConfig::from_toml(BLIP, &["seed=1".into()]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
