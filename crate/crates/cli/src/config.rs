//! Run configuration: TOML sections, preset bases and environment overrides.

use std::path::{Path, PathBuf};

use polyflow_core::grids::phys::{Boundary, PhysGrid};
use polyflow_core::laws::{ResponseCurves, RouseMatrix, SpringLaw, Table};
use polyflow_core::stepper::SchemeParams;
use serde::{Deserialize, Serialize};
use toml::{Table as TomlTable, Value};

use crate::presets;

pub const ENV_PREFIX: &str = "POLYFLOW_";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Syntax(String),
    #[error("key `{key}`{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Key { key: String, line: Option<usize>, message: String },
    #[error("unknown preset `{0}`; known presets: {list}", list = presets::NAMES.join(", "))]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Noslip,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Fene,
    Cpail,
    Hookean,
    InverseLangevin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityProfile {
    /// Midpoint of `[rho_min, rho_max]`.
    Uniform,
    /// `tanh` layer across `y = ly/2` spanning `[rho_min, rho_max]`.
    MixingLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityProfile {
    Zero,
    /// Single cell vortex with stream function `A sin²(πx/lx) sin²(πy/ly)`.
    Vortex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForceProfile {
    None,
    /// Steady forcing whose Stokes/Navier–Stokes solution is the vortex.
    Mms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiProfile {
    Equilibrium,
    /// `1 + a cos(2πx/lx) · 2 q_x q_y / b` on the first spring.
    Perturbed,
    /// The constant `psi0_amplitude`.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub bc: BoundaryKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolymerConfig {
    pub model: Model,
    #[serde(rename = "K")]
    pub springs: usize,
    pub b: Vec<f64>,
    pub nr: usize,
    pub ntheta: usize,
    pub psi0: PsiProfile,
    pub psi0_amplitude: f64,
    /// Prescribed constant `∇u` (row-major); skips the momentum solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_gradient: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidConfig {
    pub rho0: DensityProfile,
    pub rho0_width: f64,
    pub u0: VelocityProfile,
    pub u0_amplitude: f64,
    pub force: ForceProfile,
    /// `(ρ, μ)` pairs; empty means `μ ≡ 1`.
    pub mu_table: Vec<[f64; 2]>,
    /// `(ρ, ζ)` pairs; empty means `ζ ≡ 1`.
    pub zeta_table: Vec<[f64; 2]>,
    pub rho_min: f64,
    pub rho_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "N")]
    pub n_steps: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub k: f64,
    #[serde(rename = "linkage_C0", default, skip_serializing_if = "Option::is_none")]
    pub linkage_c0: Option<f64>,
    pub tol_fp: f64,
    pub maxit_fp: usize,
    pub theta_fp: f64,
    pub cutoff: bool,
    /// Absent means negative nodal values are reported but not fatal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negativity_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    /// Snapshot cadence in steps; 0 disables snapshots.
    pub snapshot_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_dir: Option<PathBuf>,
    pub store_trajectory: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    /// Worker threads; results do not depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub domain: DomainConfig,
    pub polymer: PolymerConfig,
    pub fluid: FluidConfig,
    pub scheme: SchemeConfig,
    pub output: OutputConfig,
}

fn line_of(source: &str, key: &str) -> Option<usize> {
    source.lines().position(|l| {
        let t = l.trim_start();
        t.strip_prefix(key).is_some_and(|r| r.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn merge(base: &mut TomlTable, patch: TomlTable) {
    for (k, v) in patch {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(p)) => merge(b, p),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses a scalar override the way TOML would, falling back to a string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<TomlTable>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Maps `POLYFLOW_SCHEME_N=50` onto `scheme.N`, matching section and key
/// names case-insensitively against the base table.
fn apply_env(table: &mut TomlTable, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
    for (name, raw) in vars {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
        let rest = rest.to_ascii_lowercase();
        let top = table
            .keys()
            .find(|k| k.to_ascii_lowercase() == rest)
            .cloned()
            .or_else(|| ["preset", "threads"].contains(&rest.as_str()).then(|| rest.clone()));
        if let Some(k) = top {
            table.insert(k, parse_value(&raw));
            continue;
        }
        let mut hit = false;
        for (section, value) in table.iter_mut() {
            let Some(key) = rest.strip_prefix(&format!("{section}_")) else { continue };
            let Value::Table(t) = value else { continue };
            let existing = t.keys().find(|k| k.to_ascii_lowercase() == key).cloned();
            t.insert(existing.unwrap_or_else(|| key.to_string()), parse_value(&raw));
            hit = true;
            break;
        }
        if !hit {
            return Err(ConfigError::Key { key: name, line: None, message: "matches no configuration key".into() });
        }
    }
    Ok(())
}

impl RunConfig {
    /// Parses configuration text on top of its preset (default
    /// `equilibrium`), then applies environment overrides.
    pub fn from_str_with_env(source: &str, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self, ConfigError> {
        let patch: TomlTable = source.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let name = match patch.get("preset") {
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                return Err(ConfigError::Key {
                    key: "preset".into(),
                    line: line_of(source, "preset"),
                    message: "must be a string".into(),
                })
            }
            None => "equilibrium".into(),
        };
        let base = presets::preset(&name).ok_or(ConfigError::UnknownPreset(name))?;
        let mut table = TomlTable::try_from(&base).expect("presets serialize");
        merge(&mut table, patch);
        apply_env(&mut table, vars)?;
        let config: RunConfig = table.try_into().map_err(|e: toml::de::Error| {
            let message = e.message().to_string();
            let key = message
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<config>".into());
            ConfigError::Key { line: line_of(source, &key), key, message }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_str(source: &str) -> Result<Self, ConfigError> {
        Self::from_str_with_env(source, std::iter::empty())
    }

    /// Reads `path` and applies `POLYFLOW_*` variables from the process
    /// environment.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_str_with_env(&text, std::env::vars())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    fn key_error(key: &str, e: impl std::fmt::Display) -> ConfigError {
        ConfigError::Key { key: key.into(), line: None, message: e.to_string() }
    }

    /// Every admissibility check the solver would apply, run up front.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid()?;
        self.laws()?;
        self.curves()?;
        self.scheme_params()?;
        let f = &self.fluid;
        if f.rho0 == DensityProfile::MixingLayer && !(f.rho0_width > 0.0) {
            return Err(Self::key_error("fluid.rho0_width", "must be positive"));
        }
        let p = &self.polymer;
        if p.psi0 == PsiProfile::Constant && !(p.psi0_amplitude >= 0.0) {
            return Err(Self::key_error("polymer.psi0_amplitude", "a constant ψ̃0 must be nonnegative"));
        }
        if p.psi0 == PsiProfile::Perturbed && p.model == Model::Hookean {
            return Err(Self::key_error("polymer.psi0", "the perturbed profile needs a finitely extensible spring"));
        }
        if p.psi0 == PsiProfile::Perturbed && !(p.psi0_amplitude.abs() <= 1.0) {
            return Err(Self::key_error("polymer.psi0_amplitude", "|a| ≤ 1 keeps the perturbed ψ̃0 nonnegative"));
        }
        if self.threads == Some(0) {
            return Err(Self::key_error("threads", "must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<PhysGrid, ConfigError> {
        let d = &self.domain;
        let bc = match d.bc {
            BoundaryKind::Noslip => Boundary::NoSlip,
            BoundaryKind::Periodic => Boundary::Periodic,
        };
        PhysGrid::new(d.lx, d.ly, d.nx, d.ny, bc).map_err(|e| Self::key_error("domain", e))
    }

    pub fn laws(&self) -> Result<Vec<SpringLaw>, ConfigError> {
        let p = &self.polymer;
        if p.springs == 0 {
            return Err(Self::key_error("polymer.K", "need at least one spring"));
        }
        if p.model != Model::Hookean && p.b.len() != p.springs {
            return Err(Self::key_error("polymer.b", format!("expected {} entries, got {}", p.springs, p.b.len())));
        }
        (0..p.springs)
            .map(|i| {
                let law = match p.model {
                    Model::Hookean => Ok(SpringLaw::hookean()),
                    Model::Fene => SpringLaw::fene(p.b[i]),
                    Model::Cpail => SpringLaw::cpail(p.b[i]),
                    Model::InverseLangevin => SpringLaw::inverse_langevin(p.b[i]),
                }
                .map_err(|e| Self::key_error("polymer.b", e))?;
                if law.is_bounded() {
                    law.growth_exponent().map_err(|e| Self::key_error("polymer.b", e))?;
                }
                Ok(law)
            })
            .collect()
    }

    pub fn curves(&self) -> Result<ResponseCurves, ConfigError> {
        let f = &self.fluid;
        let table = |name: &str, pts: &[[f64; 2]]| {
            if pts.is_empty() {
                Table::constant(f.rho_min, f.rho_max, 1.0)
            } else {
                Table::new(pts.iter().map(|p| (p[0], p[1])).collect())
            }
            .map_err(|e| Self::key_error(name, e))
        };
        ResponseCurves::new(f.rho_min, f.rho_max, table("fluid.mu_table", &f.mu_table)?, table("fluid.zeta_table", &f.zeta_table)?)
            .map_err(|e| Self::key_error("fluid", e))
    }

    /// Scheme parameters with linkage applied.
    pub fn scheme_params(&self) -> Result<SchemeParams, ConfigError> {
        let s = &self.scheme;
        let k = self.polymer.springs;
        let mut p = SchemeParams::new(s.t_final, s.n_steps, k).map_err(|e| Self::key_error("scheme", e))?;
        p.l = s.l;
        p.delta = s.delta;
        p.epsilon = s.epsilon;
        p.lambda = s.lambda;
        p.k = s.k;
        p.rouse = RouseMatrix::linear_chain(k).map_err(|e| Self::key_error("polymer.K", e))?;
        p.curves = self.curves()?;
        p.tol_fp = s.tol_fp;
        p.maxit_fp = s.maxit_fp;
        p.theta_fp = s.theta_fp;
        p.linkage_c0 = s.linkage_c0;
        p.cutoff = s.cutoff;
        p.negativity_threshold = s.negativity_threshold;
        p.imposed_gradient = self.polymer.velocity_gradient;
        p.apply_linkage().map_err(|e| Self::key_error("scheme.linkage_C0", e))?;
        p.validate().map_err(|e| Self::key_error("scheme", e))?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_equilibrium_defaults() {
        let c = RunConfig::from_str("preset = \"equilibrium\"\n").unwrap();
        assert_eq!(c, presets::preset("equilibrium").unwrap());
        assert_eq!(RunConfig::from_str("").unwrap(), c);
    }

    #[test]
    fn inadmissible_fene_names_the_key() {
        let err = RunConfig::from_str("[polymer]\nb = [2.0]\n").unwrap_err().to_string();
        assert!(err.contains("polymer.b") && err.contains("≤ 1 inadmissible"), "{err}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::from_str("[scheme]\n\nbogus = 1\n").unwrap_err();
        match err {
            ConfigError::Key { key, line, .. } => {
                assert_eq!(key, "bogus");
                assert_eq!(line, Some(3));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn linkage_derives_step_count() {
        let c = RunConfig::from_str("[scheme]\nT = 1.0\nL = 10.0\nlinkage_C0 = 0.1\n").unwrap();
        let p = c.scheme_params().unwrap();
        assert!((p.dt() - 0.1 / (10.0 * 10f64.ln())).abs() < 2e-5);
        assert!(p.dt() * 10.0 * 10f64.ln() <= 0.1);
    }

    #[test]
    fn env_overrides_match_keys() {
        let vars = [
            ("POLYFLOW_SCHEME_N".to_string(), "7".to_string()),
            ("POLYFLOW_DOMAIN_BC".to_string(), "noslip".to_string()),
            ("POLYFLOW_THREADS".to_string(), "3".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ];
        let c = RunConfig::from_str_with_env("", vars).unwrap();
        assert_eq!(c.scheme.n_steps, 7);
        assert_eq!(c.domain.bc, BoundaryKind::Noslip);
        assert_eq!(c.threads, Some(3));
        let bad = [("POLYFLOW_NOPE_X".to_string(), "1".to_string())];
        assert!(RunConfig::from_str_with_env("", bad).is_err());
    }

    #[test]
    fn presets_round_trip() {
        for name in presets::NAMES {
            let c = presets::preset(name).unwrap();
            let text = c.to_toml();
            assert_eq!(RunConfig::from_str(&text).unwrap(), c, "{name}");
        }
    }
}
