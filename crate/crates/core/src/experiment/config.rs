//! Flat `key = value` experiment configs.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::field::{DiffScheme, GridSpec, PeriodicScalarField};
use crate::flow::FlowConfig;
use crate::initial::{psi_scale, random_bandlimited, single_mode};

pub const CONFIG_KEYS: [&str; 16] = [
    "dim",
    "sizes",
    "periods",
    "kappa",
    "cfl",
    "scheme",
    "t_max",
    "conv_tol",
    "c0",
    "c1",
    "eps1",
    "checkpoint_every",
    "u0_preset",
    "u0_amplitude",
    "u0_seed",
    "u0_modes",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("`{key}`: cannot parse {value:?}: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Initial data families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `u ≡ amplitude`.
    Constant,
    /// `amplitude · cos(2π k x₁ / P₁)` with `k = u0_modes`.
    SingleMode,
    /// Random trigonometric polynomial with modes `≤ u0_modes` from
    /// `u0_seed`, scaled so that `max ψ(u₀) = amplitude²`.
    RandomBandlimited,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Constant => "constant",
            Preset::SingleMode => "single_mode",
            Preset::RandomBandlimited => "random_bandlimited",
        })
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(Preset::Constant),
            "single_mode" => Ok(Preset::SingleMode),
            "random_bandlimited" => Ok(Preset::RandomBandlimited),
            other => Err(format!(
                "unknown preset `{other}` (expected constant, single_mode or random_bandlimited)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub preset: Preset,
    pub amplitude: f64,
    pub seed: u64,
    pub modes: usize,
}

impl InitialData {
    pub fn sample(&self, flow: &FlowConfig) -> Result<PeriodicScalarField, ConfigError> {
        let grid = &flow.grid;
        match self.preset {
            Preset::Constant => PeriodicScalarField::constant(grid, self.amplitude)
                .map_err(|e| ConfigError::Invalid(e.to_string())),
            Preset::SingleMode => Ok(single_mode(grid, self.modes, self.amplitude)),
            Preset::RandomBandlimited => {
                let u = random_bandlimited(grid, self.modes, self.seed);
                let target = self.amplitude * self.amplitude;
                let s = psi_scale(&u, flow.c0, flow.c1, target, flow.scheme).unwrap_or(0.0);
                Ok(u.scaled(s))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub flow: FlowConfig,
    pub initial: InitialData,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

/// A one-element list stands for the same value on every axis.
fn per_axis<T: Clone>(key: &str, values: Vec<T>, dim: usize) -> Result<Vec<T>, ConfigError> {
    match values.len() {
        1 => Ok(vec![values[0].clone(); dim]),
        n if n == dim => Ok(values),
        n => Err(ConfigError::Invalid(format!(
            "`{key}` has {n} entries for dim = {dim}"
        ))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.to_string(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !CONFIG_KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if map.insert(key, (line, value)).is_some() {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
        }
        let get = |k: &str| map.get(k).map(|(_, v)| *v);
        let dim: usize = parse_value("dim", get("dim").ok_or(ConfigError::Missing("dim"))?)?;
        if !(1..=3).contains(&dim) {
            return Err(ConfigError::Invalid(format!("dim = {dim} not in 1..=3")));
        }
        let sizes = per_axis(
            "sizes",
            parse_list("sizes", get("sizes").ok_or(ConfigError::Missing("sizes"))?)?,
            dim,
        )?;
        let periods = match get("periods") {
            Some(v) => per_axis("periods", parse_list("periods", v)?, dim)?,
            None => vec![1.0; dim],
        };
        let grid =
            GridSpec::new(sizes, periods).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut flow = FlowConfig::new(grid);
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = get(stringify!($field)) {
                    flow.$field = parse_value(stringify!($field), v)?;
                }
            };
        }
        set!(kappa);
        set!(cfl);
        set!(t_max);
        set!(conv_tol);
        set!(c0);
        set!(c1);
        set!(eps1);
        set!(checkpoint_every);
        if let Some(v) = get("scheme") {
            flow.scheme = parse_value::<DiffScheme>("scheme", v)?;
        }
        flow.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let preset: Preset = parse_value(
            "u0_preset",
            get("u0_preset").ok_or(ConfigError::Missing("u0_preset"))?,
        )?;
        let amplitude: f64 = match get("u0_amplitude") {
            Some(v) => parse_value("u0_amplitude", v)?,
            None => 1e-3,
        };
        if !amplitude.is_finite() {
            return Err(ConfigError::Invalid(format!("u0_amplitude = {amplitude}")));
        }
        let seed = get("u0_seed")
            .map(|v| parse_value("u0_seed", v))
            .transpose()?
            .unwrap_or(0);
        let default_modes = if preset == Preset::RandomBandlimited {
            3
        } else {
            1
        };
        let modes = get("u0_modes")
            .map(|v| parse_value("u0_modes", v))
            .transpose()?
            .unwrap_or(default_modes);
        Ok(Self {
            flow,
            initial: InitialData {
                preset,
                amplitude,
                seed,
                modes,
            },
        })
    }

    /// Text that [`ExperimentConfig::parse`] reads back to an equal config.
    pub fn to_text(&self) -> String {
        let f = &self.flow;
        let join = |v: Vec<String>| v.join(", ");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("dim", f.grid.dim().to_string());
        kv(
            "sizes",
            join(f.grid.sizes().iter().map(|n| n.to_string()).collect()),
        );
        kv(
            "periods",
            join(f.grid.periods().iter().map(|p| format!("{p:e}")).collect()),
        );
        kv("kappa", format!("{:e}", f.kappa));
        kv("cfl", format!("{:e}", f.cfl));
        kv("scheme", f.scheme.to_string());
        kv("t_max", format!("{:e}", f.t_max));
        kv("conv_tol", format!("{:e}", f.conv_tol));
        kv("c0", format!("{:e}", f.c0));
        kv("c1", format!("{:e}", f.c1));
        kv("eps1", format!("{:e}", f.eps1));
        kv("checkpoint_every", f.checkpoint_every.to_string());
        kv("u0_preset", self.initial.preset.to_string());
        kv("u0_amplitude", format!("{:e}", self.initial.amplitude));
        kv("u0_seed", self.initial.seed.to_string());
        kv("u0_modes", self.initial.modes.to_string());
        s
    }

    /// Built-in named experiments.
    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "stability_kappa0" => {
                "dim = 1\nsizes = 128\nkappa = 0\nt_max = 2\ncheckpoint_every = 200\n\
                 u0_preset = single_mode\nu0_amplitude = 1e-3\nu0_modes = 1\n"
            }
            "constant_decay" => {
                "dim = 1\nsizes = 64\nkappa = -1\nt_max = 5\ncheckpoint_every = 1000\n\
                 u0_preset = constant\nu0_amplitude = 0.01\n"
            }
            // Data far outside the small-data regime; outcomes carry no
            // certified meaning.
            "large_data_exploratory" => {
                "dim = 1\nsizes = 64\nkappa = 0\nt_max = 1\ncheckpoint_every = 200\n\
                 u0_preset = random_bandlimited\nu0_amplitude = 2\nu0_modes = 4\nu0_seed = 7\n"
            }
            _ => return None,
        };
        Some(Self::parse(text).expect("built-in configs are valid"))
    }

    pub const BUILTINS: [&'static str; 3] = [
        "stability_kappa0",
        "constant_decay",
        "large_data_exploratory",
    ];

    /// Initial data whose max ψ is not below `eps1²`, where no stability
    /// statement applies.
    pub fn is_exploratory(&self, u0: &PeriodicScalarField) -> bool {
        let f = &self.flow;
        let max = psi_scale(u0, f.c0, f.c1, 1.0, f.scheme).map_or(0.0, |s| 1.0 / (s * s));
        f.is_experimental() || max >= f.eps1 * f.eps1
    }
}
