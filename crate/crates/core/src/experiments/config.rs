//! Flat `key = value` scenario files with dotted section names.
//!
//! ```text
//! # comments start with '#'
//! field = C
//! functional.epsilon = 0.1, 0.05
//! kernel.gamma = 0, 1, 3, 9
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::{Rotation2, Vector2};

use crate::error::{Error, Result};
use crate::fields::FieldId;
use crate::flow::FlowSolverConfig;
use crate::functionals::{FlowSpec, FunctionalConfig};
use crate::kernels::{AnisotropicKernel, DirectionField, ProfileKind};

/// A configuration problem, located by line (when known) and key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}, key `{}`: {}", self.key, self.message),
            None => write!(f, "key `{}`: {}", self.key, self.message),
        }
    }
}

impl From<ConfigError> for Error {
    fn from(e: ConfigError) -> Self {
        Error::Config(e.to_string())
    }
}

/// How one of the two compared flows is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowSource {
    Exact,
    Solver,
}

impl fmt::Display for FlowSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowSource::Exact => "exact",
            FlowSource::Solver => "solver",
        })
    }
}

impl FromStr for FlowSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact" => Ok(FlowSource::Exact),
            "solver" => Ok(FlowSource::Solver),
            other => Err(format!("expected `exact` or `solver`, got {other:?}")),
        }
    }
}

/// Direction field of the kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EtaKind {
    /// The first jump normal of the field rotated by `eta_delta`
    /// (`e₁` rotated by `eta_delta` for fields without jumps).
    Aligned,
    /// `(cos eta_angle, sin eta_angle)`.
    Constant,
    /// Normalized `(1, 0.3) + tilt_amplitude·sin(2π(x₁+x₂))·e₂`.
    Tilted,
}

impl fmt::Display for EtaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EtaKind::Aligned => "aligned",
            EtaKind::Constant => "constant",
            EtaKind::Tilted => "tilted",
        })
    }
}

impl FromStr for EtaKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "aligned" => Ok(EtaKind::Aligned),
            "constant" => Ok(EtaKind::Constant),
            "tilted" => Ok(EtaKind::Tilted),
            other => Err(format!("expected `aligned`, `constant` or `tilted`, got {other:?}")),
        }
    }
}

/// The sweep axis and its fit abscissa.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Abscissa `1/ε`.
    Epsilon,
    /// Abscissa `1 + γ`.
    Gamma,
    /// Abscissa `t`.
    Time,
}

impl Axis {
    pub fn abscissa(self, v: f64) -> f64 {
        match self {
            Axis::Epsilon => 1.0 / v,
            Axis::Gamma => 1.0 + v,
            Axis::Time => v,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Epsilon => "epsilon",
            Axis::Gamma => "gamma",
            Axis::Time => "t",
        })
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "epsilon" => Ok(Axis::Epsilon),
            "gamma" => Ok(Axis::Gamma),
            "t" => Ok(Axis::Time),
            other => Err(format!("expected `epsilon`, `gamma` or `t`, got {other:?}")),
        }
    }
}

/// Report columns that can be swept.
pub const SWEEP_QUANTITIES: [&str; 7] = [
    "D",
    "I_eps_fd",
    "I1",
    "I2",
    "I2_a_limit",
    "singular_bound",
    "eqfin_residual",
];

#[derive(Clone, Debug, PartialEq)]
pub struct KernelConfig {
    pub profile: ProfileKind,
    pub eta: EtaKind,
    pub eta_angle: f64,
    pub eta_delta: f64,
    pub tilt_amplitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub field: FieldId,
    pub solver: FlowSolverConfig,
    pub flow_x: FlowSource,
    pub flow_y: FlowSource,
    /// Translation applied to the second flow.
    pub shift: [f64; 2],
    pub kernel: KernelConfig,
    pub epsilons: Vec<f64>,
    pub gammas: Vec<f64>,
    pub times: Vec<f64>,
    pub x_grid: usize,
    pub z_grid: usize,
    pub theta_nodes: usize,
    pub dt_fd: f64,
    pub sweep_axis: Axis,
    pub sweep_quantity: String,
    /// Random points for the divergence-identity spot check.
    pub spot_checks: usize,
    pub output: PathBuf,
    pub seed: u64,
}

impl ScenarioConfig {
    /// The defaults for everything except `field`.
    pub fn with_field(field: FieldId) -> Self {
        let f = FunctionalConfig::default();
        ScenarioConfig {
            field,
            solver: FlowSolverConfig::default(),
            flow_x: FlowSource::Solver,
            flow_y: FlowSource::Exact,
            shift: [0.0, 0.0],
            kernel: KernelConfig {
                profile: ProfileKind::PolyBump,
                eta: EtaKind::Aligned,
                eta_angle: 0.0,
                eta_delta: 0.0,
                tilt_amplitude: 0.4,
            },
            epsilons: vec![f.epsilon],
            gammas: vec![0.0],
            times: vec![f.t],
            x_grid: 16,
            z_grid: 32,
            theta_nodes: f.theta_nodes,
            dt_fd: f.dt_fd,
            sweep_axis: Axis::Gamma,
            sweep_quantity: "singular_bound".into(),
            spot_checks: 8,
            output: PathBuf::from("out"),
            seed: 0,
        }
    }

    pub fn parse(text: &str) -> std::result::Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError {
                line: Some(line),
                key: body.to_string(),
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError {
                    line: Some(line),
                    key,
                    message: "unknown key".into(),
                });
            }
            if let Some((first, _)) = entries.get(&key) {
                return Err(ConfigError {
                    line: Some(line),
                    message: format!("duplicate key, first set on line {first}"),
                    key,
                });
            }
            entries.insert(key, (line, value.trim().to_string()));
        }
        let (field_line, field_value) = entries.get("field").cloned().ok_or_else(|| ConfigError {
            line: None,
            key: "field".into(),
            message: "missing required key".into(),
        })?;
        let field = field_value.parse::<FieldId>().map_err(|_| ConfigError {
            line: Some(field_line),
            key: "field".into(),
            message: format!("unknown catalog field {field_value:?}"),
        })?;
        let mut c = ScenarioConfig::with_field(field);
        let mut r = Reader { entries: &entries };
        r.set("solver.method", &mut c.solver.method)?;
        r.set("solver.step", &mut c.solver.step)?;
        r.set("solver.event_tol", &mut c.solver.event_tol)?;
        r.set("solver.max_crossings", &mut c.solver.max_crossings)?;
        r.set("solver.start_side", &mut c.solver.start_side)?;
        r.set("flow.x", &mut c.flow_x)?;
        r.set("flow.y", &mut c.flow_y)?;
        if let Some(v) = r.list::<f64>("flow.shift")? {
            c.shift = <[f64; 2]>::try_from(v).map_err(|_| r.error("flow.shift", "expected two components"))?;
        }
        r.set("kernel.profile", &mut c.kernel.profile)?;
        r.set("kernel.eta", &mut c.kernel.eta)?;
        r.set("kernel.eta_angle", &mut c.kernel.eta_angle)?;
        r.set("kernel.eta_delta", &mut c.kernel.eta_delta)?;
        r.set("kernel.tilt_amplitude", &mut c.kernel.tilt_amplitude)?;
        r.set_list("kernel.gamma", &mut c.gammas)?;
        r.set_list("functional.epsilon", &mut c.epsilons)?;
        r.set_list("functional.t", &mut c.times)?;
        r.set("functional.x_grid", &mut c.x_grid)?;
        r.set("functional.z_grid", &mut c.z_grid)?;
        r.set("functional.theta_nodes", &mut c.theta_nodes)?;
        r.set("functional.dt_fd", &mut c.dt_fd)?;
        r.set("sweep.axis", &mut c.sweep_axis)?;
        r.set("sweep.quantity", &mut c.sweep_quantity)?;
        r.set("checks.spot_points", &mut c.spot_checks)?;
        r.set("output", &mut c.output)?;
        r.set("seed", &mut c.seed)?;
        c.validate().map_err(|(key, message)| ConfigError {
            line: entries.get(key).map(|e| e.0),
            key: key.to_string(),
            message,
        })?;
        Ok(c)
    }

    /// Checks every cross-key constraint; the error names the offending key.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        self.solver.validate().map_err(|e| ("solver.step", e.to_string()))?;
        for (key, list) in [
            ("functional.epsilon", &self.epsilons),
            ("kernel.gamma", &self.gammas),
            ("functional.t", &self.times),
        ] {
            if list.is_empty() {
                return Err((key, "list must not be empty".into()));
            }
            if list.iter().any(|v| !v.is_finite()) {
                return Err((key, "values must be finite".into()));
            }
        }
        if let Some(e) = self.epsilons.iter().find(|&&e| !(e > 0.0 && e < 0.5)) {
            return Err((
                "functional.epsilon",
                format!("{e} outside (0, 1/2): the scaled kernel support must fit the torus"),
            ));
        }
        if let Some(g) = self.gammas.iter().find(|&&g| g < 0.0) {
            return Err(("kernel.gamma", format!("{g} is negative")));
        }
        if let Some(t) = self.times.iter().find(|&&t| t - self.dt_fd < 0.0) {
            return Err(("functional.t", format!("t = {t} needs t − dt_fd ≥ 0")));
        }
        if self.x_grid == 0 {
            return Err(("functional.x_grid", "must be at least 1".into()));
        }
        if self.z_grid < 2 {
            return Err(("functional.z_grid", "must be at least 2".into()));
        }
        if self.theta_nodes == 0 {
            return Err(("functional.theta_nodes", "must be at least 1".into()));
        }
        if !(self.dt_fd > 0.0 && self.dt_fd.is_finite()) {
            return Err(("functional.dt_fd", "must be > 0".into()));
        }
        if self.field == FieldId::A {
            for (key, src) in [("flow.x", self.flow_x), ("flow.y", self.flow_y)] {
                if src == FlowSource::Exact {
                    return Err((key, "field A has no closed-form flow; use `solver`".into()));
                }
            }
        }
        if !SWEEP_QUANTITIES.contains(&self.sweep_quantity.as_str()) {
            return Err(("sweep.quantity", format!("expected one of {SWEEP_QUANTITIES:?}")));
        }
        if !(self.kernel.eta_angle.is_finite()
            && self.kernel.eta_delta.is_finite()
            && self.kernel.tilt_amplitude.is_finite())
        {
            return Err(("kernel.eta_angle", "direction parameters must be finite".into()));
        }
        if !self.shift.iter().all(|v| v.is_finite()) {
            return Err(("flow.shift", "must be finite".into()));
        }
        Ok(())
    }

    /// Canonical `key = value` text; [`ScenarioConfig::parse`] inverts it.
    pub fn echo(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("field", self.field.to_string());
        kv("seed", self.seed.to_string());
        kv("output", self.output.display().to_string());
        kv("solver.method", self.solver.method.to_string());
        kv("solver.step", format!("{:?}", self.solver.step));
        kv("solver.event_tol", format!("{:?}", self.solver.event_tol));
        kv("solver.max_crossings", self.solver.max_crossings.to_string());
        kv("solver.start_side", self.solver.start_side.to_string());
        kv("flow.x", self.flow_x.to_string());
        kv("flow.y", self.flow_y.to_string());
        kv("flow.shift", list(&self.shift));
        kv("kernel.profile", self.kernel.profile.to_string());
        kv("kernel.eta", self.kernel.eta.to_string());
        kv("kernel.eta_angle", format!("{:?}", self.kernel.eta_angle));
        kv("kernel.eta_delta", format!("{:?}", self.kernel.eta_delta));
        kv("kernel.tilt_amplitude", format!("{:?}", self.kernel.tilt_amplitude));
        kv("kernel.gamma", list(&self.gammas));
        kv("functional.epsilon", list(&self.epsilons));
        kv("functional.t", list(&self.times));
        kv("functional.x_grid", self.x_grid.to_string());
        kv("functional.z_grid", self.z_grid.to_string());
        kv("functional.theta_nodes", self.theta_nodes.to_string());
        kv("functional.dt_fd", format!("{:?}", self.dt_fd));
        kv("sweep.axis", self.sweep_axis.to_string());
        kv("sweep.quantity", self.sweep_quantity.clone());
        kv("checks.spot_points", self.spot_checks.to_string());
        s
    }

    pub fn kernel(&self, gamma: f64) -> Result<AnisotropicKernel<2>> {
        let k = &self.kernel;
        let eta = match k.eta {
            EtaKind::Aligned => {
                let base = self.field.field().jumps().first().map_or(Vector2::x(), |j| j.eta);
                DirectionField::constant(Rotation2::new(k.eta_delta) * base)?
            }
            EtaKind::Constant => DirectionField::constant(Rotation2::new(k.eta_angle) * Vector2::x())?,
            EtaKind::Tilted => {
                DirectionField::tilted(Vector2::new(1.0, 0.3), Vector2::new(0.0, 1.0), k.tilt_amplitude, [1, 1])?
            }
        };
        AnisotropicKernel::new(k.profile, eta, gamma)
    }

    pub fn functional(&self, epsilon: f64, t: f64) -> FunctionalConfig {
        FunctionalConfig {
            epsilon,
            x_grid: self.x_grid,
            z_grid: self.z_grid,
            theta_nodes: self.theta_nodes,
            t,
            dt_fd: self.dt_fd,
        }
    }

    /// The two flows to compare.
    pub fn flows(&self) -> (FlowSpec, FlowSpec) {
        let make = |src| match src {
            FlowSource::Exact => FlowSpec::Exact(self.field),
            FlowSource::Solver => FlowSpec::Solver(self.field, self.solver.clone()),
        };
        let y = make(self.flow_y);
        let y = if self.shift == [0.0, 0.0] {
            y
        } else {
            FlowSpec::Shifted(Box::new(y), self.shift)
        };
        (make(self.flow_x), y)
    }
}

const KEYS: [&str; 26] = [
    "field",
    "seed",
    "output",
    "solver.method",
    "solver.step",
    "solver.event_tol",
    "solver.max_crossings",
    "solver.start_side",
    "flow.x",
    "flow.y",
    "flow.shift",
    "kernel.profile",
    "kernel.eta",
    "kernel.eta_angle",
    "kernel.eta_delta",
    "kernel.tilt_amplitude",
    "kernel.gamma",
    "functional.epsilon",
    "functional.t",
    "functional.x_grid",
    "functional.z_grid",
    "functional.theta_nodes",
    "functional.dt_fd",
    "sweep.axis",
    "sweep.quantity",
    "checks.spot_points",
];

struct Reader<'a> {
    entries: &'a BTreeMap<String, (usize, String)>,
}

impl Reader<'_> {
    fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.entries.get(key).map(|e| e.0),
            key: key.into(),
            message: message.into(),
        }
    }

    fn set<T: FromStr>(&mut self, key: &str, slot: &mut T) -> std::result::Result<(), ConfigError>
    where
        T::Err: fmt::Display,
    {
        if let Some((_, v)) = self.entries.get(key) {
            *slot = v
                .parse()
                .map_err(|e: T::Err| self.error(key, format!("cannot parse {v:?}: {e}")))?;
        }
        Ok(())
    }

    fn list<T: FromStr>(&mut self, key: &str) -> std::result::Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let Some((_, v)) = self.entries.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|p| p.trim())
            .filter(|p| !p.is_empty())
            .map(|p| {
                p.parse()
                    .map_err(|e: T::Err| self.error(key, format!("cannot parse {p:?}: {e}")))
            })
            .collect::<std::result::Result<Vec<T>, _>>()
            .map(Some)
    }

    fn set_list<T: FromStr>(&mut self, key: &str, slot: &mut Vec<T>) -> std::result::Result<(), ConfigError>
    where
        T::Err: fmt::Display,
    {
        if let Some(v) = self.list(key)? {
            *slot = v;
        }
        Ok(())
    }
}
