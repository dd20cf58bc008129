//! TOML run configuration.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use nhsense_core::analysis::{optimal_alpha, Axis, DrivePlacement, Param, ScanGrid, ScanMode};
use nhsense_core::{ChainSpec, DriveSpec, Parity, PerturbationKind, PerturbationSpec};

#[derive(Debug, Clone)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Response,
    Scaling,
    PhaseDiagram,
    Stability,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Angle given either in radians or as a multiple of π (`"pi/4"`, `"-3pi/2"`, `"0.5*pi"`).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Radians(f64),
    Text(String),
}

impl Angle {
    pub fn radians(&self) -> Result<f64, ConfigError> {
        match self {
            Angle::Radians(v) => Ok(*v),
            Angle::Text(s) => parse_angle(s),
        }
    }
}

pub fn parse_angle(text: &str) -> Result<f64, ConfigError> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    let err = || bad(format!("cannot parse angle {text:?}"));
    let Some(pos) = s.find("pi") else {
        return s.parse::<f64>().map_err(|_| err());
    };
    let head = s[..pos].trim_end_matches('*');
    let coeff = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| err())?,
    };
    let tail = &s[pos + 2..];
    let denom = match tail {
        "" => 1.0,
        t => t.strip_prefix('/').ok_or_else(err)?.parse::<f64>().map_err(|_| err())?,
    };
    if denom == 0.0 {
        return Err(err());
    }
    Ok(coeff * PI / denom)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    parity: RawParity,
    n_cells: Option<usize>,
    t1: f64,
    t2: f64,
    gamma1: f64,
    gamma2: f64,
    kappa: f64,
    #[serde(default = "one")]
    m: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawParity {
    Odd,
    Even,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrive {
    #[serde(default = "unit")]
    beta: f64,
    theta: Angle,
    #[serde(default = "zero_angle")]
    phi_meas: Angle,
    tau: f64,
    #[serde(default)]
    n_th: f64,
}

fn unit() -> f64 {
    1.0
}

fn zero_angle() -> Angle {
    Angle::Radians(0.0)
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawKind {
    Onsite,
    Nhse,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPert {
    kind: RawKind,
    phi: Option<Angle>,
    epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    Linear,
    AllOrders,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Numeric,
    Analytic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResponse {
    #[serde(default = "all_orders")]
    order: Order,
    #[serde(default = "numeric")]
    source: Source,
}

fn all_orders() -> Order {
    Order::AllOrders
}

fn numeric() -> Source {
    Source::Numeric
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawAlpha {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScaling {
    n_min: usize,
    n_max: usize,
    #[serde(default = "all_orders")]
    order: Order,
    alpha: Option<RawAlpha>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawParam {
    T1,
    T2,
    Gamma1,
    Gamma2,
    Kappa,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    param: RawParam,
    min: f64,
    max: f64,
    steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhase {
    x: RawAxis,
    y: RawAxis,
    #[serde(default = "default_cap")]
    nhse_cap: usize,
}

fn default_cap() -> usize {
    12
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<PathBuf>,
    format: Option<Format>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    chain: RawChain,
    drive: RawDrive,
    perturbation: RawPert,
    response: Option<RawResponse>,
    scaling: Option<RawScaling>,
    phase_diagram: Option<RawPhase>,
    output: Option<RawOutput>,
}

/// Validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub chain: ChainSpec,
    pub drive: DriveSpec,
    pub pert: PerturbationSpec,
    pub response: (Order, Source),
    pub scaling: Option<ScalingSettings>,
    pub grid: Option<ScanGrid>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone)]
pub struct ScalingSettings {
    pub n_min: usize,
    pub n_max: usize,
    pub mode: ScanMode,
    pub placement: DrivePlacement,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub alpha: Option<String>,
}

/// Configuration used by `verify` when no file is given.
pub const DEFAULT_CONFIG: &str = r#"
[chain]
parity = "odd"
n_cells = 6
t1 = 0.5
t2 = 0.3
gamma1 = 0.7
gamma2 = 0.4
kappa = 0.05
m = 1

[drive]
theta = "pi/4"
tau = 100

[perturbation]
kind = "nhse"
phi = "pi/2"
epsilon = 1e-6
"#;

pub fn load(path: Option<&Path>, command: Command, over: &Overrides) -> Result<RunConfig, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| bad(format!("cannot read {}: {e}", p.display())))?,
        None if command == Command::Verify => DEFAULT_CONFIG.to_string(),
        None => return Err(bad("--config is required for this command")),
    };
    parse(&text, command, over)
}

pub fn parse(text: &str, command: Command, over: &Overrides) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
    let needs_size = matches!(command, Command::Response | Command::Stability | Command::Verify);
    let n_cells = match (raw.chain.n_cells, needs_size) {
        (Some(n), _) => n,
        (None, true) => return Err(bad("chain.n_cells is required for this command")),
        (None, false) => 1,
    };
    let chain = ChainSpec {
        n_cells,
        parity: match raw.chain.parity {
            RawParity::Odd => Parity::Odd,
            RawParity::Even => Parity::Even,
        },
        t1: raw.chain.t1,
        t2: raw.chain.t2,
        gamma1: raw.chain.gamma1,
        gamma2: raw.chain.gamma2,
        kappa: raw.chain.kappa,
        m: raw.chain.m,
    };
    // sizes come from the scan for scaling and phase diagrams
    let checked = if needs_size { chain.clone() } else { chain.resized(chain.m.max(1), chain.m) };
    checked.validate().map_err(|e| bad(e.to_string()))?;
    let drive = DriveSpec {
        beta_abs: raw.drive.beta,
        theta: raw.drive.theta.radians()?,
        phi_meas: raw.drive.phi_meas.radians()?,
        tau: raw.drive.tau,
        n_th: raw.drive.n_th,
    };
    drive.validate().map_err(|e| bad(e.to_string()))?;
    let kind = match (raw.perturbation.kind, &raw.perturbation.phi) {
        (RawKind::Onsite, None) => PerturbationKind::OnSite,
        (RawKind::Onsite, Some(_)) => return Err(bad("perturbation.phi applies to kind = \"nhse\" only")),
        (RawKind::Nhse, Some(phi)) => PerturbationKind::Nhse { phi: phi.radians()? },
        (RawKind::Nhse, None) => return Err(bad("perturbation.phi is required for kind = \"nhse\"")),
    };
    if !raw.perturbation.epsilon.is_finite() {
        return Err(bad("perturbation.epsilon must be finite"));
    }
    let pert = PerturbationSpec { kind, epsilon: raw.perturbation.epsilon };

    let scaling = match (command, raw.scaling) {
        (Command::Scaling, Some(s)) => Some(scaling_settings(&s, &chain, over.alpha.as_deref())?),
        (Command::Scaling, None) => return Err(bad("[scaling] table is required for the scaling command")),
        (_, Some(_)) => return Err(bad("[scaling] table is only valid for the scaling command")),
        _ => None,
    };
    let grid = match (command, raw.phase_diagram) {
        (Command::PhaseDiagram, Some(p)) => Some(ScanGrid {
            x: axis(&p.x)?,
            y: axis(&p.y)?,
            chain: ChainSpec { n_cells: 1, ..chain.clone() },
            drive,
            epsilon: pert.epsilon,
            nhse_phi: match kind {
                PerturbationKind::Nhse { phi } => phi,
                PerturbationKind::OnSite => PI / 2.0,
            },
            nhse_cap: p.nhse_cap,
        }),
        (Command::PhaseDiagram, None) => {
            return Err(bad("[phase_diagram] table is required for the phase-diagram command"))
        }
        (_, Some(_)) => return Err(bad("[phase_diagram] table is only valid for the phase-diagram command")),
        _ => None,
    };
    if over.alpha.is_some() && command != Command::Scaling {
        return Err(bad("--alpha applies to the scaling command only"));
    }
    let response = raw.response.map(|r| (r.order, r.source)).unwrap_or((Order::AllOrders, Source::Numeric));
    let file_out = raw.output.clone().unwrap_or(RawOutput { path: None, format: None });
    let default_format = match command {
        Command::Scaling | Command::PhaseDiagram => Format::Csv,
        _ => Format::Json,
    };
    let format = over.format.or(file_out.format).unwrap_or(default_format);
    if format == Format::Csv && matches!(command, Command::Stability | Command::Verify) {
        return Err(bad("stability and verify output is JSON only"));
    }
    Ok(RunConfig {
        command,
        chain,
        drive,
        pert,
        response,
        scaling,
        grid,
        output: over.out.clone().or(file_out.path),
        format,
    })
}

fn scaling_settings(
    s: &RawScaling,
    chain: &ChainSpec,
    alpha_cli: Option<&str>,
) -> Result<ScalingSettings, ConfigError> {
    if s.n_min == 0 || s.n_max < s.n_min {
        return Err(bad(format!("bad size range {}..={}", s.n_min, s.n_max)));
    }
    let alpha = match alpha_cli {
        Some("optimal") => Some(RawAlpha::Keyword("optimal".into())),
        Some(v) => Some(RawAlpha::Value(v.parse().map_err(|_| bad(format!("cannot parse --alpha {v:?}")))?)),
        None => s.alpha.clone(),
    };
    let placement = match alpha {
        None => DrivePlacement::Fixed,
        Some(RawAlpha::Value(a)) if a > 0.0 && a <= 1.0 => DrivePlacement::Alpha(a),
        Some(RawAlpha::Value(a)) => return Err(bad(format!("alpha must lie in (0, 1], got {a}"))),
        Some(RawAlpha::Keyword(k)) if k == "optimal" => {
            DrivePlacement::Alpha(optimal_alpha(chain).map_err(|e| bad(e.to_string()))?.alpha_star)
        }
        Some(RawAlpha::Keyword(k)) => return Err(bad(format!("alpha must be a number or \"optimal\", got {k:?}"))),
    };
    Ok(ScalingSettings {
        n_min: s.n_min,
        n_max: s.n_max,
        mode: match s.order {
            Order::Linear => ScanMode::Linear,
            Order::AllOrders => ScanMode::AllOrders,
        },
        placement,
    })
}

fn axis(a: &RawAxis) -> Result<Axis, ConfigError> {
    if a.steps < 2 || a.max.is_nan() || a.min.is_nan() || a.max <= a.min {
        return Err(bad(format!("axis needs steps ≥ 2 and max > min, got {a:?}")));
    }
    Ok(Axis {
        param: match a.param {
            RawParam::T1 => Param::T1,
            RawParam::T2 => Param::T2,
            RawParam::Gamma1 => Param::Gamma1,
            RawParam::Gamma2 => Param::Gamma2,
            RawParam::Kappa => Param::Kappa,
        },
        min: a.min,
        max: a.max,
        steps: a.steps,
    })
}
