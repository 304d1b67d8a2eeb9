//! Scenario documents.
//!
//! A scenario is a TOML document. Every key except `law` is optional;
//! omitted values take the test-vehicle defaults. Angles and rates may be
//! given in degrees at this boundary (`*_deg`, `*_dps` keys) and are stored
//! in radians.
//!
//! ```toml
//! name = "sp_horizontal_to_vertical"
//! law = "sp"                 # conventional | sp | sp_motor | sp_motor_observer
//! motor_dynamics = false
//! strict = false             # reject instead of warn on soft violations
//! integrator = "lgvi"        # lgvi | rkmk_exp
//! rate_square = "full"       # full | planar_lift
//!
//! [body]
//! j_sym = 0.0155             # kg m²
//! j_zz = 0.0276              # kg m²
//! spin_rate = 26.18          # rad/s, or spin_rate_dps = 1500
//! tau_m = 0.0846             # s
//!
//! [gains]
//! k_p = 20.0
//! k_d = 16.0
//!
//! [initial]
//! gamma = [1.0, 0.0, 0.0]    # or rotation = [[..], [..], [..]] (rows)
//! spin_phase_deg = 0.0
//! omega = [0.0, 0.0]         # planar body rates, rad/s
//! u = [0.0, 0.0]             # realized torque
//! u_hat = [0.0, 0.0]         # observer estimate
//!
//! [target]
//! gamma = [0.0, 0.0, 1.0]
//!
//! [time]
//! duration = 5.0
//! step = 0.001
//! control_period = 0.004
//! settle_threshold_deg = 1.0
//!
//! [[disturbance]]            # piecewise-constant specific torque added to u
//! start = 6.0
//! end = 6.5
//! torque = [3.0, 0.0]
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::analysis::DEFAULT_SETTLE_DEG;
use crate::controllers::{gain_check, Gains, Law, RateSquareReading, RefAttitude};
use crate::dynamics::{BodyParams, Integrator, DEFAULT_STEP, MAX_STEP};
use crate::error::SimError;
use crate::geom::{Mat3, Rotation, UnitVec3, Vec2, Vec3};

/// Default control period, s (250 Hz).
pub const DEFAULT_CONTROL_PERIOD: f64 = 4e-3;
/// Default simulated horizon, s.
pub const DEFAULT_DURATION: f64 = 5.0;

const DIVISIBILITY_TOL: f64 = 1e-9;

/// Piecewise-constant specific torque added to the realized torque on
/// `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disturbance {
    pub start: f64,
    pub end: f64,
    pub torque: Vec2,
}

/// Disturbance torque active at `t`.
pub fn disturbance_at(profile: &[Disturbance], t: f64) -> Vec2 {
    profile
        .iter()
        .filter(|d| t >= d.start && t < d.end)
        .fold(Vec2::zeros(), |acc, d| acc + d.torque)
}

/// A validated closed-loop simulation setup.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub law: Law,
    pub body: BodyParams,
    pub gains: Gains,
    pub motor_dynamics: bool,
    pub integrator: Integrator,
    pub rate_square: RateSquareReading,
    pub strict: bool,
    pub initial_attitude: Rotation,
    /// Planar body rates at `t = 0`, rad/s.
    pub initial_omega: Vec2,
    pub initial_u: Vec2,
    pub initial_u_hat: Vec2,
    pub reference: RefAttitude,
    pub duration: f64,
    pub step: f64,
    pub control_period: f64,
    pub settle_threshold_deg: f64,
    pub disturbances: Vec<Disturbance>,
    /// Non-fatal findings from loading, e.g. a normalized target.
    pub warnings: Vec<String>,
}

impl Scenario {
    /// The horizontal-to-vertical reorientation with test-vehicle defaults.
    pub fn new(law: Law) -> Self {
        Self {
            name: law.name().to_string(),
            law,
            body: BodyParams::default(),
            gains: Gains::default(),
            motor_dynamics: false,
            integrator: Integrator::default(),
            rate_square: RateSquareReading::default(),
            strict: false,
            initial_attitude: Rotation::aligning_e3(&UnitVec3::e1()),
            initial_omega: Vec2::zeros(),
            initial_u: Vec2::zeros(),
            initial_u_hat: Vec2::zeros(),
            reference: RefAttitude::from_gamma(&UnitVec3::e3()),
            duration: DEFAULT_DURATION,
            step: DEFAULT_STEP,
            control_period: DEFAULT_CONTROL_PERIOD,
            settle_threshold_deg: DEFAULT_SETTLE_DEG,
            disturbances: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn with_motor(mut self, on: bool) -> Self {
        self.motor_dynamics = on;
        self
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn with_gains(mut self, gains: Gains) -> Self {
        self.gains = gains;
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn initial_gamma(&self) -> UnitVec3 {
        self.initial_attitude.third_axis()
    }

    pub fn gamma_d(&self) -> UnitVec3 {
        self.reference.gamma_d
    }

    /// Control ticks per run; the log holds one more sample.
    pub fn control_ticks(&self) -> usize {
        (self.duration / self.control_period).round() as usize
    }

    /// Integration steps per control period.
    pub fn steps_per_period(&self) -> usize {
        (self.control_period / self.step).round() as usize
    }

    /// Checks the invariants of a scenario built in code.
    pub fn validate(&self) -> Result<(), SimError> {
        self.body.validate().map_err(|e| SimError::Validation(e.to_string()))?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(SimError::Validation(format!("duration must be > 0, got {}", self.duration)));
        }
        if !(self.step > 0.0 && self.step <= MAX_STEP) {
            return Err(SimError::Validation(format!("step must lie in (0, {MAX_STEP}], got {}", self.step)));
        }
        if !(self.control_period >= self.step && self.control_period.is_finite()) {
            return Err(SimError::Validation(format!(
                "control_period ({}) must be at least step ({})",
                self.control_period, self.step
            )));
        }
        if !is_multiple(self.control_period, self.step) {
            return Err(SimError::Validation(format!(
                "step ({}) does not divide control_period ({})",
                self.step, self.control_period
            )));
        }
        if !is_multiple(self.duration, self.control_period) {
            return Err(SimError::Validation(format!(
                "control_period ({}) does not divide duration ({})",
                self.control_period, self.duration
            )));
        }
        if !(self.settle_threshold_deg > 0.0) {
            return Err(SimError::Validation("settle_threshold_deg must be > 0".into()));
        }
        for d in &self.disturbances {
            if !(d.end > d.start) {
                return Err(SimError::Validation(format!(
                    "disturbance end ({}) must follow start ({})",
                    d.end, d.start
                )));
            }
        }
        Ok(())
    }

    /// Applies the gain condition of the selected law: an error when
    /// `strict`, otherwise a warning.
    pub fn enforce_gain_condition(&mut self) -> Result<(), SimError> {
        let report = gain_check(self.law, &self.gains, self.body.tau_m);
        if report.passed {
            return Ok(());
        }
        let msg = format!(
            "gains k_P = {}, k_D = {} violate the {} condition ({})",
            self.gains.k_p, self.gains.k_d, self.law, report.condition
        );
        if self.strict {
            return Err(SimError::Validation(msg));
        }
        if !self.warnings.contains(&msg) {
            self.warnings.push(msg);
        }
        Ok(())
    }
}

fn is_multiple(total: f64, part: f64) -> bool {
    let ratio = total / part;
    (ratio - ratio.round()).abs() <= DIVISIBILITY_TOL * ratio.max(1.0) && ratio.round() >= 1.0
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    law: Law,
    motor_dynamics: Option<bool>,
    strict: Option<bool>,
    integrator: Option<Integrator>,
    rate_square: Option<RateSquareReading>,
    body: Option<RawBody>,
    gains: Option<RawGains>,
    initial: Option<RawInitial>,
    target: Option<RawTarget>,
    time: Option<RawTime>,
    #[serde(default)]
    disturbance: Vec<RawDisturbance>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBody {
    j_sym: Option<f64>,
    j_zz: Option<f64>,
    spin_rate: Option<f64>,
    spin_rate_dps: Option<f64>,
    tau_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGains {
    k_p: Option<f64>,
    k_d: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    gamma: Option<[f64; 3]>,
    rotation: Option<[[f64; 3]; 3]>,
    spin_phase_deg: Option<f64>,
    omega: Option<[f64; 2]>,
    u: Option<[f64; 2]>,
    u_hat: Option<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    gamma: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    duration: Option<f64>,
    step: Option<f64>,
    control_period: Option<f64>,
    settle_threshold_deg: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisturbance {
    start: f64,
    end: f64,
    torque: [f64; 2],
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, column)
}

fn unit_direction(v: [f64; 3], field: &str, strict: bool, warnings: &mut Vec<String>) -> Result<UnitVec3, SimError> {
    let raw = Vec3::from(v);
    if let Ok(u) = UnitVec3::new(raw) {
        return Ok(u);
    }
    if strict {
        return Err(SimError::Validation(format!("{field} must have unit norm, got {}", raw.norm())));
    }
    let u = UnitVec3::normalize(raw).map_err(|e| SimError::Validation(format!("{field}: {e}")))?;
    warnings.push(format!("{field} had norm {}, normalized", raw.norm()));
    Ok(u)
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, SimError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        SimError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;

    let mut sc = Scenario::new(raw.law);
    sc.strict = raw.strict.unwrap_or(false);
    if let Some(name) = raw.name {
        sc.name = name;
    }
    sc.motor_dynamics = raw.motor_dynamics.unwrap_or(false);
    sc.integrator = raw.integrator.unwrap_or_default();
    sc.rate_square = raw.rate_square.unwrap_or_default();

    let body = raw.body.unwrap_or_default();
    if body.spin_rate.is_some() && body.spin_rate_dps.is_some() {
        return Err(SimError::Validation("give body.spin_rate or body.spin_rate_dps, not both".into()));
    }
    sc.body = BodyParams {
        j_sym: body.j_sym.unwrap_or(sc.body.j_sym),
        j_zz: body.j_zz.unwrap_or(sc.body.j_zz),
        spin_rate: body
            .spin_rate
            .or(body.spin_rate_dps.map(f64::to_radians))
            .unwrap_or(sc.body.spin_rate),
        tau_m: body.tau_m.unwrap_or(sc.body.tau_m),
    };

    let gains = raw.gains.unwrap_or_default();
    sc.gains = Gains::new(gains.k_p.unwrap_or(sc.gains.k_p), gains.k_d.unwrap_or(sc.gains.k_d));

    let mut warnings = Vec::new();
    let initial = raw.initial.unwrap_or_default();
    let base = match (initial.gamma, initial.rotation) {
        (Some(_), Some(_)) => {
            return Err(SimError::Validation("give initial.gamma or initial.rotation, not both".into()));
        }
        (_, Some(rows)) => {
            let m = Mat3::from_row_slice(&rows.concat());
            Rotation::new(m).map_err(|e| SimError::Validation(format!("initial.rotation: {e}")))?
        }
        (Some(g), None) => Rotation::aligning_e3(&unit_direction(g, "initial.gamma", sc.strict, &mut warnings)?),
        (None, None) => sc.initial_attitude,
    };
    let phase = initial.spin_phase_deg.unwrap_or(0.0).to_radians();
    sc.initial_attitude = base * Rotation::about_z(phase);
    sc.initial_omega = initial.omega.map(Vec2::from).unwrap_or_default();
    sc.initial_u = initial.u.map(Vec2::from).unwrap_or_default();
    sc.initial_u_hat = initial.u_hat.map(Vec2::from).unwrap_or_default();

    if let Some(g) = raw.target.and_then(|t| t.gamma) {
        sc.reference = RefAttitude::from_gamma(&unit_direction(g, "target.gamma", sc.strict, &mut warnings)?);
    }

    let time = raw.time.unwrap_or_default();
    sc.duration = time.duration.unwrap_or(sc.duration);
    sc.step = time.step.unwrap_or(sc.step);
    sc.control_period = time.control_period.unwrap_or(sc.control_period);
    sc.settle_threshold_deg = time.settle_threshold_deg.unwrap_or(sc.settle_threshold_deg);
    sc.disturbances = raw
        .disturbance
        .into_iter()
        .map(|d| Disturbance {
            start: d.start,
            end: d.end,
            torque: Vec2::from(d.torque),
        })
        .collect();

    sc.warnings = warnings;
    sc.validate()?;
    sc.enforce_gain_condition()?;
    Ok(sc)
}

/// Reads and parses a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, SimError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut sc = parse_scenario(&text)?;
    if sc.name.is_empty() {
        sc.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    }
    Ok(sc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn minimal_document_uses_defaults() {
        let sc = parse_scenario("law = \"sp\"\n").unwrap();
        assert_eq!(sc.law, Law::Sp);
        assert_eq!(sc.body, BodyParams::default());
        assert_eq!(sc.body.j_sym, 1.55e-2);
        assert_eq!(sc.body.j_zz, 2.76e-2);
        assert_eq!(sc.body.tau_m, 0.0846);
        assert_eq!(sc.gains, Gains::default());
        assert_eq!(sc.step, 1e-3);
        assert_eq!(sc.control_period, 4e-3);
        assert_relative_eq!(*sc.initial_gamma().as_vec(), Vec3::x(), epsilon = 1e-15);
        assert_eq!(*sc.gamma_d().as_vec(), Vec3::z());
        assert!(sc.warnings.is_empty());
    }

    #[test]
    fn indivisible_step_is_rejected() {
        let doc = "law = \"sp\"\n[time]\nstep = 0.003\ncontrol_period = 0.004\n";
        match parse_scenario(doc) {
            Err(SimError::Validation(msg)) => assert!(msg.contains("divide")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_unit_target_is_normalized_or_rejected() {
        let doc = "law = \"sp\"\n[target]\ngamma = [0.0, 0.0, 2.0]\n";
        let sc = parse_scenario(doc).unwrap();
        assert_eq!(*sc.gamma_d().as_vec(), Vec3::z());
        assert_eq!(sc.warnings.len(), 1);
        let strict = format!("strict = true\n{doc}");
        assert!(matches!(parse_scenario(&strict), Err(SimError::Validation(_))));
    }

    #[test]
    fn parse_errors_carry_location() {
        let doc = "law = \"sp\"\n[gains]\nk_p = \"five\"\n";
        match parse_scenario(doc) {
            Err(SimError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_scenario("law = \"pid\"\n") {
            Err(SimError::Parse { line, message, .. }) => {
                assert_eq!(line, 1);
                assert!(message.contains("pid"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_scenario("law = \"sp\"\nbogus = 1\n"), Err(SimError::Parse { line: 2, .. })));
    }

    #[test]
    fn degrees_are_converted() {
        let doc = "law = \"sp\"\n[body]\nspin_rate_dps = 1500.0\n[initial]\ngamma = [1.0, 0.0, 0.0]\nspin_phase_deg = 90.0\n";
        let sc = parse_scenario(doc).unwrap();
        assert_relative_eq!(sc.body.spin_rate, 1500f64.to_radians(), epsilon = 1e-12);
        assert_relative_eq!(*sc.initial_gamma().as_vec(), Vec3::x(), epsilon = 1e-12);
        // phase rotates the body x axis about the spin axis
        let x_body = sc.initial_attitude.matrix().column(0).into_owned();
        assert_relative_eq!(x_body, Vec3::y(), epsilon = 1e-12);
    }

    #[test]
    fn failing_gains_warn_or_reject() {
        let doc = "law = \"sp\"\n[gains]\nk_d = 0.2\n";
        let sc = parse_scenario(doc).unwrap();
        assert_eq!(sc.warnings.len(), 1);
        let strict = format!("strict = true\n{doc}");
        assert!(matches!(parse_scenario(&strict), Err(SimError::Validation(_))));
    }

    #[test]
    fn disturbance_profile() {
        let doc = "law = \"sp\"\n[[disturbance]]\nstart = 1.0\nend = 2.0\ntorque = [1.0, 0.5]\n";
        let sc = parse_scenario(doc).unwrap();
        assert_eq!(disturbance_at(&sc.disturbances, 0.5), Vec2::zeros());
        assert_eq!(disturbance_at(&sc.disturbances, 1.5), Vec2::new(1.0, 0.5));
        assert_eq!(disturbance_at(&sc.disturbances, 2.0), Vec2::zeros());
        let bad = "law = \"sp\"\n[[disturbance]]\nstart = 2.0\nend = 1.0\ntorque = [1.0, 0.5]\n";
        assert!(matches!(parse_scenario(bad), Err(SimError::Validation(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(parse_scenario("law = 3").unwrap_err().exit_code(), 2);
        assert_eq!(parse_scenario("law = \"sp\"\n[time]\nduration = -1.0\n").unwrap_err().exit_code(), 2);
    }
}
