//! Closed-loop simulation of the spinning body.
//!
//! The full rigid body is integrated at `step`; the control law is sampled
//! every `control_period` and held in between. With actuator dynamics on,
//! the realized torque lags the command through `u̇ = -(u - v)/τ_m`.

mod emit;
mod scenario;

pub use emit::{emit, render, OutputFormat, CSV_HEADER};
use emit::Num;
pub use scenario::{
    disturbance_at, load_scenario, parse_scenario, Disturbance, Scenario, DEFAULT_CONTROL_PERIOD, DEFAULT_DURATION,
};

use crate::analysis::{error_psi, lyapunov_rate, lyapunov_value, psi_rate, traj_metrics, LoopCoords, LoopRates, TrajMetrics};
use crate::controllers::{
    control_conventional, control_sp, control_sp_motor, control_sp_observer, gain_check, omega_d, omega_d_ddot,
    omega_d_dot, observer_update, sp_torque_rate, CtlMatrices, Law, RateSquareReading,
};
use crate::dynamics::{euler_deriv, motor_advance, motor_deriv, CtlState, RigidState};
use crate::error::SimError;
use crate::geom::{lift_xy, project_xy, UnitVec3, Vec2, Vec3};

/// Lyapunov rates above this count as an increase.
pub const VDOT_TOL: f64 = 1e-8;

/// One logged control tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogSample {
    pub t: f64,
    pub gamma: Vec3,
    /// Planar body rates.
    pub omega: Vec2,
    /// Realized specific torque.
    pub u: Vec2,
    pub u_hat: Vec2,
    /// Command issued at this tick: torque for the plain laws, actuator
    /// input for the compensating ones.
    pub v: Vec2,
    pub psi: f64,
    /// The law's Lyapunov candidate.
    pub lyapunov: f64,
    /// Its time derivative from the plant's exact rates.
    pub lyapunov_rate: f64,
    /// `|ω̇_e - A ω_e - u_e|` for the structure-preserving laws, else 0.
    pub rate_error_residual: f64,
    /// `|u̇_e - A_m u_e|` for the compensating laws with actuator dynamics, else 0.
    pub torque_error_residual: f64,
}

/// Samples and terminal metrics of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    pub name: String,
    pub law: Law,
    pub motor_dynamics: bool,
    pub control_period: f64,
    pub gamma_d: UnitVec3,
    pub samples: Vec<LogSample>,
    pub metrics: TrajMetrics,
    pub warnings: Vec<String>,
}

impl TrajectoryLog {
    pub fn gammas(&self) -> Vec<UnitVec3> {
        self.samples.iter().map(|s| unit(&s.gamma)).collect()
    }

    pub fn max_lyapunov_rate(&self) -> f64 {
        self.samples.iter().map(|s| s.lyapunov_rate).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn lyapunov_monotone(&self) -> bool {
        self.max_lyapunov_rate() <= VDOT_TOL
    }

    pub fn final_sample(&self) -> &LogSample {
        self.samples.last().expect("log has at least one sample")
    }
}

fn unit(v: &Vec3) -> UnitVec3 {
    // Columns of a re-orthonormalized rotation are unit to rounding.
    UnitVec3::normalize(*v).expect("attitude column is non-zero")
}

struct TickOutput {
    command: Vec2,
    sample: LogSample,
}

fn control_tick(sc: &Scenario, m: &CtlMatrices, t: f64, rigid: &RigidState, ctl: &mut CtlState) -> TickOutput {
    let k_p = sc.gains.k_p;
    let reference = &sc.reference;
    let r = &rigid.attitude;
    let w2 = rigid.omega;
    let w = project_xy(&w2);
    ctl.omega = w;

    let wd = omega_d(r, reference, k_p);
    let wd_dot = omega_d_dot(r, &w2, reference, k_p);
    let dist = disturbance_at(&sc.disturbances, t);

    // plain laws act on the torque directly; compensating ones on v
    let exact_omega_dot = |u: &Vec2| project_xy(&euler_deriv(rigid, &sc.body.torque_from_specific(&(u + dist)), &sc.body).omega_dot);
    let command = match sc.law {
        Law::Conventional => control_conventional(&w, &wd, &sc.gains),
        Law::Sp => control_sp(&w, &wd, &wd_dot, m),
        Law::SpMotor => control_sp_motor(r, &w2, &exact_omega_dot(&ctl.u), reference, &sc.gains, m).v,
        Law::SpMotorObserver => control_sp_observer(ctl, r, &w2, reference, &sc.gains, m, sc.rate_square).v,
    };
    if !sc.motor_dynamics {
        ctl.u = command;
    }

    let w_dot = exact_omega_dot(&ctl.u);
    let u_d = control_sp(&w, &wd, &wd_dot, m);
    let wd_ddot = omega_d_ddot(r, &w2, &lift_xy(&w_dot), reference, k_p, RateSquareReading::Full);
    let u_d_dot = sp_torque_rate(&w_dot, &wd_dot, &wd_ddot, m);
    let u_dot = if sc.motor_dynamics { motor_deriv(&ctl.u, &command, sc.body.tau_m) } else { Vec2::zeros() };

    let gamma = rigid.gamma();
    let gamma_d = reference.gamma_d;
    let psi = error_psi(&gamma, &gamma_d);
    let u_e = if sc.law.compensates_motor() { ctl.u - u_d } else { Vec2::zeros() };
    let coords = LoopCoords {
        psi,
        omega: w,
        omega_d: wd,
        u_e,
    };
    let rates = LoopRates {
        psi: psi_rate(r, &w2, &gamma_d),
        omega: w_dot,
        omega_d: wd_dot,
        u_e: u_dot - u_d_dot,
    };

    let w_e = w - wd;
    let rate_error_residual = match sc.law {
        Law::Conventional => 0.0,
        _ => (w_dot - wd_dot - m.a * w_e - u_e).norm(),
    };
    let torque_error_residual = if sc.law.compensates_motor() && sc.motor_dynamics {
        (u_dot - u_d_dot - m.a_m * u_e).norm()
    } else {
        0.0
    };

    TickOutput {
        command,
        sample: LogSample {
            t,
            gamma: *gamma.as_vec(),
            omega: w,
            u: ctl.u,
            u_hat: ctl.u_hat,
            v: command,
            psi,
            lyapunov: lyapunov_value(sc.law, &coords, &sc.gains),
            lyapunov_rate: lyapunov_rate(sc.law, &coords, &rates, &sc.gains),
            rate_error_residual,
            torque_error_residual,
        },
    }
}

/// Simulates `sc` and returns its log. Deterministic for a given scenario.
pub fn run(sc: &Scenario) -> Result<TrajectoryLog, SimError> {
    sc.validate()?;
    let mut warnings = sc.warnings.clone();
    let report = gain_check(sc.law, &sc.gains, sc.body.tau_m);
    if !report.passed {
        let msg = format!("gain condition for {} not met ({})", sc.law, report.condition);
        if sc.strict {
            return Err(SimError::Validation(msg));
        }
        if !warnings.iter().any(|w| w.contains("condition")) {
            warnings.push(msg);
        }
    }

    let m = CtlMatrices::for_body(&sc.gains, &sc.body);
    let ticks = sc.control_ticks();
    let substeps = sc.steps_per_period();
    let h = sc.control_period / substeps as f64;

    let mut rigid = RigidState::new(
        sc.initial_attitude,
        Vec3::new(sc.initial_omega.x, sc.initial_omega.y, sc.body.spin_rate),
    );
    let mut ctl = CtlState {
        omega: sc.initial_omega,
        u: sc.initial_u,
        u_hat: sc.initial_u_hat,
    };
    let mut samples = Vec::with_capacity(ticks + 1);

    for tick in 0..=ticks {
        let t = tick as f64 * sc.control_period;
        let out = control_tick(sc, &m, t, &rigid, &mut ctl);
        samples.push(out.sample);
        if tick == ticks {
            break;
        }
        let v = out.command;
        for sub in 0..substeps {
            let ts = t + sub as f64 * h;
            let dist = disturbance_at(&sc.disturbances, ts);
            let u_next = if sc.motor_dynamics { motor_advance(&ctl.u, &v, sc.body.tau_m, h) } else { ctl.u };
            let m0 = sc.body.torque_from_specific(&(ctl.u + dist));
            let m1 = sc.body.torque_from_specific(&(u_next + dist));
            rigid = sc
                .integrator
                .step(&rigid, &m0, &m1, h, &sc.body)
                .map_err(|source| SimError::Numerical { t: ts, source })?;
            ctl.u = u_next;
        }
        ctl.u_hat = observer_update(&ctl.u_hat, &v, sc.body.tau_m, sc.control_period);
        if !rigid.omega.iter().all(|x| x.is_finite()) {
            return Err(SimError::Numerical {
                t: t + sc.control_period,
                source: crate::error::DynamicsError::NoConvergence {
                    iterations: 0,
                    residual: f64::INFINITY,
                },
            });
        }
    }

    let gammas: Vec<UnitVec3> = samples.iter().map(|s| unit(&s.gamma)).collect();
    let metrics = traj_metrics(&gammas, sc.control_period, &sc.reference.gamma_d, sc.settle_threshold_deg)
        .map_err(|_| SimError::EmptyLog)?;
    Ok(TrajectoryLog {
        name: sc.name.clone(),
        law: sc.law,
        motor_dynamics: sc.motor_dynamics,
        control_period: sc.control_period,
        gamma_d: sc.reference.gamma_d,
        samples,
        metrics,
        warnings,
    })
}

/// One row of a comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub name: String,
    pub law: Law,
    pub motor_dynamics: bool,
    pub metrics: TrajMetrics,
    pub max_lyapunov_rate: f64,
    pub lyapunov_monotone: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn row(&self, name: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Machine-readable form, one CSV row per scenario.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "name,law,motor_dynamics,final_error_deg,settle_time_s,path_length_rad,geodesic_rad,efficiency,max_vdot,lyapunov_monotone\n",
        );
        for r in &self.rows {
            let m = &r.metrics;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{:e},{}\n",
                r.name,
                r.law,
                r.motor_dynamics,
                Num(m.final_error_deg),
                m.settle_time_s.map_or("never".to_string(), |t| Num(t).to_string()),
                Num(m.path_length_rad),
                Num(m.geodesic_rad),
                Num(m.efficiency),
                r.max_lyapunov_rate,
                r.lyapunov_monotone
            ));
        }
        out
    }

    /// Aligned text table.
    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(8);
        let mut out = format!(
            "{:<width$}  {:<18} {:>5}  {:>9}  {:>8}  {:>8}  {:>6}  {:>10}  {}\n",
            "scenario", "law", "motor", "final°", "settle s", "path rad", "eff", "max V̇", "V monotone"
        );
        for r in &self.rows {
            let m = &r.metrics;
            out.push_str(&format!(
                "{:<width$}  {:<18} {:>5}  {:>9.3}  {:>8}  {:>8.3}  {:>6.3}  {:>10.2e}  {}\n",
                r.name,
                r.law.name(),
                if r.motor_dynamics { "on" } else { "off" },
                m.final_error_deg,
                m.settle_time_s.map_or("never".to_string(), |t| format!("{t:.3}")),
                m.path_length_rad,
                m.efficiency,
                r.max_lyapunov_rate,
                if r.lyapunov_monotone { "yes" } else { "no" }
            ));
        }
        out
    }
}

/// Runs every scenario (concurrently) and tabulates their metrics. All
/// scenarios must share the initial spin axis and the target.
pub fn compare(scenarios: &[Scenario]) -> Result<ComparisonReport, SimError> {
    if scenarios.len() < 2 {
        return Err(SimError::MismatchedScenarios(format!(
            "need at least two scenarios, got {}",
            scenarios.len()
        )));
    }
    let first = &scenarios[0];
    for sc in &scenarios[1..] {
        let dg0 = (sc.initial_gamma().as_vec() - first.initial_gamma().as_vec()).norm();
        let dgd = (sc.gamma_d().as_vec() - first.gamma_d().as_vec()).norm();
        if dg0 > 1e-12 || dgd > 1e-12 {
            return Err(SimError::MismatchedScenarios(format!(
                "`{}` and `{}` differ in initial or desired spin axis",
                sc.name, first.name
            )));
        }
    }
    let logs: Vec<Result<TrajectoryLog, SimError>> = std::thread::scope(|s| {
        let handles: Vec<_> = scenarios.iter().map(|sc| s.spawn(move || run(sc))).collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let rows = logs
        .into_iter()
        .map(|log| {
            log.map(|log| ComparisonRow {
                max_lyapunov_rate: log.max_lyapunov_rate(),
                lyapunov_monotone: log.lyapunov_monotone(),
                name: log.name,
                law: log.law,
                motor_dynamics: log.motor_dynamics,
                metrics: log.metrics,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ComparisonReport { rows })
}
