//! Reduced-attitude control laws in the spinning body frame.
//!
//! All laws act on the planar body rates `ω` and the desired axis seen from
//! the body, `b = R₂ᵀ Γ_d`. The proportional reference is
//! `ω_d = k_P E₂ (e3 × b)`, which points along the geodesic from `Γ` to
//! `Γ_d`.
//!
//! * [`control_conventional`] adds `ω_d` to rate damping.
//! * [`control_sp`] keeps the gyroscopic coupling in the closed loop, so the
//!   rate error obeys `ω̇_e = A ω_e` with `A = A_skw - A_sym`.
//! * [`control_sp_motor`] adds lead compensation for a first-order actuator.
//! * [`control_sp_observer`] replaces the unmeasured realized torque by an
//!   observer estimate.

use nalgebra::{DMatrix, Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{gyro_matrix, motor_advance, BodyParams, CtlState, GyroCoeffs};
use crate::geom::{e3, hat, lift_xy, project_xy, Rotation, UnitVec3, Vec2, Vec3};

/// Default proportional gain, 1/s.
pub const DEFAULT_K_P: f64 = 20.0;
/// Default derivative gain, 1/s.
pub const DEFAULT_K_D: f64 = 16.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub k_p: f64,
    pub k_d: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            k_p: DEFAULT_K_P,
            k_d: DEFAULT_K_D,
        }
    }
}

impl Gains {
    pub fn new(k_p: f64, k_d: f64) -> Self {
        Self { k_p, k_d }
    }
}

/// Closed-loop matrices shared by the structure-preserving laws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CtlMatrices {
    pub a_skw: Matrix2<f64>,
    pub a_sym: Matrix2<f64>,
    /// `A_skw - A_sym`, eigenvalues `-k_D ± i k`.
    pub a: Matrix2<f64>,
    /// `diag(-1/τ_m, -1/τ_m)`.
    pub a_m: Matrix2<f64>,
}

impl CtlMatrices {
    pub fn new(gains: &Gains, coeffs: &GyroCoeffs, tau_m: f64) -> Self {
        let a_skw = gyro_matrix(coeffs.k);
        let a_sym = Matrix2::identity() * gains.k_d;
        Self {
            a_skw,
            a_sym,
            a: a_skw - a_sym,
            a_m: Matrix2::identity() * (-1.0 / tau_m),
        }
    }

    pub fn for_body(gains: &Gains, body: &BodyParams) -> Self {
        Self::new(gains, &body.coeffs(), body.tau_m)
    }

    /// `A_m⁻¹ x`; `A_m` is a negative multiple of the identity.
    pub fn a_m_inv_mul(&self, x: &Vec2) -> Vec2 {
        x / self.a_m[(0, 0)]
    }
}

/// Desired reduced attitude. Only `R_d e3` enters the control laws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefAttitude {
    pub rotation: Rotation,
    pub gamma_d: UnitVec3,
}

impl RefAttitude {
    pub fn new(rotation: Rotation) -> Self {
        Self {
            gamma_d: rotation.third_axis(),
            rotation,
        }
    }

    pub fn from_gamma(gamma_d: &UnitVec3) -> Self {
        Self::new(Rotation::aligning_e3(gamma_d))
    }

    /// `R₂ᵀ R_d e3`, the desired axis in body coordinates.
    pub fn axis_in_body(&self, attitude: &Rotation) -> Vec3 {
        attitude.matrix().transpose() * (self.rotation.matrix() * e3())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    Conventional,
    #[default]
    Sp,
    SpMotor,
    SpMotorObserver,
}

impl Law {
    pub const ALL: [Law; 4] = [Law::Conventional, Law::Sp, Law::SpMotor, Law::SpMotorObserver];

    pub fn name(&self) -> &'static str {
        match self {
            Law::Conventional => "conventional",
            Law::Sp => "sp",
            Law::SpMotor => "sp_motor",
            Law::SpMotorObserver => "sp_motor_observer",
        }
    }

    /// Whether the law issues an actuator command `v` rather than a torque.
    pub fn compensates_motor(&self) -> bool {
        matches!(self, Law::SpMotor | Law::SpMotorObserver)
    }
}

impl std::fmt::Display for Law {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Law {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Law::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| format!("unknown law `{s}` (expected conventional, sp, sp_motor or sp_motor_observer)"))
    }
}

/// Which angular velocity squares the desired axis in the second derivative
/// of `ω_d`. `Full` uses the complete body rate including the spin and is
/// the exact derivative; `PlanarLift` uses only `[ω, 0]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSquareReading {
    #[default]
    Full,
    PlanarLift,
}

/// `k_P E₂ (e3 × R₂ᵀ Γ_d)`.
pub fn omega_d(attitude: &Rotation, reference: &RefAttitude, k_p: f64) -> Vec2 {
    let b = reference.axis_in_body(attitude);
    project_xy(&e3().cross(&b)) * k_p
}

/// Time derivative of [`omega_d`] along `Ṙ₂ = R₂ hat(ω₂)`:
/// `k_P E₂ hat(e3) hat(b) ω₂`.
pub fn omega_d_dot(attitude: &Rotation, omega2: &Vec3, reference: &RefAttitude, k_p: f64) -> Vec2 {
    let b = reference.axis_in_body(attitude);
    project_xy(&(hat(&e3()) * hat(&b) * omega2)) * k_p
}

/// Second derivative of [`omega_d`]:
/// `k_P E₂ hat(e3) (hat(w)² b + hat(b) ω̇₂)`, with `w` chosen by `reading`.
pub fn omega_d_ddot(
    attitude: &Rotation,
    omega2: &Vec3,
    omega2_dot: &Vec3,
    reference: &RefAttitude,
    k_p: f64,
    reading: RateSquareReading,
) -> Vec2 {
    let b = reference.axis_in_body(attitude);
    let w = match reading {
        RateSquareReading::Full => *omega2,
        RateSquareReading::PlanarLift => Vec3::new(omega2.x, omega2.y, 0.0),
    };
    let wh = hat(&w);
    let inner = wh * wh * b + hat(&b) * omega2_dot;
    project_xy(&(hat(&e3()) * inner)) * k_p
}

/// `u = -A_sym ω + ω_d`.
pub fn control_conventional(omega: &Vec2, omega_d: &Vec2, gains: &Gains) -> Vec2 {
    -omega * gains.k_d + omega_d
}

/// `u = -A_sym ω - A ω_d + ω̇_d`.
pub fn control_sp(omega: &Vec2, omega_d: &Vec2, omega_d_dot: &Vec2, m: &CtlMatrices) -> Vec2 {
    -(m.a_sym * omega) - m.a * omega_d + omega_d_dot
}

/// Time derivative of the structure-preserving torque:
/// `-A_sym ω̇ - A ω̇_d + ω̈_d`.
pub fn sp_torque_rate(omega_dot: &Vec2, omega_d_dot: &Vec2, omega_d_ddot: &Vec2, m: &CtlMatrices) -> Vec2 {
    -(m.a_sym * omega_dot) - m.a * omega_d_dot + omega_d_ddot
}

/// Output of the actuator-compensating laws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotorCommand {
    /// Actuator command `v = u_d - A_m⁻¹ u̇_d`.
    pub v: Vec2,
    /// Desired torque `u_d`.
    pub u_d: Vec2,
    /// `u̇_d` as used in the lead term.
    pub u_d_dot: Vec2,
}

fn motor_command(
    attitude: &Rotation,
    omega2: &Vec3,
    omega_dot: &Vec2,
    reference: &RefAttitude,
    gains: &Gains,
    m: &CtlMatrices,
    reading: RateSquareReading,
) -> MotorCommand {
    let omega = project_xy(omega2);
    let wd = omega_d(attitude, reference, gains.k_p);
    let wd_dot = omega_d_dot(attitude, omega2, reference, gains.k_p);
    let wd_ddot = omega_d_ddot(attitude, omega2, &lift_xy(omega_dot), reference, gains.k_p, reading);
    let u_d = control_sp(&omega, &wd, &wd_dot, m);
    let u_d_dot = sp_torque_rate(omega_dot, &wd_dot, &wd_ddot, m);
    MotorCommand {
        v: u_d - m.a_m_inv_mul(&u_d_dot),
        u_d,
        u_d_dot,
    }
}

/// Structure-preserving law with actuator lead compensation. `omega_dot`
/// is the planar angular acceleration, taken exactly from the plant.
pub fn control_sp_motor(
    attitude: &Rotation,
    omega2: &Vec3,
    omega_dot: &Vec2,
    reference: &RefAttitude,
    gains: &Gains,
    m: &CtlMatrices,
) -> MotorCommand {
    motor_command(attitude, omega2, omega_dot, reference, gains, m, RateSquareReading::Full)
}

/// Structure-preserving law with lead compensation driven by the observer
/// estimate: `ω̇ ≈ A_skw ω + û`.
pub fn control_sp_observer(
    ctl: &CtlState,
    attitude: &Rotation,
    omega2: &Vec3,
    reference: &RefAttitude,
    gains: &Gains,
    m: &CtlMatrices,
    reading: RateSquareReading,
) -> MotorCommand {
    let omega_dot_est = m.a_skw * ctl.omega + ctl.u_hat;
    motor_command(attitude, omega2, &omega_dot_est, reference, gains, m, reading)
}

/// One step of `û̇ = A_m (û - v)` over `h` with `v` held, solved exactly.
pub fn observer_update(u_hat: &Vec2, v_cmd: &Vec2, tau_m: f64, h: f64) -> Vec2 {
    motor_advance(u_hat, v_cmd, tau_m, h)
}

/// Observer of the realized actuator torque.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorqueObserver {
    estimate: Vec2,
    tau_m: f64,
}

impl TorqueObserver {
    pub fn new(initial: Vec2, tau_m: f64) -> Self {
        Self {
            estimate: initial,
            tau_m,
        }
    }

    pub fn estimate(&self) -> Vec2 {
        self.estimate
    }

    pub fn update(&mut self, v_cmd: &Vec2, h: f64) -> Vec2 {
        self.estimate = observer_update(&self.estimate, v_cmd, self.tau_m, h);
        self.estimate
    }
}

/// Result of checking a gain set against a law's stability condition.
#[derive(Clone, Debug, PartialEq)]
pub struct GainReport {
    pub law: Law,
    pub passed: bool,
    /// Human-readable form of the condition.
    pub condition: String,
    /// `k_D` minus its lower bound.
    pub margin: f64,
    /// Leading principal minors of `-Q`, where `V̇ ≤ Xᵀ Q X`.
    pub det_chain: Vec<f64>,
}

/// The negative of the quadratic-form matrix bounding `V̇`.
pub fn neg_q_matrix(law: Law, gains: &Gains, tau_m: f64) -> DMatrix<f64> {
    match law {
        Law::Conventional => DMatrix::from_element(1, 1, gains.k_d),
        Law::Sp => DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, gains.k_d]),
        Law::SpMotor | Law::SpMotorObserver => {
            let m = Matrix3::new(1.0, -0.5, 0.0, -0.5, gains.k_d, -0.5, 0.0, -0.5, 1.0 / tau_m);
            DMatrix::from_iterator(3, 3, m.iter().copied())
        }
    }
}

fn leading_minors(m: &DMatrix<f64>) -> Vec<f64> {
    (1..=m.nrows())
        .map(|n| m.view((0, 0), (n, n)).into_owned().determinant())
        .collect()
}

/// Evaluates the law's gain condition.
pub fn gain_check(law: Law, gains: &Gains, tau_m: f64) -> GainReport {
    let (bound, condition) = match law {
        Law::Conventional => (0.0, "k_P > 0, k_D > 0".to_string()),
        Law::Sp => (0.25, "k_P > 0, k_D > 1/4".to_string()),
        Law::SpMotor | Law::SpMotorObserver => {
            let b = (1.0 + tau_m) / 4.0;
            (b, format!("k_P > 0, k_D > (1 + tau_m)/4 = {b}"))
        }
    };
    let passed = gains.k_p > 0.0 && gains.k_d > bound && gains.k_p.is_finite() && gains.k_d.is_finite();
    GainReport {
        law,
        passed,
        condition,
        margin: gains.k_d - bound,
        det_chain: leading_minors(&neg_q_matrix(law, gains, tau_m)),
    }
}
