//! Stability analysis, gyroscopic phase portraits and trajectory metrics.

use nalgebra::{Complex, DMatrix, Matrix2, Matrix2x3};
use serde::Serialize;

use crate::controllers::{
    control_conventional, control_sp, omega_d, omega_d_ddot, omega_d_dot, sp_torque_rate, CtlMatrices, Gains, Law,
    RateSquareReading, RefAttitude,
};
use crate::dynamics::{gyro_matrix, BodyParams};
use crate::error::AnalysisError;
use crate::geom::{e1, e3, exp_so3, geodesic_angle, hat, lift_xy, Rotation, UnitVec3, Vec2, Vec3};

/// Default settle threshold, degrees of geodesic error.
pub const DEFAULT_SETTLE_DEG: f64 = 1.0;
/// A spectrum is Hurwitz when its largest real part is below `-HURWITZ_MARGIN`.
pub const HURWITZ_MARGIN: f64 = 1e-9;

/// `Ψ = 1 - Γ_dᵀ Γ`.
pub fn error_psi(gamma: &UnitVec3, gamma_d: &UnitVec3) -> f64 {
    1.0 - gamma_d.dot(gamma)
}

/// Error coordinates entering the Lyapunov candidates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LoopCoords {
    pub psi: f64,
    pub omega: Vec2,
    pub omega_d: Vec2,
    /// `u - u_d`; ignored by laws without actuator states.
    pub u_e: Vec2,
}

/// Time derivatives of [`LoopCoords`] along the plant.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LoopRates {
    pub psi: f64,
    pub omega: Vec2,
    pub omega_d: Vec2,
    pub u_e: Vec2,
}

/// The law's Lyapunov candidate.
pub fn lyapunov_value(law: Law, x: &LoopCoords, gains: &Gains) -> f64 {
    let w_e = x.omega - x.omega_d;
    match law {
        Law::Conventional => gains.k_p * x.psi + 0.5 * x.omega.norm_squared(),
        Law::Sp => gains.k_p * x.psi + 0.5 * w_e.norm_squared(),
        Law::SpMotor | Law::SpMotorObserver => {
            gains.k_p * x.psi + 0.5 * w_e.norm_squared() + 0.5 * x.u_e.norm_squared()
        }
    }
}

/// Chain-rule derivative of [`lyapunov_value`] from measured rates.
pub fn lyapunov_rate(law: Law, x: &LoopCoords, r: &LoopRates, gains: &Gains) -> f64 {
    let w_e = x.omega - x.omega_d;
    let w_e_dot = r.omega - r.omega_d;
    match law {
        Law::Conventional => gains.k_p * r.psi + x.omega.dot(&r.omega),
        Law::Sp => gains.k_p * r.psi + w_e.dot(&w_e_dot),
        Law::SpMotor | Law::SpMotorObserver => gains.k_p * r.psi + w_e.dot(&w_e_dot) + x.u_e.dot(&r.u_e),
    }
}

/// Which linearization a law produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LinKind {
    /// Structure-preserving law, coordinates `(η, ζ)`.
    S1,
    /// Conventional law, coordinates `(η, ζ)`.
    S2,
    /// Motor-compensated law, coordinates `(η, ζ_e, w_e)`.
    S3,
}

impl LinKind {
    pub fn for_law(law: Law) -> Self {
        match law {
            Law::Sp => LinKind::S1,
            Law::Conventional => LinKind::S2,
            Law::SpMotor | Law::SpMotorObserver => LinKind::S3,
        }
    }

    pub fn labels(&self) -> &'static [&'static str] {
        match self {
            LinKind::S1 | LinKind::S2 => &["eta_x", "eta_y", "zeta_x", "zeta_y"],
            LinKind::S3 => &["eta_x", "eta_y", "zeta_e_x", "zeta_e_y", "w_e_x", "w_e_y"],
        }
    }
}

/// A linearized closed loop with its coordinate labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LinMatrix {
    pub kind: LinKind,
    pub matrix: DMatrix<f64>,
    pub labels: &'static [&'static str],
}

/// The two closed-loop equilibria.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Equilibrium {
    Desired,
    Antipodal,
}

impl Equilibrium {
    /// The attitude used as chart origin. The antipode is reached by a half
    /// turn about the body `e1` axis.
    pub fn rotation(&self, reference: &RefAttitude) -> Rotation {
        match self {
            Equilibrium::Desired => reference.rotation,
            Equilibrium::Antipodal => reference.rotation * exp_so3(&(std::f64::consts::PI * e1())),
        }
    }

    /// Classifies `gamma` as `Γ_d` or `-Γ_d`.
    pub fn classify(gamma: &UnitVec3, reference: &RefAttitude) -> Result<Self, AnalysisError> {
        let c = gamma.dot(&reference.gamma_d);
        if (c - 1.0).abs() < 1e-9 {
            Ok(Equilibrium::Desired)
        } else if (c + 1.0).abs() < 1e-9 {
            Ok(Equilibrium::Antipodal)
        } else {
            Err(AnalysisError::InvalidEquilibrium)
        }
    }
}

fn e2_proj() -> Matrix2x3<f64> {
    Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
}

/// `P(Γ_eq) = k_P E₂ hat(e3) hat(R_eqᵀ R_d e3) E₂ᵀ`.
pub fn p_matrix(r_eq: &Rotation, reference: &RefAttitude, k_p: f64) -> Matrix2<f64> {
    let b = reference.axis_in_body(r_eq);
    let e2 = e2_proj();
    e2 * hat(&e3()) * hat(&b) * e2.transpose() * k_p
}

fn place(dst: &mut DMatrix<f64>, row: usize, col: usize, block: &Matrix2<f64>) {
    dst.view_mut((row, col), (2, 2)).copy_from(block);
}

/// Assembles the linearized closed loop of `law` about `gamma_eq`.
pub fn linearize(
    law: Law,
    gamma_eq: &UnitVec3,
    reference: &RefAttitude,
    gains: &Gains,
    body: &BodyParams,
) -> Result<LinMatrix, AnalysisError> {
    let eq = Equilibrium::classify(gamma_eq, reference)?;
    Ok(linearize_at(law, eq, reference, gains, body))
}

pub fn linearize_at(law: Law, eq: Equilibrium, reference: &RefAttitude, gains: &Gains, body: &BodyParams) -> LinMatrix {
    let m = CtlMatrices::for_body(gains, body);
    let p = p_matrix(&eq.rotation(reference), reference, gains.k_p);
    let id = Matrix2::identity();
    let kind = LinKind::for_law(law);
    let matrix = match kind {
        LinKind::S1 => {
            let mut s = DMatrix::zeros(4, 4);
            place(&mut s, 0, 2, &id);
            place(&mut s, 2, 0, &(-m.a * p));
            place(&mut s, 2, 2, &(m.a + p));
            s
        }
        LinKind::S2 => {
            let mut s = DMatrix::zeros(4, 4);
            place(&mut s, 0, 2, &id);
            place(&mut s, 2, 0, &p);
            place(&mut s, 2, 2, &m.a);
            s
        }
        LinKind::S3 => {
            let mut s = DMatrix::zeros(6, 6);
            place(&mut s, 0, 0, &p);
            place(&mut s, 0, 2, &id);
            place(&mut s, 2, 2, &m.a);
            place(&mut s, 2, 4, &id);
            place(&mut s, 4, 4, &m.a_m);
            s
        }
    };
    LinMatrix {
        kind,
        matrix,
        labels: kind.labels(),
    }
}

// dexp⁻¹(η) ω to second order; only the identity term survives linearization.
fn chart_rate(eta: &Vec3, omega: &Vec3) -> Vec3 {
    let c = eta.cross(omega);
    omega - c * 0.5 + eta.cross(&c) / 12.0
}

/// Closed-loop vector field of the planar reduced model in chart
/// coordinates about `r_eq`. The attitude obeys `Ṙ = R hat([ω, 0])` and the
/// rates `ω̇ = A_skw ω + u`; the spin enters only through `A_skw`.
pub fn reduced_vector_field(
    law: Law,
    r_eq: &Rotation,
    reference: &RefAttitude,
    gains: &Gains,
    body: &BodyParams,
    y: &[f64],
) -> Vec<f64> {
    let m = CtlMatrices::for_body(gains, body);
    let eta = Vec3::new(y[0], y[1], 0.0);
    let r = *r_eq * exp_so3(&eta);
    let wd = omega_d(&r, reference, gains.k_p);

    match LinKind::for_law(law) {
        LinKind::S1 | LinKind::S2 => {
            let w = Vec2::new(y[2], y[3]);
            let w3 = lift_xy(&w);
            let u = if law == Law::Conventional {
                control_conventional(&w, &wd, gains)
            } else {
                control_sp(&w, &wd, &omega_d_dot(&r, &w3, reference, gains.k_p), &m)
            };
            let eta_dot = chart_rate(&eta, &w3);
            let w_dot = m.a_skw * w + u;
            vec![eta_dot.x, eta_dot.y, w_dot.x, w_dot.y]
        }
        LinKind::S3 => {
            let w_e = Vec2::new(y[2], y[3]);
            let u_e = Vec2::new(y[4], y[5]);
            let w = w_e + wd;
            let w3 = lift_xy(&w);
            let wd_dot = omega_d_dot(&r, &w3, reference, gains.k_p);
            let u_d = control_sp(&w, &wd, &wd_dot, &m);
            let u = u_e + u_d;
            let w_dot = m.a_skw * w + u;
            let wd_ddot = omega_d_ddot(&r, &w3, &lift_xy(&w_dot), reference, gains.k_p, RateSquareReading::Full);
            let u_d_dot = sp_torque_rate(&w_dot, &wd_dot, &wd_ddot, &m);
            let v = u_d - m.a_m_inv_mul(&u_d_dot);
            let u_dot = m.a_m * (u - v);
            let eta_dot = chart_rate(&eta, &w3);
            let w_e_dot = w_dot - wd_dot;
            let u_e_dot = u_dot - u_d_dot;
            vec![eta_dot.x, eta_dot.y, w_e_dot.x, w_e_dot.y, u_e_dot.x, u_e_dot.y]
        }
    }
}

/// Central-difference Jacobian of [`reduced_vector_field`] at the
/// equilibrium.
pub fn finite_diff_jacobian(
    law: Law,
    eq: Equilibrium,
    reference: &RefAttitude,
    gains: &Gains,
    body: &BodyParams,
    eps: f64,
) -> Result<DMatrix<f64>, AnalysisError> {
    if !(1e-8..=1e-4).contains(&eps) {
        return Err(AnalysisError::InvalidStep(eps));
    }
    let r_eq = eq.rotation(reference);
    let n = LinKind::for_law(law).labels().len();
    let mut jac = DMatrix::zeros(n, n);
    for col in 0..n {
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        plus[col] = eps;
        minus[col] = -eps;
        let fp = reduced_vector_field(law, &r_eq, reference, gains, body, &plus);
        let fm = reduced_vector_field(law, &r_eq, reference, gains, body, &minus);
        for row in 0..n {
            jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * eps);
        }
    }
    Ok(jac)
}

/// Spectrum and Hurwitz verdict of a square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub is_hurwitz: bool,
    pub eigenvalues: Vec<Complex<f64>>,
    /// Largest real part.
    pub abscissa: f64,
}

pub fn hurwitz(m: &DMatrix<f64>) -> Spectrum {
    let eigenvalues: Vec<Complex<f64>> = m.clone().complex_eigenvalues().iter().copied().collect();
    let abscissa = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    Spectrum {
        is_hurwitz: abscissa < -HURWITZ_MARGIN,
        eigenvalues,
        abscissa,
    }
}

/// Steady state of `ω̄̇ = (Ā_sk - k_D I) ω̄ + ū`.
pub fn steady_state(k_bar: f64, k_d: f64, u_bar: &Vec2) -> Result<Vec2, AnalysisError> {
    let det = k_d * k_d + k_bar * k_bar;
    if det == 0.0 || (k_d == 0.0 && *u_bar != Vec2::zeros()) {
        if *u_bar == Vec2::zeros() {
            return Ok(Vec2::zeros());
        }
        return Err(AnalysisError::SingularSystem);
    }
    // (k_D I - Ā)⁻¹ = [[k_D, -k̄], [k̄, k_D]] / (k_D² + k̄²)
    Ok(Vec2::new(k_d * u_bar.x - k_bar * u_bar.y, k_bar * u_bar.x + k_d * u_bar.y) / det)
}

/// Unsigned angle between the input torque and the steady-state rate.
pub fn lag_angle(u_bar: &Vec2, omega_ss: &Vec2) -> Option<f64> {
    if u_bar.norm() == 0.0 || omega_ss.norm() == 0.0 {
        return None;
    }
    let cross = u_bar.x * omega_ss.y - u_bar.y * omega_ss.x;
    Some(cross.abs().atan2(u_bar.dot(omega_ss)))
}

/// `n × n` grid of initial conditions on `[-half_width, half_width]²`.
pub fn square_grid(n: usize, half_width: f64) -> Vec<Vec2> {
    if n == 1 {
        return vec![Vec2::zeros()];
    }
    let step = 2.0 * half_width / (n - 1) as f64;
    (0..n)
        .flat_map(|i| (0..n).map(move |j| Vec2::new(-half_width + i as f64 * step, -half_width + j as f64 * step)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PortraitTrajectory {
    pub initial: [f64; 2],
    pub samples: Vec<[f64; 2]>,
}

/// Damped gyroscopic rate response in the non-spinning frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhasePortrait {
    pub k_bar: f64,
    pub k_d: f64,
    pub u_bar: [f64; 2],
    pub dt: f64,
    pub steady_state: [f64; 2],
    /// Angle between `ū` and `ω_ss`, rad; absent when `ū = 0`.
    pub lag_angle: Option<f64>,
    pub trajectories: Vec<PortraitTrajectory>,
}

/// Integrates the damped non-spinning-frame rate equation from every point
/// of `ic_grid` with fixed-step RK4.
pub fn phase_portrait(
    k_bar: f64,
    k_d: f64,
    u_bar: &Vec2,
    ic_grid: &[Vec2],
    duration: f64,
    dt: f64,
) -> Result<PhasePortrait, AnalysisError> {
    if k_d < 0.0 {
        return Err(AnalysisError::SingularSystem);
    }
    let ss = steady_state(k_bar, k_d, u_bar)?;
    let sys = gyro_matrix(k_bar) - Matrix2::identity() * k_d;
    let f = |w: &Vec2| sys * w + u_bar;
    let steps = (duration / dt).round() as usize;
    let trajectories = ic_grid
        .iter()
        .map(|ic| {
            let mut w = *ic;
            let mut samples = Vec::with_capacity(steps + 1);
            samples.push([w.x, w.y]);
            for _ in 0..steps {
                let k1 = f(&w);
                let k2 = f(&(w + k1 * (0.5 * dt)));
                let k3 = f(&(w + k2 * (0.5 * dt)));
                let k4 = f(&(w + k3 * dt));
                w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
                samples.push([w.x, w.y]);
            }
            PortraitTrajectory {
                initial: [ic.x, ic.y],
                samples,
            }
        })
        .collect();
    Ok(PhasePortrait {
        k_bar,
        k_d,
        u_bar: [u_bar.x, u_bar.y],
        dt,
        steady_state: [ss.x, ss.y],
        lag_angle: lag_angle(u_bar, &ss),
        trajectories,
    })
}

/// Quality measures of a spin-axis trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajMetrics {
    pub final_error_deg: f64,
    /// First time after which the error stays below the threshold; `None`
    /// when the threshold never holds through the end of the series.
    pub settle_time_s: Option<f64>,
    /// Arc length traced on the sphere, rad.
    pub path_length_rad: f64,
    /// Great-circle distance from `Γ(0)` to `Γ_d`, rad.
    pub geodesic_rad: f64,
    /// `geodesic / (path_length + remaining error)`, 1 for a zero-length path.
    pub efficiency: f64,
}

/// Metrics of a uniformly sampled series with spacing `dt`.
pub fn traj_metrics(
    series: &[UnitVec3],
    dt: f64,
    gamma_d: &UnitVec3,
    settle_threshold_deg: f64,
) -> Result<TrajMetrics, AnalysisError> {
    let (first, last) = match (series.first(), series.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(AnalysisError::EmptySeries),
    };
    let threshold = settle_threshold_deg.to_radians();
    let errors: Vec<f64> = series.iter().map(|g| geodesic_angle(g, gamma_d)).collect();
    let settle_time_s = match errors.iter().rposition(|e| *e >= threshold) {
        None => Some(0.0),
        Some(i) if i + 1 < errors.len() => Some((i + 1) as f64 * dt),
        Some(_) => None,
    };
    let path_length_rad: f64 = series.windows(2).map(|w| geodesic_angle(&w[0], &w[1])).sum();
    let geodesic_rad = geodesic_angle(first, gamma_d);
    let remaining = geodesic_angle(last, gamma_d);
    let travelled = path_length_rad + remaining;
    let efficiency = if travelled < 1e-15 { 1.0 } else { (geodesic_rad / travelled).min(1.0) };
    Ok(TrajMetrics {
        final_error_deg: remaining.to_degrees(),
        settle_time_s,
        path_length_rad,
        geodesic_rad,
        efficiency,
    })
}

/// Rate of `Ψ` along `Γ̇ = R (ω × e3)`.
pub fn psi_rate(attitude: &Rotation, omega2: &Vec3, gamma_d: &UnitVec3) -> f64 {
    let gamma_dot = *attitude * omega2.cross(&e3());
    -gamma_d.as_vec().dot(&gamma_dot)
}
