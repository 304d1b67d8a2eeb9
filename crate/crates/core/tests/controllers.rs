use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinaxis::analysis::hurwitz;
use spinaxis::controllers::{
    control_conventional, control_sp, control_sp_motor, control_sp_observer, gain_check, omega_d, omega_d_ddot,
    omega_d_dot, CtlMatrices, Gains, Law, RateSquareReading, RefAttitude, TorqueObserver,
};
use spinaxis::dynamics::{motor_advance, BodyParams, CtlState};
use spinaxis::geom::{exp_so3, geodesic_angle, project_xy, Rotation, UnitVec3, Vec2, Vec3};
use spinaxis::sim::{run, Scenario};

fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation {
    exp_so3(&random_vec(rng, 3.0))
}

#[test]
fn omega_d_rate_matches_finite_differences_along_the_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let eps = 1e-6;
    for _ in 0..200 {
        let r = random_rotation(&mut rng);
        let reference = RefAttitude::new(random_rotation(&mut rng));
        let mut w2 = random_vec(&mut rng, 2.0);
        w2.z = 26.18;
        let k_p = rng.gen_range(0.5..30.0);
        let plus = omega_d(&(r * exp_so3(&(w2 * eps))), &reference, k_p);
        let minus = omega_d(&(r * exp_so3(&(w2 * -eps))), &reference, k_p);
        let fd = (plus - minus) / (2.0 * eps);
        let exact = omega_d_dot(&r, &w2, &reference, k_p);
        assert!((fd - exact).norm() <= 1e-6 * (1.0 + exact.norm()), "{fd} vs {exact}");
    }
}

#[test]
fn omega_d_second_rate_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let eps = 1e-5;
    for _ in 0..200 {
        let r = random_rotation(&mut rng);
        let reference = RefAttitude::new(random_rotation(&mut rng));
        let mut w2 = random_vec(&mut rng, 2.0);
        w2.z = 26.18;
        let mut w2_dot = random_vec(&mut rng, 5.0);
        w2_dot.z = 0.0;
        let k_p = rng.gen_range(0.5..30.0);
        // second-order accurate samples of R(t ± ε) and ω₂(t ± ε)
        let r_plus = r * exp_so3(&(w2 * eps + w2_dot * (0.5 * eps * eps)));
        let r_minus = r * exp_so3(&(w2 * -eps + w2_dot * (0.5 * eps * eps)));
        let plus = omega_d_dot(&r_plus, &(w2 + w2_dot * eps), &reference, k_p);
        let minus = omega_d_dot(&r_minus, &(w2 - w2_dot * eps), &reference, k_p);
        let fd = (plus - minus) / (2.0 * eps);
        let exact = omega_d_ddot(&r, &w2, &w2_dot, &reference, k_p, RateSquareReading::Full);
        assert!((fd - exact).norm() <= 1e-5 * (1.0 + exact.norm()), "{fd} vs {exact}");
    }
}

#[test]
fn planar_lift_reading_differs_only_by_spin_terms() {
    let r = exp_so3(&Vec3::new(0.4, 0.1, -0.3));
    let reference = RefAttitude::new(Rotation::identity());
    let w2 = Vec3::new(0.5, -0.2, 0.0);
    let w2_dot = Vec3::new(1.0, 2.0, 0.0);
    let full = omega_d_ddot(&r, &w2, &w2_dot, &reference, 3.0, RateSquareReading::Full);
    let lift = omega_d_ddot(&r, &w2, &w2_dot, &reference, 3.0, RateSquareReading::PlanarLift);
    assert_eq!(full, lift);
    let spinning = Vec3::new(0.5, -0.2, 26.18);
    let full = omega_d_ddot(&r, &spinning, &w2_dot, &reference, 3.0, RateSquareReading::Full);
    let lift = omega_d_ddot(&r, &spinning, &w2_dot, &reference, 3.0, RateSquareReading::PlanarLift);
    assert!((full - lift).norm() > 1.0);
}

#[test]
fn laws_ignore_reference_spin_about_its_axis() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let body = BodyParams::default();
    let gains = Gains::new(7.0, 3.0);
    let m = CtlMatrices::for_body(&gains, &body);
    for _ in 0..100 {
        let r = random_rotation(&mut rng);
        let base = random_rotation(&mut rng);
        let theta = rng.gen_range(-3.0..3.0);
        let a = RefAttitude::new(base);
        let b = RefAttitude::new(base * Rotation::about_z(theta));
        let mut w2 = random_vec(&mut rng, 2.0);
        w2.z = body.spin_rate;
        let w = project_xy(&w2);
        let w_dot = project_xy(&random_vec(&mut rng, 4.0));
        let ctl = CtlState {
            omega: w,
            u: Vec2::new(0.3, 0.1),
            u_hat: Vec2::new(-0.2, 0.4),
        };
        let close = |x: Vec2, y: Vec2| assert!((x - y).norm() <= 1e-12 * (1.0 + x.norm()), "{x} vs {y}");
        close(omega_d(&r, &a, gains.k_p), omega_d(&r, &b, gains.k_p));
        close(omega_d_dot(&r, &w2, &a, gains.k_p), omega_d_dot(&r, &w2, &b, gains.k_p));
        let wd_a = omega_d(&r, &a, gains.k_p);
        let wd_b = omega_d(&r, &b, gains.k_p);
        close(control_conventional(&w, &wd_a, &gains), control_conventional(&w, &wd_b, &gains));
        let sp_a = control_sp(&w, &wd_a, &omega_d_dot(&r, &w2, &a, gains.k_p), &m);
        let sp_b = control_sp(&w, &wd_b, &omega_d_dot(&r, &w2, &b, gains.k_p), &m);
        close(sp_a, sp_b);
        close(
            control_sp_motor(&r, &w2, &w_dot, &a, &gains, &m).v,
            control_sp_motor(&r, &w2, &w_dot, &b, &gains, &m).v,
        );
        close(
            control_sp_observer(&ctl, &r, &w2, &a, &gains, &m, RateSquareReading::Full).v,
            control_sp_observer(&ctl, &r, &w2, &b, &gains, &m, RateSquareReading::Full).v,
        );
    }
}

#[test]
fn rate_error_matrix_is_a_damped_gyroscope() {
    let body = BodyParams::default();
    let c = body.coeffs();
    for k_d in [0.3, 1.0, 5.0, 40.0] {
        let m = CtlMatrices::for_body(&Gains::new(1.0, k_d), &body);
        let a = nalgebra::DMatrix::from_iterator(2, 2, m.a.iter().copied());
        let spec = hurwitz(&a);
        for z in &spec.eigenvalues {
            assert_relative_eq!(z.re, -k_d, epsilon = 1e-12);
            assert_relative_eq!(z.im.abs(), c.k, epsilon = 1e-12);
        }
    }
}

/// Evenly spread points on the sphere.
fn fibonacci_sphere(n: usize) -> Vec<UnitVec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            UnitVec3::normalize(Vec3::new(r * phi.cos(), r * phi.sin(), z)).unwrap()
        })
        .collect()
}

#[test]
fn closed_loop_rests_only_at_the_two_poles() {
    // at rest (ω = 0, ω̇ = 0) every law needs zero steady torque
    let body = BodyParams::default();
    let gains = Gains::new(4.0, 2.0);
    let m = CtlMatrices::for_body(&gains, &body);
    let gamma_d = UnitVec3::normalize(Vec3::new(0.3, -0.5, 0.8)).unwrap();
    let reference = RefAttitude::from_gamma(&gamma_d);
    let w2 = Vec3::new(0.0, 0.0, body.spin_rate);
    let mut grid = fibonacci_sphere(4000);
    grid.push(gamma_d);
    grid.push(-gamma_d);
    let mut rests = Vec::new();
    for g in grid {
        let r = Rotation::aligning_e3(&g) * Rotation::about_z(0.7);
        let wd = omega_d(&r, &reference, gains.k_p);
        let conventional = control_conventional(&Vec2::zeros(), &wd, &gains);
        let sp = control_sp(&Vec2::zeros(), &wd, &omega_d_dot(&r, &w2, &reference, gains.k_p), &m);
        let motor = control_sp_motor(&r, &w2, &Vec2::zeros(), &reference, &gains, &m).v;
        let angle = geodesic_angle(&g, &gamma_d);
        // |ω_d| = k_P sin(angle) independently of the spin phase
        assert_relative_eq!(conventional.norm(), gains.k_p * angle.sin(), epsilon = 1e-12);
        let smallest = conventional.norm().min(sp.norm()).min(motor.norm());
        if smallest < 1e-12 {
            rests.push(angle);
        } else {
            assert!(sp.norm() > 0.1 * gains.k_p * angle.sin());
        }
    }
    assert_eq!(rests.len(), 2, "{rests:?}");
    assert!(rests.iter().any(|a| *a < 1e-9));
    assert!(rests.iter().any(|a| (a - std::f64::consts::PI).abs() < 1e-9));
}

#[test]
fn observer_error_is_independent_of_the_command() {
    let tau = 0.0846;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u0 = Vec2::new(1.0, -2.0);
    let uh0 = Vec2::new(-0.5, 0.7);
    let mut errors: Vec<Vec<Vec2>> = Vec::new();
    for _ in 0..3 {
        let mut u = u0;
        let mut obs = TorqueObserver::new(uh0, tau);
        let mut trace = Vec::new();
        for _ in 0..200 {
            let v = Vec2::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
            u = motor_advance(&u, &v, tau, 1e-3);
            obs.update(&v, 1e-3);
            trace.push(u - obs.estimate());
        }
        errors.push(trace);
    }
    for trace in &errors[1..] {
        for (a, b) in errors[0].iter().zip(trace) {
            assert!((a - b).norm() < 1e-12);
        }
    }
    let t = 200.0 * 1e-3;
    assert_relative_eq!(errors[0][199].norm(), (u0 - uh0).norm() * (-t / tau).exp(), max_relative = 1e-10);
}

#[test]
fn observer_error_does_not_depend_on_gains() {
    let trace = |gains: Gains| {
        let mut sc = Scenario::new(Law::SpMotorObserver).with_motor(true).with_duration(0.5).with_gains(gains);
        sc.initial_u_hat = Vec2::new(2.0, 1.0);
        let log = run(&sc).unwrap();
        log.samples.iter().map(|s| s.u - s.u_hat).collect::<Vec<_>>()
    };
    let a = trace(Gains::new(20.0, 16.0));
    let b = trace(Gains::new(3.0, 1.5));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).norm() < 1e-9, "{x} vs {y}");
    }
}

#[test]
fn gain_conditions_per_law() {
    let tau = BodyParams::default().tau_m;
    assert!(gain_check(Law::Conventional, &Gains::new(1.0, 1e-6), tau).passed);
    assert!(!gain_check(Law::Conventional, &Gains::new(1.0, 0.0), tau).passed);
    assert!(!gain_check(Law::Sp, &Gains::new(0.0, 5.0), tau).passed);
    assert!(!gain_check(Law::Sp, &Gains::new(1.0, 0.25), tau).passed);
    assert!(gain_check(Law::Sp, &Gains::new(1.0, 0.2501), tau).passed);
    let bound = (1.0 + tau) / 4.0;
    for law in [Law::SpMotor, Law::SpMotorObserver] {
        assert!(!gain_check(law, &Gains::new(1.0, bound), tau).passed);
        assert!(gain_check(law, &Gains::new(1.0, bound + 1e-9), tau).passed);
        // third minor of -Q: (k_D - (1 + τ_m)/4) / τ_m
        let r = gain_check(law, &Gains::new(1.0, 2.0), tau);
        assert_relative_eq!(r.det_chain[2], (2.0 - bound) / tau, max_relative = 1e-12);
    }
    assert!(!gain_check(Law::Sp, &Gains::new(f64::NAN, 1.0), tau).passed);
}
