use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinaxis::geom::{exp_so3, geodesic_angle, hat, vee, Mat3, Rotation, UnitVec3, Vec3, ORTHO_TOL};

fn vec3(max: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-max..max).prop_map(|a| Vec3::new(a[0], a[1], a[2]))
}

fn direction() -> impl Strategy<Value = UnitVec3> {
    vec3(1.0)
        .prop_filter("non-degenerate", |v| v.norm() > 1e-3)
        .prop_map(|v| UnitVec3::normalize(v).unwrap())
}

proptest! {
    #[test]
    fn hat_anticommutes(v in vec3(10.0), w in vec3(10.0)) {
        let lhs = hat(&v) * w;
        let rhs = -(hat(&w) * v);
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        prop_assert!((lhs - v.cross(&w)).norm() <= 1e-12 * (1.0 + lhs.norm()));
        prop_assert_eq!(vee(&hat(&v)).unwrap(), v);
    }

    #[test]
    fn exp_is_a_rotation(dir in direction(), angle in 0.0f64..10.0) {
        let v = *dir.as_vec() * angle;
        let r = exp_so3(&v);
        prop_assert!(Rotation::new(*r.matrix()).is_ok());
        prop_assert!(r.ortho_error() < 1e-13);
        // the axis is fixed
        prop_assert!((r * v - v).norm() < 1e-12 * (1.0 + angle));
    }

    #[test]
    fn geodesic_is_a_metric(a in direction(), b in direction(), c in direction()) {
        let ab = geodesic_angle(&a, &b);
        prop_assert_eq!(ab, geodesic_angle(&b, &a));
        prop_assert!((0.0..=std::f64::consts::PI).contains(&ab));
        prop_assert!(ab <= geodesic_angle(&a, &c) + geodesic_angle(&c, &b) + 1e-12);
    }
}

#[test]
fn exp_of_small_vectors_is_near_identity() {
    for scale in [0.0, 1e-12, 1e-9, 1e-7, 1e-6, 1e-5] {
        let v = Vec3::new(0.3, -0.4, 0.5).normalize() * scale;
        let r = exp_so3(&v);
        let first_order = Mat3::identity() + hat(&v);
        assert!((r.matrix() - first_order).norm() <= scale * scale);
        assert!(r.ortho_error() < 1e-15);
    }
}

#[test]
fn long_composition_stays_orthogonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut r = Rotation::identity();
    for i in 0..1_000_000u32 {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        r = r * exp_so3(&v);
        if i % 100 == 99 {
            r = r.reorthonormalize();
        }
    }
    let r = r.reorthonormalize();
    assert!(r.ortho_error() < ORTHO_TOL);
    assert_relative_eq!(r.matrix().determinant(), 1.0, epsilon = 1e-10);
    let back = r.transpose() * r;
    assert_relative_eq!(*back.matrix(), Mat3::identity(), epsilon = 1e-10);
}
