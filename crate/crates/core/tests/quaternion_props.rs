use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use proptest::prelude::*;
use rlfd_core::dmp::DmpGains;
use rlfd_core::orientation::{
    angle_axis_to_quat, apply_orientation_residual, fit_orientation_dmp, orientation_rollout, quat_compose,
    quat_error_to_angular_velocity, quat_exp, quat_log, AngleAxisResidual, OrientationDmpParams, UnitQuaternion,
};
use rlfd_core::{Quat, Quat32, Vector3};

type M3 = [[f64; 3]; 3];

/// Active rotation by `angle` about the unit `k` (Rodrigues).
fn rodrigues(k: [f64; 3], angle: f64) -> M3 {
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    let [x, y, z] = k;
    [
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ]
}

fn mul(a: &M3, b: &M3) -> M3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

fn transpose(a: &M3) -> M3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[j][i];
        }
    }
    m
}

fn max_diff(a: &M3, b: &M3) -> f64 {
    (0..9).map(|k| (a[k / 3][k % 3] - b[k / 3][k % 3]).abs()).fold(0.0, f64::max)
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Same rotation up to sign.
fn same_rotation(a: &Quat, b: &Quat, tol: f64) -> bool {
    let (a, b) = (a.to_array(), b.to_array());
    let d1 = (0..4).map(|k| (a[k] - b[k]).abs()).fold(0.0, f64::max);
    let d2 = (0..4).map(|k| (a[k] + b[k]).abs()).fold(0.0, f64::max);
    d1.min(d2) < tol
}

fn axis() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.0f64..1.0).prop_filter("non-degenerate axis", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-4)
}

/// Uniform-ish unit quaternion from an axis and an angle in `[0, π)`.
fn quat() -> impl Strategy<Value = (Quat, [f64; 3], f64)> {
    (axis(), 0.0..PI).prop_map(|(k, a)| {
        let k = unit(k);
        (UnitQuaternion::from_axis_angle(Vector3::new(k[0], k[1], k[2]), a), k, a)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn exp_inverts_log_on_upper_hemisphere((q, _, _) in quat()) {
        let q = q.canonical();
        prop_assert!(q.w >= 0.0);
        let back = quat_exp(&quat_log(&q));
        for (a, b) in back.to_array().iter().zip(q.to_array()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert!((back.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn log_norm_is_rotation_angle((q, _, a) in quat()) {
        prop_assert!((quat_log(&q).norm() - a).abs() < 1e-9);
    }

    #[test]
    fn composition_matches_attitude_matrix_product((a, ka, aa) in quat(), (b, kb, ab) in quat()) {
        // Attitude matrices are transposes of the active rotations.
        let att_a = transpose(&rodrigues(ka, aa));
        let att_b = transpose(&rodrigues(kb, ab));
        let c = quat_compose(&a, &b).unwrap();
        prop_assert!(max_diff(&c.attitude_matrix(), &mul(&att_a, &att_b)) < 1e-9);
        // Equivalently, the active rotation of `a ∘ b` is R(b) R(a).
        prop_assert!(max_diff(&c.rotation_matrix(), &mul(&rodrigues(kb, ab), &rodrigues(ka, aa))) < 1e-9);
        prop_assert!((c.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn composition_is_associative_with_two_sided_identity((a, _, _) in quat(), (b, _, _) in quat(), (c, _, _) in quat()) {
        let left = quat_compose(&quat_compose(&a, &b).unwrap(), &c).unwrap();
        let right = quat_compose(&a, &quat_compose(&b, &c).unwrap()).unwrap();
        prop_assert!(same_rotation(&left, &right, 1e-9));
        let id = UnitQuaternion::identity();
        prop_assert!(same_rotation(&quat_compose(&id, &a).unwrap(), &a, 1e-12));
        prop_assert!(same_rotation(&quat_compose(&a, &id).unwrap(), &a, 1e-12));
    }

    #[test]
    fn angle_axis_construction_matches_rodrigues(k in axis(), scale in 0.1f64..5.0, alpha in -PI..=PI) {
        let r = Vector3::new(k[0] * scale, k[1] * scale, k[2] * scale);
        let q = angle_axis_to_quat(&AngleAxisResidual { alpha, r }).unwrap();
        prop_assert!(q.w >= 0.0);
        prop_assert!((q.norm() - 1.0).abs() < 1e-9);
        prop_assert!(max_diff(&q.rotation_matrix(), &rodrigues(unit(k), alpha)) < 1e-9);
    }

    #[test]
    fn residual_application_matches_matrix_oracle((qb, kb, ab) in quat(), k in axis(), alpha in -PI..PI) {
        let res = AngleAxisResidual { alpha, r: Vector3::new(k[0], k[1], k[2]) };
        let qf = apply_orientation_residual(&qb, &res).unwrap();
        let att = mul(&transpose(&rodrigues(unit(k), alpha)), &transpose(&rodrigues(kb, ab)));
        prop_assert!(max_diff(&qf.attitude_matrix(), &att) < 1e-9);
        prop_assert!((qf.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn angular_velocity_integrates_onto_target((a, _, _) in quat(), (b, _, _) in quat(), dt in 0.001f64..1.0) {
        let w = quat_error_to_angular_velocity(&b, &a, dt).unwrap();
        let reached = quat_compose(&quat_exp(&w.scale(dt)), &a).unwrap();
        prop_assert!(same_rotation(&reached, &b, 1e-9));
    }

    #[test]
    fn single_precision_stays_unit(k in axis(), a in 0.0f32..3.0, k2 in axis(), a2 in 0.0f32..3.0) {
        let f = |k: [f64; 3]| rlfd_core::Vec3::new(k[0] as f32, k[1] as f32, k[2] as f32);
        let p = Quat32::from_axis_angle(f(k), a);
        let q = Quat32::from_axis_angle(f(k2), a2);
        let c = quat_compose(&p, &q).unwrap();
        prop_assert!((c.norm() - 1.0).abs() < 1e-5);
    }
}

#[test]
fn right_angles_about_x_then_y_match_matrix_product() {
    let qx = UnitQuaternion::from_axis_angle(Vector3::new(1.0, 0.0, 0.0), FRAC_PI_2);
    let qy = UnitQuaternion::from_axis_angle(Vector3::new(0.0, 1.0, 0.0), FRAC_PI_2);
    let c = quat_compose(&qx, &qy).unwrap();
    let expected = mul(&transpose(&rodrigues([1.0, 0.0, 0.0], FRAC_PI_2)), &transpose(&rodrigues([0.0, 1.0, 0.0], FRAC_PI_2)));
    assert!(max_diff(&c.attitude_matrix(), &expected) < 1e-12);
}

#[test]
fn residual_quarter_turns_about_z_add() {
    let base = UnitQuaternion::from_axis_angle(Vector3::new(0.0, 0.0, 1.0), FRAC_PI_4);
    let res = AngleAxisResidual {
        alpha: FRAC_PI_4,
        r: Vector3::new(0.0, 0.0, 2.0),
    };
    let q = apply_orientation_residual(&base, &res).unwrap();
    assert!(max_diff(&q.rotation_matrix(), &rodrigues([0.0, 0.0, 1.0], FRAC_PI_2)) < 1e-12);

    let base = UnitQuaternion::from_axis_angle(Vector3::new(0.0, 0.0, 1.0), FRAC_PI_2);
    let res = AngleAxisResidual {
        alpha: FRAC_PI_2,
        r: Vector3::new(0.0, 0.0, 1.0),
    };
    let q = apply_orientation_residual(&base, &res).unwrap();
    assert!(max_diff(&q.rotation_matrix(), &rodrigues([0.0, 0.0, 1.0], PI)) < 1e-12);
}

#[test]
fn half_turn_has_zero_scalar_part() {
    let q = angle_axis_to_quat(&AngleAxisResidual {
        alpha: PI,
        r: Vector3::new(1.0, 0.0, 0.0),
    })
    .unwrap();
    assert!(q.w.abs() < 1e-15);
    assert!((q.xyz.x() - 1.0).abs() < 1e-15);
}

/// Slerp from identity to a quarter turn about z with a minimum-jerk
/// angle, so the demonstration starts and ends at rest.
fn slerp_demo(n: usize) -> Vec<Quat> {
    (0..n)
        .map(|i| {
            let u = i as f64 / (n - 1) as f64;
            let p = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
            UnitQuaternion::from_axis_angle(Vector3::new(0.0, 0.0, 1.0), FRAC_PI_2 * p)
        })
        .collect()
}

#[test]
fn seventy_basis_fit_replays_slerp_demo() {
    let dt = 0.001;
    let demo = slerp_demo(1001);
    let params = fit_orientation_dmp(&demo, dt, 70, DmpGains::default()).unwrap();
    let replay = orientation_rollout(&params, demo[0], Vector3::zeros(), 1.0, dt).unwrap();
    let mse = demo.iter().zip(&replay).map(|(a, b)| a.geodesic_distance(b).powi(2)).sum::<f64>() / demo.len() as f64;
    assert!(mse.sqrt() < 0.02, "geodesic RMSE {}", mse.sqrt());
    assert!(replay.iter().all(|q| (q.norm() - 1.0).abs() < 1e-9));
}

#[test]
fn unforced_orientation_primitive_converges_to_goal() {
    let goal = UnitQuaternion::from_axis_angle(Vector3::new(0.0, 0.0, 1.0), FRAC_PI_2);
    let tau = 1.0;
    let p = OrientationDmpParams::unforced(UnitQuaternion::identity(), goal, tau, 70, DmpGains::default()).unwrap();
    let traj = orientation_rollout(&p, UnitQuaternion::identity(), Vector3::zeros(), 2.0 * tau, 1e-3).unwrap();
    let err = traj.last().unwrap().geodesic_distance(&goal);
    assert!(err < 0.02, "final geodesic error {err}");
    // Critically damped log-space spring: the angle error decays as
    // (1 + wt) exp(-wt) with w = beta_v scaled so that w^2 = alpha beta.
    let w = (25.0f64 * 6.25).sqrt();
    let oracle = FRAC_PI_2 * (1.0 + w * 2.0) * (-w * 2.0f64).exp();
    assert!((err - oracle).abs() < 1e-3, "error {err} vs spring oracle {oracle}");
}
