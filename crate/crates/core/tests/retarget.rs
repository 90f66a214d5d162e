use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use metasim::assets::{load_file, CanonicalAsset};
use metasim::math::{geodesic_angle, quat_from_rpy, Pose, Vec3};
use metasim::retarget::{
    ee_path_from_trajectory, ik_solve, retarget_trajectory, Embodiment, IkMode, IkOptions,
    IkSolver, RetargetError, RetargetOptions,
};
use metasim::state::{Action, EntityState, EnvState, Trajectory};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

fn asset(rel: &str) -> CanonicalAsset {
    load_file(&fixture(rel)).unwrap().asset
}

fn position_only(tol: f64) -> IkOptions {
    IkOptions {
        pos_tol: tol,
        mode: IkMode::PositionOnly,
        ..Default::default()
    }
}

fn random_q(rng: &mut ChaCha8Rng, limits: &[[f64; 2]]) -> Vec<f64> {
    limits
        .iter()
        .map(|[lo, hi]| rng.random_range(*lo..=*hi))
        .collect()
}

#[test]
fn target_at_seed_converges_immediately() {
    let a = asset("urdf/arm6.urdf");
    let q0 = vec![0.1, -0.4, 0.9, 0.2, 0.5, -0.3];
    let solver = IkSolver::new(&a, "tool").unwrap();
    let target = solver.fk(&Pose::identity(), &q0).unwrap();
    let s = ik_solve(&a, "tool", &target, &q0, &IkOptions::default()).unwrap();
    assert_eq!(s.iterations, 0);
    assert_eq!(s.q, q0);
}

#[test]
fn planar_two_link_matches_an_elbow_solution() {
    let a = asset("urdf/planar2.urdf");
    let (x, y) = (1.0, 1.0);
    let c2: f64 = (x * x + y * y - 2.0) / 2.0;
    let solutions: Vec<[f64; 2]> = [c2.acos(), -c2.acos()]
        .iter()
        .map(|&q2| [y.atan2(x) - q2.sin().atan2(1.0 + q2.cos()), q2])
        .collect();
    let target = Pose::from_translation(x, y, 0.0);
    for seed in [[0.3, 1.0], [1.2, -1.0], [0.0, 0.4]] {
        let s = ik_solve(&a, "tip", &target, &seed, &position_only(1e-10)).unwrap();
        let best = solutions
            .iter()
            .map(|sol| (s.q[0] - sol[0]).abs().max((s.q[1] - sol[1]).abs()))
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-6, "seed {seed:?} gave {:?}", s.q);
    }
}

#[test]
fn unreachable_target_reports_the_gap() {
    let a = asset("urdf/planar2.urdf");
    let target = Pose::from_translation(3.0, 0.0, 0.0);
    match ik_solve(&a, "tip", &target, &[0.2, 0.3], &position_only(1e-3)) {
        Err(RetargetError::NoConvergence { pos_err, .. }) => {
            assert!(pos_err >= 1.0 && pos_err - 1.0 < 0.05, "{pos_err}")
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn geometric_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (file, frame) in [
        ("urdf/arm6.urdf", "tool"),
        ("urdf/arm9.urdf", "hand"),
        ("mjcf/arm9.xml", "hand"),
    ] {
        let a = asset(file);
        let solver = IkSolver::new(&a, frame).unwrap();
        let base = Pose::new(Vec3::new(0.1, -0.2, 0.3), quat_from_rpy(0.1, 0.0, 0.4));
        for _ in 0..20 {
            let q = random_q(&mut rng, &a.dof_limits());
            let jac = solver.jacobian(&base, &q).unwrap();
            let h = 1e-6;
            for d in 0..q.len() {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[d] += h;
                qm[d] -= h;
                let (pp, pm) = (
                    solver.fk(&base, &qp).unwrap(),
                    solver.fk(&base, &qm).unwrap(),
                );
                let lin = (pp.pos - pm.pos) / (2.0 * h);
                let ang = metasim::math::log_rotation(&(pp.rot * pm.rot.inverse())) / (2.0 * h);
                let col = jac.column(d);
                let num = [lin.x, lin.y, lin.z, ang.x, ang.y, ang.z];
                let scale = col.norm().max(1.0);
                for r in 0..6 {
                    assert!(
                        (col[r] - num[r]).abs() <= 1e-5 * scale,
                        "{file} dof {d} row {r}: {} vs {}",
                        col[r],
                        num[r]
                    );
                }
            }
        }
    }
}

#[test]
fn warm_started_random_targets_converge() {
    let a = asset("urdf/arm6.urdf");
    let solver = IkSolver::new(&a, "tool").unwrap();
    let limits = a.dof_limits();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = IkOptions::default();
    let mut ok = 0;
    let n = 300;
    for _ in 0..n {
        let q = random_q(&mut rng, &limits);
        let target = solver.fk(&Pose::identity(), &q).unwrap();
        let seed: Vec<f64> = q
            .iter()
            .zip(&limits)
            .map(|(x, [lo, hi])| (x + rng.random_range(-0.2..=0.2)).clamp(*lo, *hi))
            .collect();
        if let Ok(s) = solver.solve(&Pose::identity(), &target, &seed, &opts) {
            let got = solver.fk(&Pose::identity(), &s.q).unwrap();
            assert!((got.pos - target.pos).norm() < opts.pos_tol);
            assert!(geodesic_angle(&got.rot, &target.rot) < opts.rot_tol);
            ok += 1;
        }
    }
    assert!(ok as f64 >= 0.99 * n as f64, "{ok}/{n}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn ik_recovers_a_pose_reached_by_fk(q in proptest::collection::vec(-1.5f64..1.5, 6), jitter in proptest::collection::vec(-0.1f64..0.1, 6)) {
        let a = asset("urdf/arm6.urdf");
        let solver = IkSolver::new(&a, "tool").unwrap();
        let target = solver.fk(&Pose::identity(), &q).unwrap();
        let seed: Vec<f64> = q.iter().zip(&jitter).map(|(x, j)| x + j).collect();
        let s = solver.solve(&Pose::identity(), &target, &seed, &IkOptions::default()).unwrap();
        let got = solver.fk(&Pose::identity(), &s.q).unwrap();
        prop_assert!((got.pos - target.pos).norm() < 1e-3);
        prop_assert!(geodesic_angle(&got.rot, &target.rot) < 1e-2);
    }

    #[test]
    fn gripper_map_is_monotone_with_endpoints(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let e = gripper_arm("arm6_gripper.urdf");
        let mut qa = e.default_dof.clone();
        let mut qb = e.default_dof.clone();
        e.set_gripper(&mut qa, a.min(b));
        e.set_gripper(&mut qb, a.max(b));
        prop_assert!(e.gripper_open(&qa) <= e.gripper_open(&qb) + 1e-12);
        let mut q = e.default_dof.clone();
        e.set_gripper(&mut q, 0.0);
        prop_assert_eq!(q[6], 0.0);
        e.set_gripper(&mut q, 1.0);
        prop_assert_eq!(q[6], 0.04);
        prop_assert_eq!(e.gripper_open(&q), 1.0);
    }
}

fn gripper_arm(file: &str) -> Embodiment {
    let a = asset(&format!("urdf/{file}"));
    Embodiment::new(
        "arm",
        &a,
        "hand",
        &["finger_l_joint".to_string(), "finger_r_joint".to_string()],
        Pose::identity(),
        vec![0.0, -0.3, 1.2, 0.0, 0.6, 0.0, 0.04, 0.04],
    )
    .unwrap()
}

/// A smooth joint-space sweep on the source arm.
fn sweep(e: &Embodiment, steps: usize) -> Trajectory {
    let mut init = EnvState::new();
    init.insert(
        "arm".into(),
        EntityState {
            dof_pos: Some(e.default_dof.clone()),
            ..Default::default()
        },
    );
    let actions = (0..steps)
        .map(|k| {
            let t = k as f64 / steps as f64;
            let mut q = e.default_dof.clone();
            q[0] += 0.6 * t;
            q[1] += 0.2 * (t * 3.0).sin();
            q[2] -= 0.3 * t;
            q[4] += 0.2 * t;
            e.set_gripper(&mut q, 1.0 - t);
            Action::for_robot("arm", q)
        })
        .collect();
    Trajectory {
        scenario_name: "sweep".into(),
        init_state: init,
        actions,
        ..Default::default()
    }
}

#[test]
fn ee_path_endpoints() {
    let e = gripper_arm("arm6_gripper.urdf");
    let mut q = vec![0.0; 8];
    let t = Trajectory {
        actions: vec![Action::for_robot("arm", q.clone())],
        ..Default::default()
    };
    let path = ee_path_from_trajectory(&t, &e).unwrap();
    assert_eq!(path[0].pose, e.ee_pose(&q).unwrap());
    assert_eq!(path[0].gripper_open, 0.0);
    e.set_gripper(&mut q, 1.0);
    let t = Trajectory {
        actions: vec![Action::for_robot("arm", q)],
        ..Default::default()
    };
    assert_eq!(
        ee_path_from_trajectory(&t, &e).unwrap()[0].gripper_open,
        1.0
    );
}

#[test]
fn planar_path_follows_trigonometry() {
    let a = asset("urdf/planar2.urdf");
    let e = Embodiment::new("p", &a, "tip", &[], Pose::identity(), vec![]).unwrap();
    let qs = [[0.0, 0.0], [FRAC_PI_2, 0.0], [0.3, -1.1], [2.0, 0.7]];
    let t = Trajectory {
        actions: qs
            .iter()
            .map(|q| Action::for_robot("p", q.to_vec()))
            .collect(),
        ..Default::default()
    };
    for (w, q) in ee_path_from_trajectory(&t, &e).unwrap().iter().zip(qs) {
        let x = q[0].cos() + (q[0] + q[1]).cos();
        let y = q[0].sin() + (q[0] + q[1]).sin();
        assert!((w.pose.pos - Vec3::new(x, y, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn same_robot_retarget_reproduces_the_path() {
    let e = gripper_arm("arm6_gripper.urdf");
    let src = sweep(&e, 60);
    let out = retarget_trajectory(&src, &e, &e, &RetargetOptions::default()).unwrap();
    assert_eq!(out.actions.len(), src.actions.len());
    for (a, b) in src.actions.iter().zip(&out.actions) {
        let (qa, qb) = (&a.targets["arm"], &b.targets["arm"]);
        let (pa, pb) = (e.ee_pose(qa).unwrap(), e.ee_pose(qb).unwrap());
        assert!((pa.pos - pb.pos).norm() < 1e-3);
        assert!((qa[6] - qb[6]).abs() < 1e-12);
    }
}

#[test]
fn longer_arm_tracks_every_waypoint() {
    let src = gripper_arm("arm6_gripper.urdf");
    let dst = gripper_arm("arm6_long_gripper.urdf");
    let t = sweep(&src, 80);
    let out = retarget_trajectory(&t, &src, &dst, &RetargetOptions::default()).unwrap();
    let mut prev: Option<Vec<f64>> = None;
    for (a, b) in t.actions.iter().zip(&out.actions) {
        let want = src.ee_pose(&a.targets["arm"]).unwrap();
        let q = &b.targets["arm"];
        let got = dst.ee_pose(q).unwrap();
        assert!((want.pos - got.pos).norm() < 1e-3);
        assert!(geodesic_angle(&want.rot, &got.rot) < 1e-2);
        if let Some(p) = prev {
            let jump = p
                .iter()
                .zip(q)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(jump < 0.2, "jump {jump}");
        }
        prev = Some(q.clone());
    }
}

#[test]
fn path_leaving_the_workspace_is_rejected_where_it_leaves() {
    let src = gripper_arm("arm6_long_gripper.urdf");
    let dst = gripper_arm("arm6_gripper.urdf");
    let mut t = sweep(&src, 10);
    // Stretch the source arm fully: out of reach for the shorter arm.
    let mut q = vec![0.0; 8];
    src.set_gripper(&mut q, 1.0);
    t.actions.push(Action::for_robot("arm", q));
    match retarget_trajectory(&t, &src, &dst, &RetargetOptions::default()) {
        Err(RetargetError::Waypoint { index, .. }) => assert_eq!(index, 10),
        other => panic!("{other:?}"),
    }
}
