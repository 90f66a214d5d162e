use metasim::backends::{conservation_probe, launch, BackendError, BackendKind, Handler};
use metasim::config::{parse_scenario, CameraConfig, ScenarioConfig};
use metasim::math::{look_at, quat_from_rpy, Pose, Vec3};
use metasim::state::{
    diff_states, EntityState, EnvState, Field, SceneState, StateError, StateQuery,
};

fn scenario(body: &str) -> ScenarioConfig {
    parse_scenario(body).unwrap()
}

fn sphere(name: &str, pos: [f64; 3], r: f64, mass: f64, e: f64) -> String {
    format!(
        "  - name: {name}\n    kind:\n      type: primitive\n      shape: sphere\n      dims: [{r}]\n    base_pose:\n      pos: [{}, {}, {}]\n    mass: {mass}\n    restitution: {e}\n",
        pos[0], pos[1], pos[2]
    )
}

fn ground(e: f64) -> String {
    format!("  - name: ground\n    kind:\n      type: primitive\n      shape: plane\n      dims: [20, 20]\n    restitution: {e}\n")
}

fn zero_g(objects: &str) -> ScenarioConfig {
    scenario(&format!(
        "name: t\nsim:\n  gravity: [0, 0, 0]\nobjects:\n{objects}"
    ))
}

fn set_vel(h: &mut dyn Handler, name: &str, v: [f64; 3], w: [f64; 3]) {
    let mut p = EnvState::new();
    p.insert(
        name.into(),
        EntityState {
            lin_vel: Some(Vec3::from(v)),
            ang_vel: Some(Vec3::from(w)),
            ..Default::default()
        },
    );
    h.set_states(&SceneState::single(p)).unwrap();
}

fn get(h: &dyn Handler, name: &str) -> EntityState {
    h.get_states(&StateQuery::all()).unwrap().envs[0][name].clone()
}

#[test]
fn launch_replicates_envs() {
    let cfg = scenario(&format!(
        "name: t\nobjects:\n{}",
        sphere("ball", [0.0, 0.0, 1.0], 0.1, 1.0, 0.5)
    ));
    for kind in [BackendKind::Dyn, BackendKind::Kin] {
        let h = launch(&cfg, 1, kind).unwrap();
        let s = h.get_states(&StateQuery::all()).unwrap();
        assert_eq!(s.envs.len(), 1);
        assert_eq!(s.envs[0].len(), 1);
        let h4 = launch(&cfg, 4, kind).unwrap();
        let s4 = h4.get_states(&StateQuery::all()).unwrap();
        assert_eq!(s4.envs.len(), 4);
        assert!(s4.envs.iter().all(|e| *e == s4.envs[0]));
    }
}

#[test]
fn missing_asset_file_fails_launch() {
    let cfg = scenario(
        "name: t\nrobots:\n  - name: arm\n    asset:\n      path: /nonexistent/arm.urdf\n    ee_frame: hand\n",
    );
    assert!(matches!(
        launch(&cfg, 1, BackendKind::Kin),
        Err(BackendError::Asset(
            metasim::assets::AssetError::AssetNotFound(_)
        ))
    ));
}

#[test]
fn set_then_get_is_exact_before_stepping() {
    let cfg = scenario(&format!(
        "name: t\nobjects:\n{}",
        sphere("cube", [0.0, 0.0, 0.3], 0.05, 1.0, 0.5)
    ));
    for kind in [BackendKind::Dyn, BackendKind::Kin] {
        let mut h = launch(&cfg, 2, kind).unwrap();
        let mut p = EnvState::new();
        p.insert(
            "cube".into(),
            EntityState {
                pos: Some(Vec3::new(0.0, 0.0, 1.0)),
                rot: Some(quat_from_rpy(0.1, 0.2, 0.3)),
                lin_vel: Some(Vec3::new(0.5, -0.25, 1.0)),
                ang_vel: Some(Vec3::new(3.0, 0.0, -1.0)),
                ..Default::default()
            },
        );
        h.set_states(&SceneState::single(p.clone())).unwrap();
        let back = h
            .get_states(&StateQuery::entity_fields("cube", &[Field::Pos]))
            .unwrap();
        assert_eq!(back.envs[0]["cube"].pos, Some(Vec3::new(0.0, 0.0, 1.0)));
        assert!(back.envs[0]["cube"].rot.is_none());
        let full = get(h.as_ref(), "cube");
        let want = &p["cube"];
        assert_eq!(full.rot, want.rot);
        assert!((full.lin_vel.unwrap() - want.lin_vel.unwrap()).norm() <= 1e-9);
        assert!((full.ang_vel.unwrap() - want.ang_vel.unwrap()).norm() <= 1e-9);
    }
}

#[test]
fn wrong_dof_length_is_rejected() {
    let cfg = scenario(&format!(
        "name: t\nobjects:\n{}",
        sphere("cube", [0.0; 3], 0.05, 1.0, 0.5)
    ));
    let mut h = launch(&cfg, 1, BackendKind::Dyn).unwrap();
    let mut p = EnvState::new();
    p.insert(
        "cube".into(),
        EntityState {
            dof_pos: Some(vec![1.0]),
            ..Default::default()
        },
    );
    assert!(matches!(
        h.set_states(&SceneState::single(p)),
        Err(BackendError::State(StateError::DofLengthMismatch { .. }))
    ));
}

#[test]
fn free_fall_matches_closed_form_within_integrator_bias() {
    let cfg = scenario(&format!(
        "name: t\nobjects:\n{}",
        sphere("ball", [0.0, 0.0, 10.0], 0.1, 1.0, 0.5)
    ));
    let mut h = launch(&cfg, 1, BackendKind::Dyn).unwrap();
    h.step(60).unwrap();
    let z = get(h.as_ref(), "ball").pos.unwrap().z;
    let g = 9.81;
    let dt = 1.0 / 60.0;
    let t = 1.0;
    let exact = 10.0 - g * t * t / 2.0;
    let bound = g * dt * t / 2.0;
    assert!((z - exact).abs() <= bound + 1e-9, "z {z} exact {exact}");
}

#[test]
fn zero_gravity_rest_is_still() {
    let cfg = zero_g(&sphere("ball", [0.1, 0.2, 0.3], 0.1, 1.0, 0.5));
    let mut h = launch(&cfg, 1, BackendKind::Dyn).unwrap();
    let before = h.get_states(&StateQuery::all()).unwrap();
    h.step(100).unwrap();
    let after = h.get_states(&StateQuery::all()).unwrap();
    assert_eq!(diff_states(&before, &after).unwrap().max_pos(), 0.0);
}

#[test]
fn head_on_elastic_spheres_exchange_velocities() {
    let objs = format!(
        "{}{}",
        sphere("a", [-0.5, 0.0, 0.0], 0.1, 1.0, 1.0),
        sphere("b", [0.5, 0.0, 0.0], 0.1, 1.0, 1.0)
    );
    let cfg = zero_g(&objs);
    let mut h = launch(&cfg, 1, BackendKind::Dyn).unwrap();
    set_vel(h.as_mut(), "a", [1.0, 0.0, 0.0], [0.0; 3]);
    set_vel(h.as_mut(), "b", [-1.0, 0.0, 0.0], [0.0; 3]);
    h.step(60).unwrap();
    let va = get(h.as_ref(), "a").lin_vel.unwrap();
    let vb = get(h.as_ref(), "b").lin_vel.unwrap();
    assert!((va - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12, "{va:?}");
    assert!((vb - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12, "{vb:?}");
}

#[test]
fn inelastic_floor_stops_a_sphere() {
    let objs = format!(
        "{}{}",
        ground(0.0),
        sphere("ball", [0.0, 0.0, 0.5], 0.1, 1.0, 0.0)
    );
    let cfg = scenario(&format!("name: t\nobjects:\n{objs}"));
    let mut h = launch(&cfg, 1, BackendKind::Dyn).unwrap();
    h.step(120).unwrap();
    let s = get(h.as_ref(), "ball");
    assert_eq!(s.lin_vel.unwrap().z, 0.0);
    assert!((s.pos.unwrap().z - 0.1).abs() < 1e-9);
}

#[test]
fn elastic_bounce_preserves_speed() {
    let objs = format!(
        "{}{}",
        ground(1.0),
        sphere("ball", [0.0, 0.0, 0.3], 0.1, 1.0, 1.0)
    );
    let cfg = zero_g(&objs);
    let mut h = launch(&cfg, 1, BackendKind::Dyn).unwrap();
    set_vel(h.as_mut(), "ball", [0.5, 0.0, -2.0], [0.0; 3]);
    let speed0 = Vec3::new(0.5, 0.0, -2.0).norm();
    h.step(30).unwrap();
    let v = get(h.as_ref(), "ball").lin_vel.unwrap();
    assert!(v.z > 0.0);
    assert!((v.norm() - speed0).abs() < 1e-9);
}

#[test]
fn box_settles_on_plane() {
    let objs = format!(
        "{}  - name: crate\n    kind:\n      type: primitive\n      shape: box\n      dims: [0.2, 0.2, 0.2]\n    base_pose:\n      pos: [0, 0, 0.4]\n      rot: [0.9659258, 0.2588190, 0, 0]\n    mass: 2\n    restitution: 0.2\n",
        ground(0.2)
    );
    let cfg = scenario(&format!("name: t\nobjects:\n{objs}"));
    let mut h = launch(&cfg, 1, BackendKind::Dyn).unwrap();
    h.step(600).unwrap();
    let s = get(h.as_ref(), "crate");
    let z = s.pos.unwrap().z;
    assert!(z > 0.05 && z < 0.16, "z {z}");
    assert!(s.lin_vel.unwrap().norm() < 0.2);
}

#[test]
fn conservation_two_spheres_with_spin() {
    let objs = format!(
        "{}{}",
        sphere("a", [-1.0, 0.5, 0.0], 0.1, 1.0, 1.0),
        sphere("b", [1.0, 0.5, 0.0], 0.15, 2.0, 1.0)
    );
    let cfg = zero_g(&objs);
    let mut h = launch(&cfg, 1, BackendKind::Dyn).unwrap();
    set_vel(h.as_mut(), "a", [1.5, 0.0, 0.0], [0.0, 0.0, 4.0]);
    set_vel(h.as_mut(), "b", [-0.5, 0.0, 0.0], [1.0, 2.0, 0.0]);
    let series = conservation_probe(h.as_mut(), 1000).unwrap();
    assert_eq!(series.len(), 1001);
    let s0 = series[0];
    for s in &series {
        assert!((s.linear - s0.linear).norm() / s0.linear.norm() < 1e-9);
        assert!((s.kinetic - s0.kinetic).abs() / s0.kinetic < 1e-9);
        assert!((s.angular - s0.angular).norm() / s0.angular.norm() < 1e-6);
    }
    // The spheres did collide.
    assert!(get(h.as_ref(), "b").lin_vel.unwrap().x > 0.0);
}

#[test]
fn off_centre_collision_conserves_angular_momentum() {
    let cfg = parse_scenario(
        &std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../fixtures/scenarios/conservation.scn"
        ))
        .unwrap(),
    )
    .unwrap();
    let mut h = launch(&cfg, 1, BackendKind::Dyn).unwrap();
    let series = conservation_probe(h.as_mut(), 1000).unwrap();
    let s0 = series[0];
    for s in &series {
        assert!((s.linear - s0.linear).norm() / s0.linear.norm() < 1e-9);
        assert!((s.kinetic - s0.kinetic).abs() / s0.kinetic < 1e-9);
        assert!((s.angular - s0.angular).norm() / s0.angular.norm() < 1e-6);
    }
    assert!(get(h.as_ref(), "right").lin_vel.unwrap().x > 0.0);
}

#[test]
fn torque_free_box_keeps_angular_momentum() {
    let objs = "  - name: brick\n    kind:\n      type: primitive\n      shape: box\n      dims: [0.3, 0.2, 0.1]\n    mass: 1.5\n";
    let cfg = zero_g(objs);
    let mut h = launch(&cfg, 1, BackendKind::Dyn).unwrap();
    set_vel(h.as_mut(), "brick", [0.0; 3], [1.0, 2.0, 3.0]);
    let series = conservation_probe(h.as_mut(), 500).unwrap();
    let l0 = series[0].angular;
    for s in &series {
        assert!((s.angular - l0).norm() / l0.norm() < 1e-9);
    }
}

#[test]
fn probe_requires_dyn() {
    let cfg = zero_g(&sphere("a", [0.0; 3], 0.1, 1.0, 1.0));
    let mut h = launch(&cfg, 1, BackendKind::Kin).unwrap();
    assert!(matches!(
        conservation_probe(h.as_mut(), 1),
        Err(BackendError::NotDynamic)
    ));
}

const ARM: &str = r#"<robot name="arm">
  <link name="base"/><link name="l1"/><link name="hand"/>
  <link name="finger"/>
  <joint name="j1" type="revolute"><parent link="base"/><child link="l1"/>
    <axis xyz="0 0 1"/><limit lower="-3" upper="3"/></joint>
  <joint name="j2" type="revolute"><parent link="l1"/><child link="hand"/>
    <origin xyz="0.5 0 0"/><axis xyz="0 1 0"/><limit lower="-2" upper="2"/></joint>
  <joint name="grip" type="prismatic"><parent link="hand"/><child link="finger"/>
    <axis xyz="0 1 0"/><limit lower="0" upper="0.04"/></joint>
</robot>"#;

fn arm_cfg() -> ScenarioConfig {
    scenario(&format!(
        "name: t\nrobots:\n  - name: arm\n    asset:\n      urdf: {}\n    ee_frame: hand\n    gripper_joints: [grip]\n    default_dof_pos: [0, 0, 0.04]\n",
        serde_json::to_string(ARM).unwrap()
    ))
}

fn set_target(h: &mut dyn Handler, q: Vec<f64>) {
    let mut p = EnvState::new();
    p.insert(
        "arm".into(),
        EntityState {
            dof_target: Some(q),
            ..Default::default()
        },
    );
    h.set_states(&SceneState::single(p)).unwrap();
}

#[test]
fn kin_jumps_to_target_and_dyn_converges() {
    let cfg = arm_cfg();
    let mut kin = launch(&cfg, 1, BackendKind::Kin).unwrap();
    let mut dynh = launch(&cfg, 1, BackendKind::Dyn).unwrap();
    let target = vec![0.7, -0.4, 0.01];
    set_target(kin.as_mut(), target.clone());
    set_target(dynh.as_mut(), target.clone());
    kin.step(1).unwrap();
    assert_eq!(get(kin.as_ref(), "arm").dof_pos.unwrap(), target);
    // 5 time constants of settling is not enough for 1e-3 on a 0.7 rad jump;
    // hold for 12.
    let steps = (12.0 * 0.05 * 60.0) as usize;
    dynh.step(steps).unwrap();
    let q = get(dynh.as_ref(), "arm").dof_pos.unwrap();
    for (a, b) in q.iter().zip(&target) {
        assert!((a - b).abs() < 1e-3);
    }
}

#[test]
fn parallel_envs_stay_identical_and_runs_repeat() {
    let objs = format!(
        "{}{}",
        ground(0.3),
        sphere("ball", [0.0, 0.0, 0.5], 0.1, 1.0, 0.7)
    );
    let cfg = scenario(&format!("name: t\nobjects:\n{objs}"));
    let run = || {
        let mut h = launch(&cfg, 4, BackendKind::Dyn).unwrap();
        set_vel(h.as_mut(), "ball", [0.3, -0.1, 0.0], [0.0, 1.0, 0.0]);
        h.step(200).unwrap();
        h.get_states(&StateQuery::all()).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
    assert!(a.envs.iter().all(|e| *e == a.envs[0]));
}

fn red_sphere_scene(z: f64) -> (ScenarioConfig, CameraConfig) {
    let cfg = scenario(&format!(
        "name: t\nobjects:\n  - name: ball\n    kind:\n      type: primitive\n      shape: sphere\n      dims: [0.2]\n    base_pose:\n      pos: [0, 0, {z}]\n    material:\n      base_color: [1, 0, 0]\n"
    ));
    let cam = CameraConfig {
        name: "c".into(),
        pose: Pose::new(
            Vec3::zeros(),
            look_at(&Vec3::zeros(), &Vec3::z(), &Vec3::x()),
        ),
        vertical_fov: 60.0,
        width: 64,
        height: 64,
    };
    (cfg, cam)
}

#[test]
fn empty_scene_renders_uniform_background() {
    let cfg = scenario(&format!(
        "name: t\nobjects:\n{}",
        sphere("far", [0.0, 0.0, -50.0], 0.1, 0.0, 0.5)
    ));
    let cam = CameraConfig {
        name: "c".into(),
        pose: Pose::new(
            Vec3::zeros(),
            look_at(&Vec3::zeros(), &Vec3::z(), &Vec3::x()),
        ),
        vertical_fov: 60.0,
        width: 32,
        height: 24,
    };
    let h = launch(&cfg, 1, BackendKind::Kin).unwrap();
    let img = h.render(&cam, 0).unwrap();
    let first = img.pixel(0, 0);
    assert_eq!(img.count(first), 32 * 24);
}

#[test]
fn sphere_disc_size_matches_projection() {
    let mut counts = Vec::new();
    for z in [4.0, 2.0] {
        let (cfg, cam) = red_sphere_scene(z);
        let h = launch(&cfg, 1, BackendKind::Kin).unwrap();
        let img = h.render(&cam, 0).unwrap();
        let c = img.pixel(32, 32);
        assert!(c[0] > 0 && c[1] == 0 && c[2] == 0, "{c:?}");
        let n = img.count(c) as f64;
        let f = 32.0 / (30f64.to_radians()).tan();
        let r = f * 0.2 / (z * z - 0.04f64).sqrt();
        let area = std::f64::consts::PI * r * r;
        assert!(
            (n - area).abs() < 2.0 * std::f64::consts::PI * r + 4.0,
            "{n} vs {area}"
        );
        counts.push(n);
    }
    assert!(counts[1] > counts[0]);
}

#[test]
fn nearer_box_occludes() {
    let cfg = scenario(
        "name: t\nobjects:\n  - name: near\n    kind:\n      type: primitive\n      shape: box\n      dims: [0.5, 0.5, 0.5]\n    base_pose:\n      pos: [0, 0, 2]\n    material:\n      base_color: [0, 0, 1]\n  - name: far\n    kind:\n      type: primitive\n      shape: box\n      dims: [1, 1, 1]\n    base_pose:\n      pos: [0.3, 0, 4]\n    material:\n      base_color: [0, 1, 0]\n",
    );
    let cam = CameraConfig {
        name: "c".into(),
        pose: Pose::new(
            Vec3::zeros(),
            look_at(&Vec3::zeros(), &Vec3::z(), &Vec3::x()),
        ),
        vertical_fov: 60.0,
        width: 64,
        height: 64,
    };
    let h = launch(&cfg, 1, BackendKind::Kin).unwrap();
    let img = h.render(&cam, 0).unwrap();
    let centre = img.pixel(32, 32);
    assert!(centre[2] > 0 && centre[1] == 0, "{centre:?}");
    let bad = CameraConfig {
        vertical_fov: 180.0,
        ..cam
    };
    assert!(matches!(
        h.render(&bad, 0),
        Err(BackendError::DegenerateCamera(_))
    ));
}
