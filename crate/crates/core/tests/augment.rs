use std::path::Path;

use metasim::augment::*;
use metasim::backends::BackendKind;
use metasim::config::{load_scenario, ScenarioConfig};
use metasim::env::{replay, Env, ReplayOptions, TaskEnv};
use metasim::retarget::{Embodiment, IkOptions};
use metasim::state::{EnvState, Trajectory};

fn scenario(name: &str) -> ScenarioConfig {
    load_scenario(
        &Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../fixtures/scenarios")
            .join(name),
    )
    .unwrap()
}

fn robot(cfg: &ScenarioConfig) -> Embodiment {
    Embodiment::from_config(&cfg.robots[0], cfg.base_dir.as_deref()).unwrap()
}

fn cube_at(env: &Env, x: f64, y: f64) -> EnvState {
    let mut s = env.physics_states().unwrap().envs.swap_remove(0);
    let c = s.get_mut("cube").unwrap();
    c.pos = Some(metasim::math::Vec3::new(x, y, 0.025));
    s
}

fn source_demos(cfg: &ScenarioConfig, env: &Env) -> Vec<Trajectory> {
    let r = robot(cfg);
    [
        (0.5, 0.0),
        (0.45, -0.1),
        (0.55, 0.05),
        (0.48, 0.08),
        (0.58, -0.05),
    ]
    .iter()
    .map(|&(x, y)| {
        scripted_pick_place(
            &r,
            &cube_at(env, x, y),
            &PickPlacePlan::default(),
            &cfg.name,
            &IkOptions::default(),
        )
        .unwrap()
    })
    .collect()
}

#[test]
fn scripted_demo_succeeds_on_kin() {
    let cfg = scenario("pick_place.scn");
    let mut env = Env::launch(&cfg, 1, BackendKind::Kin).unwrap();
    for d in source_demos(&cfg, &env) {
        let r = replay(&mut env, &d, &ReplayOptions::default()).unwrap();
        assert!(r.success);
        let goal = r.final_state["target"].pos.unwrap() + metasim::math::Vec3::new(0.0, 0.0, 0.024);
        assert!((r.final_state["cube"].pos.unwrap() - goal).norm() < 0.03);
    }
}

fn segmented(cfg: &ScenarioConfig, env: &mut Env) -> Vec<SegmentedDemo> {
    let r = robot(cfg);
    source_demos(cfg, env)
        .iter()
        .map(|d| segment_demo(env, d, &cfg.task.subtasks, &r).unwrap())
        .collect()
}

#[test]
fn segmentation_partitions_the_actions() {
    let cfg = scenario("pick_place.scn");
    let mut env = Env::launch(&cfg, 1, BackendKind::Kin).unwrap();
    for s in segmented(&cfg, &mut env) {
        assert_eq!(s.actions(), s.source.actions);
        assert_eq!(s.segments.len(), 2);
        assert_eq!(s.segments[0].subtask, "pick");
        assert_eq!(s.segments[1].start, s.segments[0].actions.len());
        // The pick segment ends during the lift, after the gripper closed.
        assert!(s.segments[0].actions.len() > 105 && s.segments[0].actions.len() < 135);
    }
}

#[test]
fn relative_poses_reproduce_commanded_poses() {
    let cfg = scenario("pick_place.scn");
    let mut env = Env::launch(&cfg, 1, BackendKind::Kin).unwrap();
    let r = robot(&cfg);
    let s = &segmented(&cfg, &mut env)[1];
    for seg in &s.segments {
        for (a, w) in seg.actions.iter().zip(&seg.relative) {
            let direct = r.ee_pose(&a.targets["arm"]).unwrap();
            let back = seg.anchor_pose.compose(&w.pose);
            assert!((direct.pos - back.pos).norm() < 1e-12);
            assert!(metasim::math::geodesic_angle(&direct.rot, &back.rot) < 1e-9);
        }
    }
}

#[test]
fn unfinished_subtask_is_named() {
    let cfg = scenario("pick_place.scn");
    let mut env = Env::launch(&cfg, 1, BackendKind::Kin).unwrap();
    let mut d = source_demos(&cfg, &env).swap_remove(0);
    d.actions.truncate(100); // stops before the lift
    let err = segment_demo(&mut env, &d, &cfg.task.subtasks, &robot(&cfg)).unwrap_err();
    assert!(
        matches!(&err, AugmentError::SegmentationFailed(n) if n == "pick"),
        "{err}"
    );
}

#[test]
fn generation_in_the_source_scene_succeeds() {
    let cfg = scenario("pick_place.scn");
    let mut env = Env::launch(&cfg, 1, BackendKind::Kin).unwrap();
    let r = robot(&cfg);
    let s = &segmented(&cfg, &mut env)[0];
    let t = generate_augmented(
        &mut env,
        s,
        &s.source.init_state,
        &r,
        &GenerateOptions::default(),
    )
    .unwrap();
    assert_eq!(t.success, Some(true));
}

#[test]
fn augmented_dataset_is_prefix_stable_and_mostly_accepted() {
    let cfg = scenario("pick_place.scn");
    let mut env = Env::launch(&cfg, 1, BackendKind::Kin).unwrap();
    let r = robot(&cfg);
    let src = segmented(&cfg, &mut env);
    let run = |n| {
        let opts = DatasetOptions {
            n,
            seed: 7,
            ..Default::default()
        };
        augment_dataset(&cfg, &src, &r, &opts).unwrap()
    };
    let small = run(40);
    let big = run(80);
    assert!(small.acceptance_rate() >= 0.5);
    assert!(big.accepted.len() >= small.accepted.len());
    assert_eq!(&big.accepted[..small.accepted.len()], &small.accepted[..]);
    // Every accepted sample replays to success.
    for t in small.accepted.iter().take(5) {
        assert!(
            replay(&mut env, t, &ReplayOptions::default())
                .unwrap()
                .success
        );
    }
}

#[test]
fn dataset_rejects_unreachable_placements() {
    let mut cfg = scenario("pick_place.scn");
    cfg.task.spawn_regions[0].lo = [1.6, -0.1, 0.025];
    cfg.task.spawn_regions[0].hi = [1.8, 0.1, 0.025];
    let mut env = Env::launch(&cfg, 1, BackendKind::Kin).unwrap();
    let r = robot(&cfg);
    let src = segmented(&cfg, &mut env);
    let opts = DatasetOptions {
        n: 6,
        ..Default::default()
    };
    let rep = augment_dataset(&cfg, &src, &r, &opts).unwrap();
    assert!(rep.accepted.is_empty());
    assert_eq!(rep.rejected.len(), 6);
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap()
}

#[test]
fn level_zero_only_moves_objects() {
    let cfg = scenario("pick_place.scn");
    let spec = RandomizationSpec::new(0, 3);
    for i in 0..50 {
        let r = randomize_scene(&cfg, &spec, Split::Train, i).unwrap();
        assert_eq!(json(&r.cameras), json(&cfg.cameras));
        assert_eq!(json(&r.lights), json(&cfg.lights));
        assert_eq!(json(&r.scene), json(&cfg.scene));
        for (a, b) in r.objects.iter().zip(&cfg.objects) {
            assert_eq!(json(&a.material), json(&b.material));
        }
        let p = r
            .objects
            .iter()
            .find(|o| o.name == "cube")
            .unwrap()
            .base_pose
            .pos;
        assert!(p.x >= 0.42 && p.x <= 0.6 && p.y >= -0.15 && p.y <= 0.1 && p.z == 0.025);
    }
}

#[test]
fn draws_are_deterministic_per_seed_split_and_index() {
    let cfg = scenario("pick_place.scn");
    let spec = RandomizationSpec::new(3, 11);
    let a = randomize_scene(&cfg, &spec, Split::Test, 5).unwrap();
    assert_eq!(a, randomize_scene(&cfg, &spec, Split::Test, 5).unwrap());
    assert_ne!(a, randomize_scene(&cfg, &spec, Split::Test, 6).unwrap());
    assert_ne!(a, randomize_scene(&cfg, &spec, Split::Train, 5).unwrap());
}

#[test]
fn splits_draw_from_disjoint_pools() {
    let cfg = scenario("pick_place.scn");
    let spec = RandomizationSpec::new(2, 5);
    let (train_cams, test_cams) = split_pool(&spec.pools.camera_poses, 5).unwrap();
    let (train_tables, test_tables) = split_pool(&spec.pools.table_materials, 5).unwrap();
    for i in 0..200 {
        let tr = randomize_scene(&cfg, &spec, Split::Train, i).unwrap();
        let te = randomize_scene(&cfg, &spec, Split::Test, i).unwrap();
        assert!(train_cams.contains(&tr.cameras[0].pose));
        assert!(test_cams.contains(&te.cameras[0].pose));
        assert!(train_tables.contains(tr.scene.table_material.as_ref().unwrap()));
        assert!(test_tables.contains(te.scene.table_material.as_ref().unwrap()));
    }
}

#[test]
fn level_three_reflections_span_the_unit_interval() {
    let cfg = scenario("pick_place.scn");
    let spec = RandomizationSpec::new(3, 1);
    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
    for i in 0..2000 {
        let r = randomize_scene(&cfg, &spec, Split::Train, i).unwrap();
        for m in r.objects.iter().map(|o| &o.material) {
            for v in [m.roughness, m.specular, m.metallic] {
                assert!((0.0..=1.0).contains(&v));
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        assert_eq!(r.lights.len(), 1);
    }
    assert!(lo < 0.01 && hi > 0.99);
}

#[test]
fn bad_inputs_are_reported() {
    let cfg = scenario("pick_place.scn");
    assert!(matches!(
        randomize_scene(&cfg, &RandomizationSpec::new(4, 0), Split::Train, 0),
        Err(AugmentError::BadLevel(4))
    ));
    assert!(matches!(
        split_pool(&[1, 2, 3], 0),
        Err(AugmentError::PoolTooSmall { len: 3, min: 10 })
    ));
    assert!(matches!(
        "val".parse::<Split>(),
        Err(AugmentError::BadSplit(_))
    ));
}
