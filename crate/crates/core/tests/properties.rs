use std::path::Path;

use metasim::backends::{launch, BackendKind};
use metasim::config::{
    apply_overrides, load_scenario, parse_scenario_in, serialize_scenario, ScenarioConfig,
    SuccessChecker,
};
use metasim::env::{check_success, CheckContext};
use metasim::math::{Pose, Quat, Vec3};
use metasim::state::*;
use proptest::prelude::*;

fn pick_place() -> ScenarioConfig {
    load_scenario(
        &Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/scenarios/pick_place.scn"),
    )
    .unwrap()
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn quat() -> impl Strategy<Value = Quat> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.1..1.0f64)
        .prop_map(|(x, y, z, w)| Quat::from_quaternion(nalgebra::Quaternion::new(w, x, y, z)))
}

fn entity(dof: usize) -> impl Strategy<Value = EntityState> {
    (
        vec3(),
        quat(),
        vec3(),
        vec3(),
        proptest::collection::vec(-3.0..3.0f64, dof * 3),
    )
        .prop_map(move |(p, r, v, w, q)| EntityState {
            pos: Some(p),
            rot: Some(r),
            lin_vel: Some(v),
            ang_vel: Some(w),
            dof_pos: Some(q[..dof].to_vec()),
            dof_vel: Some(q[dof..2 * dof].to_vec()),
            dof_target: Some(q[2 * dof..].to_vec()),
        })
}

fn scene() -> impl Strategy<Value = SceneState> {
    (entity(2), entity(0)).prop_map(|(a, c)| {
        let mut env = EnvState::new();
        env.insert("arm".into(), a);
        env.insert("cube".into(), c);
        SceneState::single(env)
    })
}

fn only(name: &str, e: EntityState) -> SceneState {
    let mut env = EnvState::new();
    env.insert(name.into(), e);
    SceneState::single(env)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenario_text_round_trips(
        x in -1.0..1.0f64, y in -1.0..1.0f64, mass in 0.01..5.0f64,
        e in 0.0..1.0f64, len in 1u32..2000, dt in 0.001..0.05f64,
    ) {
        let mut cfg = pick_place();
        cfg.objects[1].base_pose = Pose::from_translation(x, y, 0.025);
        cfg.objects[1].mass = mass;
        cfg.objects[1].restitution = e;
        cfg.task.episode_length = len;
        cfg.sim.dt = dt;
        let text = serialize_scenario(&cfg);
        let back = parse_scenario_in(&text, cfg.base_dir.as_deref()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(serialize_scenario(&back), text);
    }

    #[test]
    fn overrides_are_pure(m in 0.01..5.0f64) {
        let cfg = pick_place();
        let before = cfg.clone();
        prop_assert_eq!(apply_overrides(&cfg, &[]).unwrap(), cfg.clone());
        let o = apply_overrides(&cfg, &[format!("objects.1.mass={m}")]).unwrap();
        prop_assert_eq!(o.objects[1].mass, m);
        prop_assert_eq!(cfg, before);
    }

    #[test]
    fn merge_is_idempotent_and_order_free_for_disjoint_partials(base in scene(), a in entity(2), c in entity(0)) {
        let pa = only("arm", a);
        let pc = only("cube", c);
        let once = merge_states(&base, &pa).unwrap();
        prop_assert_eq!(&merge_states(&once, &pa).unwrap(), &once);
        let ab = merge_states(&once, &pc).unwrap();
        let ba = merge_states(&merge_states(&base, &pc).unwrap(), &pa).unwrap();
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn diff_sees_exactly_the_touched_fields(base in scene(), p in vec3(), k in 0usize..2) {
        let name = ["arm", "cube"][k];
        let old = base.envs[0][name].pos.unwrap();
        prop_assume!(old != p);
        let merged = merge_states(&base, &only(name, EntityState { pos: Some(p), ..Default::default() })).unwrap();
        let d = diff_states(&base, &merged).unwrap();
        for (n, e) in &d.entities {
            for f in Field::ALL {
                let touched = n == name && f == Field::Pos;
                prop_assert_eq!(e.get(f) > 0.0, touched, "{} {:?}", n, f);
            }
        }
    }

    #[test]
    fn trajectories_round_trip_through_rvt(init in scene(), acts in proptest::collection::vec(proptest::collection::vec(-3.0..3.0f64, 2), 0..20), with_states: bool) {
        let init = init.envs[0].clone();
        let actions: Vec<Action> = acts.into_iter().map(|q| Action::for_robot("arm", q)).collect();
        let states = with_states.then(|| vec![init.clone(); actions.len()]);
        let t = Trajectory { scenario_name: "prop".into(), init_state: init, actions, states, success: Some(true), ..Default::default() };
        let bytes = serialize_trajectory(&t).unwrap();
        prop_assert_eq!(deserialize_trajectory(&bytes).unwrap(), t);
    }

    #[test]
    fn pruning_a_conjunct_never_breaks_success(x in -0.3..0.3f64, r in proptest::collection::vec(0.01..0.4f64, 1..5), drop in 0usize..5) {
        let mut env = EnvState::new();
        env.insert("cube".into(), EntityState { pos: Some(Vec3::new(x, 0.0, 0.0)), rot: Some(Quat::identity()), ..Default::default() });
        let ctx = CheckContext { joints: Default::default(), initial: env.clone() };
        let conj: Vec<_> = r.iter().map(|&radius| SuccessChecker::PositionWithin { entity: "cube".into(), center: [0.0; 3], radius }).collect();
        let full = check_success(&env, &SuccessChecker::All { of: conj.clone() }, &ctx);
        let mut pruned = conj;
        pruned.remove(drop % pruned.len());
        let fewer = check_success(&env, &SuccessChecker::All { of: pruned }, &ctx);
        prop_assert!(!full || fewer);
    }

    #[test]
    fn set_then_get_is_exact_on_both_backends(p in vec3(), r in quat(), v in vec3(), w in vec3(), q in proptest::collection::vec(-0.5..0.5f64, 8)) {
        let cfg = pick_place();
        for kind in [BackendKind::Dyn, BackendKind::Kin] {
            let mut h = launch(&cfg, 1, kind).unwrap();
            let mut env = EnvState::new();
            env.insert("cube".into(), EntityState { pos: Some(p), rot: Some(r), lin_vel: Some(v), ang_vel: Some(w), ..Default::default() });
            env.insert("arm".into(), EntityState { dof_pos: Some(q.clone()), ..Default::default() });
            h.set_states(&SceneState::single(env)).unwrap();
            let got = h.get_states(&StateQuery::all()).unwrap();
            let c = &got.envs[0]["cube"];
            prop_assert!((c.pos.unwrap() - p).norm() <= 1e-9);
            prop_assert!(metasim::math::geodesic_angle(&c.rot.unwrap(), &r) <= 1e-9);
            prop_assert!((c.lin_vel.unwrap() - v).norm() <= 1e-9);
            prop_assert!((c.ang_vel.unwrap() - w).norm() <= 1e-9);
            let qa = got.envs[0]["arm"].dof_pos.clone().unwrap();
            let lim_ok = qa.iter().zip(&q).all(|(a, b)| (a - b).abs() <= 1e-9);
            prop_assert!(lim_ok, "{:?} vs {:?}", qa, q);
        }
    }
}
