use std::path::Path;
use std::time::Duration;

use metasim::backends::BackendKind;
use metasim::config::{load_scenario, ScenarioConfig};
use metasim::env::{replay, Env, ReplayOptions};
use metasim::math::{quat_from_rpy, Pose, Vec3};
use metasim::retarget::Embodiment;
use metasim::state::{deserialize_trajectory, Trajectory};
use metasim_teleop::*;

fn scenario() -> ScenarioConfig {
    load_scenario(
        &Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/scenarios/pick_place.scn"),
    )
    .unwrap()
}

fn session(rate: u32, speed: f64) -> TeleopSession {
    let env = Env::launch(&scenario(), 1, BackendKind::Kin).unwrap();
    TeleopSession::new(
        env,
        SessionOptions {
            rate,
            speed,
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn one_second_of_up_moves_speed_metres() {
    let mut s = session(50, 0.1);
    let z0 = s.target().pos.z;
    for i in 1..=50 {
        s.apply_command(&TeleopCommand::new(i, i * 20, [0.0, 0.0, 1.0]))
            .unwrap();
    }
    assert!((s.target().pos.z - z0 - 0.1).abs() < 1e-12);
}

#[test]
fn combined_intents_move_diagonally() {
    let mut s = session(25, 0.05);
    let p0 = s.target().pos;
    s.apply_command(&TeleopCommand::new(1, 0, [1.0, -1.0, 0.0]))
        .unwrap();
    assert!((s.target().pos - p0 - Vec3::new(0.002, -0.002, 0.0)).norm() < 1e-15);
}

#[test]
fn disabled_orientation_is_ignored_and_enabled_is_absolute() {
    let mut s = session(50, 0.1);
    let r0 = s.target().rot;
    let mut c = TeleopCommand::new(1, 0, [0.0; 3]);
    c.orientation = [0.0, 1.0, 0.0, 0.0];
    s.apply_command(&c).unwrap();
    assert_eq!(s.target().rot, r0);
    let q = r0 * quat_from_rpy(0.0, 0.0, 0.2);
    s.apply_command(&TeleopCommand::new(2, 20, [0.0; 3]).with_orientation(&q))
        .unwrap();
    assert!(metasim::math::geodesic_angle(&s.target().rot, &q) < 1e-12);
}

#[test]
fn gripper_toggle_is_an_involution() {
    let mut s = session(50, 0.1);
    let open = s.gripper_is_open();
    s.apply_command(&TeleopCommand::new(1, 0, [0.0; 3]).with_toggle())
        .unwrap();
    assert_ne!(s.gripper_is_open(), open);
    s.apply_command(&TeleopCommand::new(2, 20, [0.0; 3]).with_toggle())
        .unwrap();
    assert_eq!(s.gripper_is_open(), open);
}

#[test]
fn unreachable_target_reverts_with_warning() {
    let mut s = session(1, 5.0);
    let before = *s.target();
    let a = s
        .apply_command(&TeleopCommand::new(1, 0, [1.0, 0.0, 0.0]))
        .unwrap();
    assert!(a.warning.is_some());
    assert_eq!(*s.target(), before);
    // The next feasible command starts from the kept target.
    let mut small = session(50, 0.1);
    let a = small
        .apply_command(&TeleopCommand::new(1, 0, [1.0, 0.0, 0.0]))
        .unwrap();
    assert!(a.warning.is_none());
}

#[test]
fn empty_session_records_nothing_and_rates_are_bounded() {
    let mut s = session(50, 0.1);
    let t = s.close();
    assert!(t.actions.is_empty());
    assert_eq!(t.success, Some(false));
    assert!(matches!(
        s.apply_command(&TeleopCommand::new(1, 0, [0.0; 3])),
        Err(SessionError::NotRunning(_))
    ));
    let env = Env::launch(&scenario(), 1, BackendKind::Kin).unwrap();
    let opts = SessionOptions {
        rate: 51,
        ..Default::default()
    };
    assert!(matches!(
        TeleopSession::new(env, opts),
        Err(SessionError::BadRate(51))
    ));
}

#[test]
fn stale_sequence_numbers_are_refused() {
    let mut s = session(50, 0.1);
    s.admit(5).unwrap();
    assert!(matches!(
        s.admit(5),
        Err(ProtocolError::DuplicateOrStale { seq: 5, last: 5 })
    ));
    assert!(s.admit(4).is_err());
    s.admit(6).unwrap();
}

fn end_effector(state: &StateFrame, robot: &Embodiment) -> Pose {
    robot.ee_pose(&state.dofs[0].1).unwrap()
}

async fn start(
    rate: u32,
    speed: f64,
    record: Option<&Path>,
) -> (
    String,
    tokio::task::JoinHandle<Result<Trajectory, ServerError>>,
) {
    let (listener, addr) = bind(0).await.unwrap();
    let s = session(rate, speed);
    let opts = ServerOptions {
        record: record.map(Path::to_path_buf),
        ..Default::default()
    };
    (addr.to_string(), tokio::spawn(serve(listener, s, opts)))
}

fn script(n: u64) -> Vec<TeleopCommand> {
    (1..=n)
        .map(|i| {
            let phase = (i / 25) % 4;
            let t = match phase {
                0 => [1.0, 0.0, 0.0],
                1 => [0.0, 1.0, 1.0],
                2 => [-1.0, 0.0, 0.0],
                _ => [0.0, -1.0, -1.0],
            };
            let mut c = TeleopCommand::new(i, i * 20, t);
            c.gripper_toggle = i % 40 == 0;
            c
        })
        .collect()
}

async fn run_script(addr: &str, cmds: &[TeleopCommand], period: Duration) -> Vec<ServerMessage> {
    let mut c = TeleopClient::connect(addr, None).await.unwrap();
    let mut tick = tokio::time::interval(period);
    for cmd in cmds {
        tick.tick().await;
        c.send(cmd).await.unwrap();
    }
    let mut msgs = Vec::new();
    // Drain everything the server sends back, then close.
    let mut states = 0;
    while states < cmds.len() {
        let m = c.recv().await.unwrap().unwrap();
        if matches!(m, ServerMessage::State(_)) {
            states += 1;
        }
        msgs.push(m);
    }
    msgs.extend(c.close().await.unwrap());
    msgs
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn scripted_session_is_recorded_and_replays_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("session.rvt");
    let (addr, server) = start(50, 0.1, Some(&file)).await;
    let cmds = script(100);
    let msgs = run_script(&addr, &cmds, Duration::from_millis(20)).await;
    let rec = server.await.unwrap().unwrap();

    let states: Vec<_> = msgs
        .iter()
        .filter_map(|m| match m {
            ServerMessage::State(s) => Some(s),
            _ => None,
        })
        .collect();
    assert_eq!(states.len(), 100);
    assert!(states.iter().zip(&cmds).all(|(s, c)| s.seq_echo == c.seq));
    assert_eq!(msgs.last(), Some(&ServerMessage::Closed(100)));
    assert_eq!(rec.actions.len(), 100);

    let from_disk = deserialize_trajectory(&std::fs::read(&file).unwrap()).unwrap();
    assert_eq!(from_disk, rec);
    let mut env = Env::launch(&scenario(), 1, BackendKind::Kin).unwrap();
    let r = replay(&mut env, &from_disk, &ReplayOptions::default()).unwrap();
    assert_eq!(&r.final_state, from_disk.final_state().unwrap());
    assert_eq!(r.max_diff(), Some(0.0));

    // The last frame shows the end effector where the intents put it.
    let cfg = scenario();
    let robot = Embodiment::from_config(&cfg.robots[0], cfg.base_dir.as_deref()).unwrap();
    let start = robot
        .ee_pose(rec.init_state["arm"].dof_pos.as_ref().unwrap())
        .unwrap();
    let sum = cmds
        .iter()
        .fold(Vec3::zeros(), |a, c| a + Vec3::from(c.translate));
    let end = end_effector(states.last().unwrap(), &robot);
    assert!((end.pos - (start.pos + sum * 0.1 / 50.0)).norm() < 1e-3);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn same_script_records_the_same_trajectory() {
    let cmds = script(60);
    let mut recs = Vec::new();
    for _ in 0..2 {
        let (addr, server) = start(50, 0.1, None).await;
        run_script(&addr, &cmds, Duration::from_millis(5)).await;
        recs.push(server.await.unwrap().unwrap());
    }
    assert_eq!(recs[0], recs[1]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stale_and_malformed_frames_get_errors() {
    let (addr, server) = start(50, 0.1, None).await;
    let mut c = TeleopClient::connect(&addr, None).await.unwrap();
    c.send(&TeleopCommand::new(5, 0, [0.0; 3])).await.unwrap();
    c.send(&TeleopCommand::new(5, 0, [1.0, 0.0, 0.0]))
        .await
        .unwrap();
    c.send(&TeleopCommand::new(3, 0, [1.0, 0.0, 0.0]))
        .await
        .unwrap();
    c.send_raw("CMD 6 0 7 0 0 0 1 0 0 0 0").await.unwrap();
    c.send(&TeleopCommand::new(6, 20, [0.0; 3])).await.unwrap();
    let msgs = c.close().await.unwrap();
    let errs: Vec<_> = msgs
        .iter()
        .filter_map(|m| match m {
            ServerMessage::Err { seq, .. } => Some(*seq),
            _ => None,
        })
        .collect();
    assert_eq!(errs, vec![Some(5), Some(3), None]);
    assert_eq!(server.await.unwrap().unwrap().actions.len(), 2);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn dropped_connection_pauses_and_resumes_with_token() {
    let (addr, server) = start(50, 0.1, None).await;
    let mut a = TeleopClient::connect(&addr, None).await.unwrap();
    let token = a.token.clone();
    // A second client cannot join a live session.
    assert!(matches!(
        TeleopClient::connect(&addr, None).await,
        Err(ClientError::Refused(_))
    ));
    a.send(&TeleopCommand::new(1, 0, [1.0, 0.0, 0.0]))
        .await
        .unwrap();
    assert!(matches!(
        a.recv().await.unwrap(),
        Some(ServerMessage::State(_))
    ));
    a.disconnect().await;
    tokio::time::sleep(Duration::from_millis(50)).await;

    assert!(matches!(
        TeleopClient::connect(&addr, Some("nope")).await,
        Err(ClientError::Refused(_))
    ));
    let mut b = TeleopClient::connect(&addr, Some(&token)).await.unwrap();
    // Sequence numbers carry over the reconnect.
    b.send(&TeleopCommand::new(1, 0, [1.0, 0.0, 0.0]))
        .await
        .unwrap();
    b.send(&TeleopCommand::new(2, 20, [1.0, 0.0, 0.0]))
        .await
        .unwrap();
    let msgs = b.close().await.unwrap();
    assert!(matches!(msgs[0], ServerMessage::Err { seq: Some(1), .. }));
    assert_eq!(server.await.unwrap().unwrap().actions.len(), 2);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn flood_is_coalesced_without_losing_motion() {
    let (addr, server) = start(10, 0.01, None).await;
    let mut c = TeleopClient::connect(&addr, None).await.unwrap();
    for i in 1..=200 {
        c.send(&TeleopCommand::new(i, i * 5, [-1.0, 0.0, 0.0]))
            .await
            .unwrap();
    }
    let msgs = c.close().await.unwrap();
    let rec = server.await.unwrap().unwrap();
    // At most a full queue plus the command in flight when it filled.
    assert!(rec.actions.len() <= 11 + 1, "{}", rec.actions.len());
    let cfg = scenario();
    let robot = Embodiment::from_config(&cfg.robots[0], cfg.base_dir.as_deref()).unwrap();
    let start = robot
        .ee_pose(rec.init_state["arm"].dof_pos.as_ref().unwrap())
        .unwrap();
    let end = robot
        .ee_pose(&rec.actions.last().unwrap().targets["arm"])
        .unwrap();
    assert!((start.pos.x - end.pos.x - 200.0 * 0.01 / 10.0).abs() < 1e-3);
    assert!(matches!(msgs.last(), Some(ServerMessage::Closed(n)) if *n == rec.actions.len()));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn index_page_is_served() {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    let (addr, server) = start(50, 0.1, None).await;
    let mut s = tokio::net::TcpStream::connect(&addr).await.unwrap();
    s.write_all(b"GET / HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut body = String::new();
    s.read_to_string(&mut body).await.unwrap();
    assert!(body.starts_with("HTTP/1.1 200"));
    assert!(body.contains("/teleop"));
    TeleopClient::connect(&addr, None)
        .await
        .unwrap()
        .close()
        .await
        .unwrap();
    server.await.unwrap().unwrap();
}

#[test]
fn port_resolution() {
    assert_eq!(resolve_port(Some(9000)), 9000);
    std::env::remove_var(PORT_ENV);
    assert_eq!(resolve_port(None), DEFAULT_PORT);
}

#[test]
fn keyboard_frames_parse_on_the_server() {
    let mut d = KeyboardDriver::new(metasim::math::Quat::identity());
    for keys in [
        vec![Key::Up],
        vec![Key::Char('e'), Key::Left],
        vec![Key::Char('q'), Key::Char('g')],
    ] {
        let c = d.command(&keys, 0);
        assert_eq!(decode_command(&encode_command(&c)).unwrap(), c);
    }
}
