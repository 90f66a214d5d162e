//! `metasim` command-line tool.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use metasim::assets::{export_urdf_with_warnings, load_file, resolve_mesh_refs, AssetFormat};
use metasim::augment::{
    augment_dataset, randomize_scene, scripted_pick_place, segment_demo, DatasetOptions,
    PickPlacePlan, RandomizationSpec, Split,
};
use metasim::backends::{conservation_probe, launch, BackendKind, Image};
use metasim::config::{
    apply_overrides, load_scenario, parse_tree, serialize_scenario, AssetRef, RobotConfig,
    ScenarioConfig, SubtaskSpec,
};
use metasim::env::{collect, replay_with, Env, HybridEnv, ReplayOptions, TaskEnv};
use metasim::retarget::{retarget_trajectory, Embodiment, IkOptions, RetargetOptions};
use metasim::state::{deserialize_trajectory, serialize_trajectory, EnvState, Trajectory};

#[derive(Parser)]
#[command(
    name = "metasim",
    version,
    about = "Simulator-agnostic robot scenarios, demos and datasets"
)]
struct Cli {
    /// Edit the scenario before use: dotted path with list indices, e.g.
    /// `objects.1.mass=0.2`. Repeatable.
    #[arg(long = "override", global = true, value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert a robot description to URDF.
    Convert(ConvertArgs),
    /// Replay an RVT1 trajectory and report success.
    Replay(ReplayArgs),
    /// Replay demos through a (hybrid) env and keep the successful ones.
    Collect(CollectArgs),
    /// Generate augmented demos from segmented source demos.
    Augment(AugmentArgs),
    /// Write one randomized benchmark variant of a scenario.
    BenchSplit(BenchSplitArgs),
    /// Move a demo from one robot to another through end-effector IK.
    Retarget(RetargetArgs),
    /// Record momentum and energy over a run as CSV.
    ProbeConservation(ProbeArgs),
    /// Serve a teleoperation session over WebSocket and record it.
    TeleopServe(TeleopArgs),
    /// Drive a teleoperation session from terminal key presses.
    TeleopKeys(KeysArgs),
    /// Write a scripted pick-and-place demo.
    ScriptedDemo(ScriptedArgs),
    /// Render one camera of a scenario to a PPM file.
    Render(RenderArgs),
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long, value_parser = ["mjcf", "urdf"])]
    from: String,
    #[arg(long, value_parser = ["urdf"])]
    to: String,
    input: PathBuf,
    output: PathBuf,
    /// Extra directories searched for textured meshes. Repeatable.
    #[arg(long = "mesh-dir")]
    mesh_dirs: Vec<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    file: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, env = "METASIM_BACKEND", default_value = "dyn")]
    backend: BackendKind,
    /// Observe through this backend while physics runs on `--backend`.
    #[arg(long)]
    render_backend: Option<BackendKind>,
    /// Write one PPM per step from the first camera.
    #[arg(long)]
    out_video: Option<PathBuf>,
    /// Steps holding the last action after the demo ends.
    #[arg(long, default_value_t = 0)]
    settle: usize,
}

#[derive(Args)]
struct CollectArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, env = "METASIM_BACKEND", default_value = "dyn")]
    physics: BackendKind,
    #[arg(long)]
    renderer: Option<BackendKind>,
    #[arg(long)]
    out: PathBuf,
    /// Demo files to filter. Repeatable.
    #[arg(long = "demo")]
    demos: Vec<PathBuf>,
    /// Also generate this many scripted pick-and-place demos.
    #[arg(long, default_value_t = 0)]
    scripted: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    settle: usize,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Source demos. Repeatable.
    #[arg(long = "demo", required = true)]
    demos: Vec<PathBuf>,
    /// Subtask order: `scenario` for the scenario's list, or comma-separated
    /// subtask names.
    #[arg(long, default_value = "scenario")]
    subtasks: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "kin")]
    backend: BackendKind,
}

#[derive(Args)]
struct BenchSplitArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=3))]
    level: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    split: Split,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Draw index within the split.
    #[arg(long, default_value_t = 0)]
    index: u64,
}

#[derive(Args)]
struct RetargetArgs {
    #[arg(long)]
    demo: PathBuf,
    #[arg(long)]
    src_robot: PathBuf,
    #[arg(long)]
    dst_robot: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Scenario name stored in the output; the source's when omitted.
    #[arg(long)]
    scenario_name: Option<String>,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TeleopArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, env = "METASIM_BACKEND", default_value = "kin")]
    backend: BackendKind,
    #[arg(long)]
    record: Option<PathBuf>,
    /// Defaults to $METASIM_TELEOP_PORT, then 8571.
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value_t = 50)]
    rate: u32,
    /// Translation speed, m/s.
    #[arg(long, default_value_t = 0.1)]
    speed: f64,
    /// Directory served at `/` (the web client build).
    #[arg(long = "static")]
    static_dir: Option<PathBuf>,
}

#[derive(Args)]
struct KeysArgs {
    /// Server address, host:port.
    #[arg(long, default_value = "127.0.0.1:8571")]
    addr: String,
    /// Resume this session token.
    #[arg(long)]
    token: Option<String>,
}

#[derive(Args)]
struct ScriptedArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Randomize object placement with this seed and draw index.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    index: u64,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    camera: Option<String>,
    #[arg(long, env = "METASIM_BACKEND", default_value = "dyn")]
    backend: BackendKind,
    #[arg(long)]
    out: PathBuf,
}

fn scenario(path: &Path, overrides: &[String]) -> Result<ScenarioConfig> {
    let cfg = load_scenario(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(apply_overrides(&cfg, overrides)?)
}

fn read_demo(path: &Path) -> Result<Trajectory> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    deserialize_trajectory(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn write_demo(path: &Path, t: &Trajectory) -> Result<()> {
    std::fs::write(path, serialize_trajectory(t)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn write_ppm(path: &Path, img: &Image) -> Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    img.write_ppm(std::io::BufWriter::new(f))?;
    Ok(())
}

fn first_robot(cfg: &ScenarioConfig) -> Result<Embodiment> {
    let r = cfg
        .robots
        .first()
        .ok_or_else(|| anyhow!("scenario `{}` has no robot", cfg.name))?;
    Ok(Embodiment::from_config(r, cfg.base_dir.as_deref())?)
}

fn task_env(
    cfg: &ScenarioConfig,
    physics: BackendKind,
    render: Option<BackendKind>,
    images: bool,
) -> Result<Box<dyn TaskEnv>> {
    Ok(match render {
        Some(r) => Box::new(HybridEnv::launch(cfg, 1, physics, r)?.with_images(images)),
        None => Box::new(Env::launch(cfg, 1, physics)?.with_images(images)),
    })
}

fn convert(a: ConvertArgs) -> Result<()> {
    let parsed = load_file(&a.input)?;
    let fmt = AssetFormat::from_path(&a.input);
    let expected = if a.from == "mjcf" {
        AssetFormat::Mjcf
    } else {
        AssetFormat::Urdf
    };
    if fmt != Some(expected) {
        bail!("{} is not a {} file", a.input.display(), a.from);
    }
    let mut dirs = a.mesh_dirs.clone();
    if let Some(p) = a.input.parent() {
        dirs.push(p.to_path_buf());
    }
    let (asset, mesh_warnings) = resolve_mesh_refs(&parsed.asset, &dirs);
    let (urdf, export_warnings) = export_urdf_with_warnings(&asset)?;
    for w in parsed
        .warnings
        .iter()
        .chain(&mesh_warnings)
        .chain(&export_warnings)
    {
        eprintln!("WARN: {w}");
    }
    std::fs::write(&a.output, urdf).with_context(|| format!("writing {}", a.output.display()))?;
    Ok(())
}

fn replay_cmd(a: ReplayArgs, overrides: &[String]) -> Result<()> {
    let cfg = scenario(&a.scenario, overrides)?;
    let traj = read_demo(&a.file)?;
    let images = a.out_video.is_some();
    if images {
        if cfg.cameras.is_empty() {
            bail!("scenario `{}` has no camera to record", cfg.name);
        }
        std::fs::create_dir_all(a.out_video.as_ref().unwrap())?;
    }
    let mut env = task_env(&cfg, a.backend, a.render_backend, images)?;
    let mut io_err = None;
    let dir = a.out_video.clone();
    let report = replay_with(
        env.as_mut(),
        &traj,
        &ReplayOptions {
            settle_steps: a.settle,
        },
        &mut |k, r| {
            if let (Some(d), Some(img)) = (&dir, &r.observation.image) {
                if let Err(e) = write_ppm(&d.join(format!("frame_{k:05}.ppm")), img) {
                    io_err.get_or_insert(e);
                }
            }
        },
    )?;
    if let Some(e) = io_err {
        return Err(e);
    }
    println!("success: {}", report.success);
    println!("steps: {}", traj.actions.len());
    if let Some(d) = report.max_diff() {
        println!("max_diff: {d}");
    }
    Ok(())
}

/// Moves every spawn-region entity to its placement in draw `index`.
fn placed_init(cfg: &ScenarioConfig, base: &EnvState, seed: u64, index: u64) -> Result<EnvState> {
    let spec = RandomizationSpec::new(0, seed);
    let drawn = randomize_scene(cfg, &spec, Split::Train, index)?;
    let mut init = base.clone();
    for r in &cfg.task.spawn_regions {
        let o = drawn
            .objects
            .iter()
            .find(|o| o.name == r.entity)
            .expect("randomized entity exists");
        if let Some(e) = init.get_mut(&r.entity) {
            e.pos = Some(o.base_pose.pos);
            e.rot = Some(o.base_pose.rot);
        }
    }
    Ok(init)
}

fn pick_place_plan(cfg: &ScenarioConfig) -> PickPlacePlan {
    let mut plan = PickPlacePlan::default();
    if let Some(first) = cfg.task.subtasks.first() {
        plan.object = first.anchor.clone();
    }
    if let Some(last) = cfg.task.subtasks.last() {
        plan.goal = last.anchor.clone();
    }
    plan
}

fn scripted(cfg: &ScenarioConfig, seed: Option<u64>, index: u64) -> Result<Trajectory> {
    let env = Env::launch(cfg, 1, BackendKind::Kin)?;
    let base = env.physics_states()?.envs.swap_remove(0);
    let init = match seed {
        Some(s) => placed_init(cfg, &base, s, index)?,
        None => base,
    };
    Ok(scripted_pick_place(
        &first_robot(cfg)?,
        &init,
        &pick_place_plan(cfg),
        &cfg.name,
        &IkOptions::default(),
    )?)
}

fn collect_cmd(a: CollectArgs, overrides: &[String]) -> Result<()> {
    let cfg = scenario(&a.scenario, overrides)?;
    let mut demos = Vec::new();
    let mut names = Vec::new();
    for p in &a.demos {
        demos.push(read_demo(p)?);
        names.push(p.display().to_string());
    }
    for i in 0..a.scripted {
        demos.push(scripted(&cfg, Some(a.seed), i as u64)?);
        names.push(format!("scripted:{i}"));
    }
    let mut env = task_env(&cfg, a.physics, a.renderer, false)?;
    let report = collect(
        env.as_mut(),
        &demos,
        &ReplayOptions {
            settle_steps: a.settle,
        },
    );
    std::fs::create_dir_all(&a.out)?;
    let mut manifest = String::new();
    let mut k = 0;
    let mut rejected = report.rejected.iter().peekable();
    let mut accepted = report.accepted.iter();
    for (i, name) in names.iter().enumerate() {
        if rejected.peek().map(|r| r.0) == Some(i) {
            let (_, why) = rejected.next().unwrap();
            manifest.push_str(&format!("rejected {name} {why}\n"));
        } else {
            let t = accepted.next().expect("every demo is accepted or rejected");
            let file = format!("demo_{k:04}.rvt");
            write_demo(&a.out.join(&file), t)?;
            manifest.push_str(&format!("accepted {name} {file}\n"));
            k += 1;
        }
    }
    std::fs::write(a.out.join("manifest.txt"), manifest)?;
    println!("accepted {} of {}", report.accepted.len(), demos.len());
    Ok(())
}

fn subtask_order(cfg: &ScenarioConfig, spec: &str) -> Result<Vec<SubtaskSpec>> {
    if spec == "scenario" {
        if cfg.task.subtasks.is_empty() {
            bail!("scenario `{}` lists no subtasks", cfg.name);
        }
        return Ok(cfg.task.subtasks.clone());
    }
    spec.split(',')
        .map(|n| {
            cfg.task
                .subtasks
                .iter()
                .find(|s| s.name == n.trim())
                .cloned()
                .ok_or_else(|| anyhow!("no subtask `{}` in scenario `{}`", n.trim(), cfg.name))
        })
        .collect()
}

fn augment_cmd(a: AugmentArgs, overrides: &[String]) -> Result<()> {
    let cfg = scenario(&a.scenario, overrides)?;
    let subtasks = subtask_order(&cfg, &a.subtasks)?;
    let robot = first_robot(&cfg)?;
    let mut env = Env::launch(&cfg, 1, a.backend)?;
    let mut sources = Vec::new();
    for p in &a.demos {
        let d = read_demo(p)?;
        sources.push(
            segment_demo(&mut env, &d, &subtasks, &robot)
                .with_context(|| format!("segmenting {}", p.display()))?,
        );
    }
    let opts = DatasetOptions {
        n: a.n,
        seed: a.seed,
        backend: a.backend,
        ..Default::default()
    };
    let report = augment_dataset(&cfg, &sources, &robot, &opts)?;
    std::fs::create_dir_all(&a.out)?;
    let mut manifest = String::new();
    for (k, t) in report.accepted.iter().enumerate() {
        let file = format!("aug_{k:05}.rvt");
        write_demo(&a.out.join(&file), t)?;
        let sample = t.extras.get("augment_sample").cloned().unwrap_or_default();
        manifest.push_str(&format!("accepted {sample} {file}\n"));
    }
    for (i, why) in &report.rejected {
        manifest.push_str(&format!("rejected {i} {why}\n"));
    }
    std::fs::write(a.out.join("manifest.txt"), manifest)?;
    println!("accepted {} of {}", report.accepted.len(), report.requested);
    Ok(())
}

/// Makes relative asset paths absolute so the written scenario can live
/// anywhere.
fn absolutize(cfg: &mut ScenarioConfig) -> Result<()> {
    let Some(base) = cfg.base_dir.clone() else {
        return Ok(());
    };
    let base = base.canonicalize()?;
    let fix = |r: &mut AssetRef| {
        if let AssetRef::Path(p) = r {
            if Path::new(p).is_relative() {
                *p = base.join(&*p).display().to_string();
            }
        }
    };
    for r in &mut cfg.robots {
        fix(&mut r.asset);
    }
    for o in &mut cfg.objects {
        if let metasim::config::ObjectKind::Articulated { asset } = &mut o.kind {
            fix(asset);
        }
    }
    Ok(())
}

fn bench_split(a: BenchSplitArgs, overrides: &[String]) -> Result<()> {
    let cfg = scenario(&a.scenario, overrides)?;
    let spec = RandomizationSpec::new(a.level, a.seed);
    let mut out = randomize_scene(&cfg, &spec, a.split, a.index)?;
    let same_dir = match (a.out.parent(), &cfg.base_dir) {
        (Some(p), Some(b)) => {
            let p = if p.as_os_str().is_empty() {
                Path::new(".")
            } else {
                p
            };
            p.canonicalize().ok() == b.canonicalize().ok()
        }
        _ => false,
    };
    if !same_dir {
        absolutize(&mut out)?;
    }
    std::fs::write(&a.out, serialize_scenario(&out))
        .with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn robot_file(path: &Path) -> Result<Embodiment> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let tree = parse_tree(&text)?;
    let rc: RobotConfig = serde_json::from_value(tree)
        .with_context(|| format!("robot description in {}", path.display()))?;
    Ok(Embodiment::from_config(&rc, path.parent())?)
}

fn retarget_cmd(a: RetargetArgs) -> Result<()> {
    let demo = read_demo(&a.demo)?;
    let src = robot_file(&a.src_robot)?;
    let dst = robot_file(&a.dst_robot)?;
    let opts = RetargetOptions {
        scenario_name: a.scenario_name,
        ..Default::default()
    };
    let out = retarget_trajectory(&demo, &src, &dst, &opts)?;
    write_demo(&a.out, &out)?;
    println!(
        "retargeted {} actions from `{}` to `{}`",
        out.actions.len(),
        src.name,
        dst.name
    );
    Ok(())
}

fn probe(a: ProbeArgs, overrides: &[String]) -> Result<()> {
    let cfg = scenario(&a.scenario, overrides)?;
    let mut h = launch(&cfg, 1, BackendKind::Dyn)?;
    let samples = conservation_probe(h.as_mut(), a.steps)?;
    let mut csv = String::from("step,px,py,pz,Lx,Ly,Lz,KE\n");
    for (i, s) in samples.iter().enumerate() {
        let (p, l) = (s.linear, s.angular);
        csv.push_str(&format!(
            "{i},{},{},{},{},{},{},{}\n",
            p.x, p.y, p.z, l.x, l.y, l.z, s.kinetic
        ));
    }
    std::fs::write(&a.out, csv).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?)
}

fn teleop_serve(a: TeleopArgs, overrides: &[String]) -> Result<()> {
    use metasim_teleop::{bind, resolve_port, serve, ServerOptions, SessionOptions, TeleopSession};
    let cfg = scenario(&a.scenario, overrides)?;
    let env = Env::launch(&cfg, 1, a.backend)?;
    let session = TeleopSession::new(
        env,
        SessionOptions {
            rate: a.rate,
            speed: a.speed,
            ..Default::default()
        },
    )?;
    let port = resolve_port(a.port);
    let rec = runtime()?.block_on(async {
        let (listener, addr) = bind(port).await?;
        eprintln!("listening on ws://{addr}/teleop");
        let opts = ServerOptions {
            static_dir: a.static_dir,
            record: a.record,
        };
        anyhow::Ok(serve(listener, session, opts).await?)
    })?;
    println!(
        "recorded {} actions, success: {}",
        rec.actions.len(),
        rec.success.unwrap_or(false)
    );
    Ok(())
}

fn teleop_keys(a: KeysArgs) -> Result<()> {
    use metasim_teleop::{keys_from_bytes, KeyboardDriver, ServerMessage, TeleopClient};
    use tokio::io::AsyncReadExt;
    runtime()?.block_on(async {
        let mut client = TeleopClient::connect(&a.addr, a.token.as_deref()).await?;
        eprintln!(
            "session {} (arrows, e/d, q/w a/s z/x, g toggles the gripper, Ctrl-D ends)",
            client.token
        );
        let mut driver = KeyboardDriver::new(metasim::math::Quat::identity());
        let start = std::time::Instant::now();
        let mut stdin = tokio::io::stdin();
        let mut buf = [0u8; 64];
        loop {
            let n = stdin.read(&mut buf).await?;
            if n == 0 {
                break;
            }
            let keys = keys_from_bytes(&buf[..n]);
            if keys.is_empty() {
                continue;
            }
            let cmd = driver.command(&keys, start.elapsed().as_millis() as u64);
            client.send(&cmd).await?;
            if let Some(ServerMessage::Err { message, .. }) = client.recv().await? {
                eprintln!("server: {message}");
            }
        }
        client.close().await?;
        anyhow::Ok(())
    })
}

fn scripted_cmd(a: ScriptedArgs, overrides: &[String]) -> Result<()> {
    let cfg = scenario(&a.scenario, overrides)?;
    let t = scripted(&cfg, a.seed, a.index)?;
    write_demo(&a.out, &t)?;
    println!("{} actions", t.actions.len());
    Ok(())
}

fn render_cmd(a: RenderArgs, overrides: &[String]) -> Result<()> {
    let cfg = scenario(&a.scenario, overrides)?;
    let cam = match &a.camera {
        Some(n) => cfg.cameras.iter().find(|c| &c.name == n),
        None => cfg.cameras.first(),
    }
    .ok_or_else(|| anyhow!("no such camera in `{}`", cfg.name))?;
    let h = launch(&cfg, 1, a.backend)?;
    write_ppm(&a.out, &h.render(cam, 0)?)
}

fn run(cli: Cli) -> Result<()> {
    let o = &cli.overrides;
    match cli.cmd {
        Cmd::Convert(a) => convert(a),
        Cmd::Replay(a) => replay_cmd(a, o),
        Cmd::Collect(a) => collect_cmd(a, o),
        Cmd::Augment(a) => augment_cmd(a, o),
        Cmd::BenchSplit(a) => bench_split(a, o),
        Cmd::Retarget(a) => retarget_cmd(a),
        Cmd::ProbeConservation(a) => probe(a, o),
        Cmd::TeleopServe(a) => teleop_serve(a, o),
        Cmd::TeleopKeys(a) => teleop_keys(a),
        Cmd::ScriptedDemo(a) => scripted_cmd(a, o),
        Cmd::Render(a) => render_cmd(a, o),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
