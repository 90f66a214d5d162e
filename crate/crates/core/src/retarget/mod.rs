//! End-effector based transfer of joint trajectories between gripper robots,
//! on top of damped-least-squares inverse kinematics.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::assets::{load_ref, AssetError, CanonicalAsset};
use crate::backends::{BackendError, KinematicModel};
use crate::config::RobotConfig;
use crate::math::{geodesic_angle, log_rotation, Pose, Vec3};
use crate::state::{Action, EntityState, Trajectory};

#[derive(Debug, thiserror::Error)]
pub enum RetargetError {
    #[error("no IK convergence after {iterations} iterations (position residual {pos_err:.6} m, rotation residual {rot_err:.6} rad)")]
    NoConvergence {
        iterations: usize,
        pos_err: f64,
        rot_err: f64,
    },
    #[error("frame `{0}` is not a body of the asset")]
    UnknownFrame(String),
    #[error("gripper joint `{0}` is not an actuated joint of the asset")]
    UnknownGripperJoint(String),
    #[error("target is not finite")]
    NonFiniteTarget,
    #[error("waypoint {index} rejected: {source}")]
    Waypoint {
        index: usize,
        #[source]
        source: Box<RetargetError>,
    },
    #[error("trajectory has no entry for robot `{0}`")]
    MissingRobot(String),
    #[error(transparent)]
    Kinematics(#[from] BackendError),
    #[error(transparent)]
    Asset(#[from] AssetError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum IkMode {
    #[default]
    Full,
    /// Ignore orientation; for arms with fewer than six coordinates.
    PositionOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IkOptions {
    pub max_iters: usize,
    pub pos_tol: f64,
    pub rot_tol: f64,
    pub damping: f64,
    /// Largest change of any coordinate in one iteration.
    pub max_step: f64,
    pub mode: IkMode,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            pos_tol: 1e-3,
            rot_tol: 1e-2,
            damping: 0.05,
            max_step: 0.5,
            mode: IkMode::Full,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IkSolution {
    pub q: Vec<f64>,
    pub iterations: usize,
    pub pos_err: f64,
    pub rot_err: f64,
}

/// Pose error as (translation; rotation vector), both in the world frame.
fn pose_error(current: &Pose, target: &Pose) -> (Vec3, Vec3) {
    (
        target.pos - current.pos,
        log_rotation(&(target.rot * current.rot.inverse())),
    )
}

/// Reusable IK for one frame of one asset.
#[derive(Clone, Debug)]
pub struct IkSolver {
    kin: KinematicModel,
    ee: usize,
}

impl IkSolver {
    pub fn new(asset: &CanonicalAsset, ee_frame: &str) -> Result<Self, RetargetError> {
        let kin = KinematicModel::new(asset);
        let ee = kin
            .body_index(ee_frame)
            .ok_or_else(|| RetargetError::UnknownFrame(ee_frame.to_string()))?;
        Ok(Self { kin, ee })
    }

    pub fn kinematics(&self) -> &KinematicModel {
        &self.kin
    }

    pub fn fk(&self, base: &Pose, q: &[f64]) -> Result<Pose, RetargetError> {
        Ok(self.kin.fk(base, q)?[self.ee])
    }

    pub fn jacobian(&self, base: &Pose, q: &[f64]) -> Result<DMatrix<f64>, RetargetError> {
        Ok(self.kin.jacobian(base, q, self.ee)?)
    }

    /// Damped least squares from `q0`, clamping to joint limits after every
    /// update. Returns the first iterate inside both tolerances.
    pub fn solve(
        &self,
        base: &Pose,
        target: &Pose,
        q0: &[f64],
        opts: &IkOptions,
    ) -> Result<IkSolution, RetargetError> {
        if !target.is_finite() {
            return Err(RetargetError::NonFiniteTarget);
        }
        let mut q = q0.to_vec();
        self.kin.fk(base, &q)?;
        let rows = match opts.mode {
            IkMode::Full => 6,
            IkMode::PositionOnly => 3,
        };
        let lambda2 = opts.damping * opts.damping;
        let mut it = 0;
        loop {
            let poses = self.kin.fk(base, &q)?;
            let (ep, er) = pose_error(&poses[self.ee], target);
            let pos_err = ep.norm();
            let rot_err = match opts.mode {
                IkMode::Full => geodesic_angle(&poses[self.ee].rot, &target.rot),
                IkMode::PositionOnly => 0.0,
            };
            if pos_err < opts.pos_tol && rot_err < opts.rot_tol {
                return Ok(IkSolution {
                    q,
                    iterations: it,
                    pos_err,
                    rot_err,
                });
            }
            if it >= opts.max_iters {
                return Err(RetargetError::NoConvergence {
                    iterations: it,
                    pos_err,
                    rot_err,
                });
            }
            let jac = self
                .kin
                .jacobian_from(&poses, self.ee)
                .rows(0, rows)
                .into_owned();
            let e = DVector::from_iterator(rows, ep.iter().chain(er.iter()).copied().take(rows));
            let mut a = &jac * jac.transpose();
            for k in 0..rows {
                a[(k, k)] += lambda2;
            }
            let Some(y) = a.cholesky().map(|c| c.solve(&e)) else {
                return Err(RetargetError::NoConvergence {
                    iterations: it,
                    pos_err,
                    rot_err,
                });
            };
            let mut dq = jac.transpose() * y;
            let biggest = dq.amax();
            if biggest > opts.max_step {
                dq *= opts.max_step / biggest;
            }
            for (x, d) in q.iter_mut().zip(dq.iter()) {
                *x += d;
            }
            q = self.kin.clamp(&q);
            it += 1;
        }
    }
}

/// IK with the asset root at the origin.
pub fn ik_solve(
    asset: &CanonicalAsset,
    ee_frame: &str,
    target: &Pose,
    q0: &[f64],
    opts: &IkOptions,
) -> Result<IkSolution, RetargetError> {
    IkSolver::new(asset, ee_frame)?.solve(&Pose::identity(), target, q0, opts)
}

/// A gripper robot as retargeting sees it.
#[derive(Clone, Debug)]
pub struct Embodiment {
    pub name: String,
    pub base: Pose,
    pub default_dof: Vec<f64>,
    pub solver: IkSolver,
    pub gripper_dofs: Vec<usize>,
}

impl Embodiment {
    pub fn new(
        name: &str,
        asset: &CanonicalAsset,
        ee_frame: &str,
        gripper_joints: &[String],
        base: Pose,
        default_dof: Vec<f64>,
    ) -> Result<Self, RetargetError> {
        let solver = IkSolver::new(asset, ee_frame)?;
        let gripper_dofs = gripper_joints
            .iter()
            .map(|j| {
                asset
                    .dof_index(j)
                    .ok_or_else(|| RetargetError::UnknownGripperJoint(j.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let default_dof = if default_dof.is_empty() {
            vec![0.0; asset.dof_count()]
        } else {
            default_dof
        };
        Ok(Self {
            name: name.to_string(),
            base,
            default_dof,
            solver,
            gripper_dofs,
        })
    }

    pub fn from_config(
        robot: &RobotConfig,
        base_dir: Option<&Path>,
    ) -> Result<Self, RetargetError> {
        let asset = load_ref(&robot.asset, base_dir)?.asset;
        Self::new(
            &robot.name,
            &asset,
            &robot.ee_frame,
            &robot.gripper_joints,
            robot.base_pose,
            robot.default_dof_pos.clone(),
        )
    }

    pub fn dof_count(&self) -> usize {
        self.solver.kin.dof_count()
    }

    pub fn ee_pose(&self, q: &[f64]) -> Result<Pose, RetargetError> {
        self.solver.fk(&self.base, q)
    }

    /// Mean normalized opening of the gripper coordinates; 1 when the robot
    /// has no gripper.
    pub fn gripper_open(&self, q: &[f64]) -> f64 {
        if self.gripper_dofs.is_empty() {
            return 1.0;
        }
        let limits = &self.solver.kin.dof_limits;
        let sum: f64 = self
            .gripper_dofs
            .iter()
            .map(|&d| {
                let [lo, hi] = limits[d];
                if hi > lo {
                    ((q[d] - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    1.0
                }
            })
            .sum();
        sum / self.gripper_dofs.len() as f64
    }

    /// Places every gripper coordinate at `lo + f (hi - lo)`.
    pub fn set_gripper(&self, q: &mut [f64], open: f64) {
        let f = open.clamp(0.0, 1.0);
        for &d in &self.gripper_dofs {
            let [lo, hi] = self.solver.kin.dof_limits[d];
            q[d] = lo + f * (hi - lo);
        }
    }

    /// IK for the end-effector pose, keeping the gripper coordinates of `seed`.
    pub fn solve(
        &self,
        target: &Pose,
        seed: &[f64],
        opts: &IkOptions,
    ) -> Result<IkSolution, RetargetError> {
        self.solver.solve(&self.base, target, seed, opts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Waypoint {
    pub pose: Pose,
    pub gripper_open: f64,
}

pub type EePath = Vec<Waypoint>;

/// End-effector pose of the commanded joint targets, one per action.
pub fn ee_path_from_trajectory(
    traj: &Trajectory,
    robot: &Embodiment,
) -> Result<EePath, RetargetError> {
    traj.actions
        .iter()
        .map(|a| {
            let q = a
                .targets
                .get(&robot.name)
                .ok_or_else(|| RetargetError::MissingRobot(robot.name.clone()))?;
            Ok(Waypoint {
                pose: robot.ee_pose(q)?,
                gripper_open: robot.gripper_open(q),
            })
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct RetargetOptions {
    pub ik: IkOptions,
    /// Name the output trajectory is recorded against; the source name
    /// when `None`.
    pub scenario_name: Option<String>,
}

/// Converts a trajectory of `src` into one for `dst`: every waypoint of the
/// source end-effector path is solved on `dst`, warm-started from the
/// previous solution, with gripper openings mapped linearly.
pub fn retarget_trajectory(
    src: &Trajectory,
    src_robot: &Embodiment,
    dst_robot: &Embodiment,
    opts: &RetargetOptions,
) -> Result<Trajectory, RetargetError> {
    let init = src
        .init_state
        .get(&src_robot.name)
        .ok_or_else(|| RetargetError::MissingRobot(src_robot.name.clone()))?;
    let src_q0 = init
        .dof_pos
        .clone()
        .unwrap_or_else(|| src_robot.default_dof.clone());
    let path = ee_path_from_trajectory(src, src_robot)?;

    let solve =
        |pose: &Pose, open: f64, seed: &[f64], index: usize| -> Result<Vec<f64>, RetargetError> {
            let mut q = dst_robot
                .solve(pose, seed, &opts.ik)
                .map_err(|e| RetargetError::Waypoint {
                    index,
                    source: Box::new(e),
                })?
                .q;
            dst_robot.set_gripper(&mut q, open);
            Ok(q)
        };

    // The starting configuration reproduces the source's initial EE pose.
    let q_init = solve(
        &src_robot.ee_pose(&src_q0)?,
        src_robot.gripper_open(&src_q0),
        &dst_robot.default_dof,
        0,
    )?;
    let mut actions = Vec::with_capacity(path.len());
    let mut seed = q_init.clone();
    for (i, w) in path.iter().enumerate() {
        let q = solve(&w.pose, w.gripper_open, &seed, i)?;
        actions.push(Action::for_robot(&dst_robot.name, q.clone()));
        seed = q;
    }

    let mut init_state = src.init_state.clone();
    init_state.remove(&src_robot.name);
    let n = dst_robot.dof_count();
    init_state.insert(
        dst_robot.name.clone(),
        EntityState {
            pos: Some(dst_robot.base.pos),
            rot: Some(dst_robot.base.rot),
            lin_vel: Some(Vec3::zeros()),
            ang_vel: Some(Vec3::zeros()),
            dof_pos: Some(q_init.clone()),
            dof_vel: Some(vec![0.0; n]),
            dof_target: Some(q_init),
        },
    );
    let mut extras = src.extras.clone();
    extras.insert("retargeted_from".into(), src_robot.name.clone());
    Ok(Trajectory {
        scenario_name: opts
            .scenario_name
            .clone()
            .unwrap_or_else(|| src.scenario_name.clone()),
        init_state,
        actions,
        states: None,
        success: None,
        extras,
    })
}
