//! Discrete-time trial engine: virtual path generation, waypoint following,
//! gain application, resets and per-frame logging.
//!
//! The virtual user drives the simulation. Each frame it either turns in
//! place toward the next waypoint or walks toward it; the physical user
//! replays that motion through the controller's gains. Physical position
//! changes by `virtual distance * translation_gain` along the physical
//! heading, after which the physical heading turns by
//! `curvature * virtual distance`. In-place turns are scaled by the
//! rotation gain.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{sample_state_unchecked, SystemState, UserState};
use crate::controllers::{self, ControllerKind, FrameContext, GainCommand, Phase};
use crate::environments::EnvironmentPair;
use crate::geometry::{self, wrap_angle, Point};

pub const MIN_LEG: f64 = 2.0;
pub const MAX_LEG: f64 = 6.0;
/// Minimum clearance of every virtual path segment.
pub const PATH_CLEARANCE: f64 = 0.7;
pub const MAX_PATH_REJECTIONS: usize = 10_000;
pub const FRAMES_PER_WAYPOINT: usize = 10_000;
/// Heading error that sends a walking user back into an in-place turn.
pub const ANGULAR_TOLERANCE: f64 = 0.5 * PI / 180.0;
pub const ARRIVAL_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Seconds per frame.
    pub timestep: f64,
    /// m/s.
    pub walk_speed: f64,
    /// rad/s.
    pub turn_speed: f64,
    pub user_radius: f64,
    pub collision_buffer: f64,
    /// Mixed into each path's seed when drawing the physical start.
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            timestep: 0.05,
            walk_speed: 1.0,
            turn_speed: FRAC_PI_2,
            user_radius: 0.5,
            collision_buffer: 0.2,
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    /// Physical clearance at or below which a reset is triggered.
    pub fn reset_trigger_distance(&self) -> f64 {
        self.user_radius + self.collision_buffer
    }

    fn validate(&self) -> Result<(), SimulationError> {
        let positive = [
            self.timestep,
            self.walk_speed,
            self.turn_speed,
            self.user_radius,
            self.collision_buffer,
        ];
        if positive.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(SimulationError::InvalidConfig(*self))
        }
    }
}

/// A virtual path: start state plus ordered waypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub start: UserState,
    pub waypoints: Vec<Point>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error(
        "path_generation_stuck: waypoint {waypoint} rejected {MAX_PATH_REJECTIONS} times in a row"
    )]
    PathGenerationStuck { waypoint: usize },
    #[error("path needs at least one waypoint")]
    EmptyPath,
    #[error(
        "trial_stalled: {frames} frames without finishing (reached waypoint {reached} of {total})"
    )]
    TrialStalled {
        frames: usize,
        reached: usize,
        total: usize,
    },
    #[error("invalid simulation config {0:?}")]
    InvalidConfig(SimConfig),
    #[error("start state not in free space: {0}")]
    BadStart(#[from] geometry::DomainError),
    #[error("malformed trial csv at line {line}: {message}")]
    Csv { line: usize, message: String },
}

impl SimulationError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::PathGenerationStuck { .. } => "path_generation_stuck",
            Self::EmptyPath => "empty_path",
            Self::TrialStalled { .. } => "trial_stalled",
            Self::InvalidConfig(_) => "invalid_config",
            Self::BadStart(_) => "bad_start",
            Self::Csv { .. } => "malformed_csv",
        }
    }
}

/// Random waypoints from the pair's virtual start: leg lengths uniform in
/// [2, 6] m and turns uniform in (-pi, pi] relative to the previous leg.
/// Candidates whose leg passes closer than 0.7 m to a virtual wall or
/// obstacle are redrawn.
pub fn generate_path(
    pair: &EnvironmentPair,
    n_waypoints: usize,
    seed: u64,
) -> Result<PathSpec, SimulationError> {
    if n_waypoints == 0 {
        return Err(SimulationError::EmptyPath);
    }
    let env = &pair.virtual_env;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut waypoints = Vec::with_capacity(n_waypoints);
    let mut here = pair.virtual_start.position;
    let mut direction = pair.virtual_start.heading;
    for index in 0..n_waypoints {
        let mut rejections = 0;
        loop {
            let length = rng.gen_range(MIN_LEG..=MAX_LEG);
            let turn = rng.gen_range(-PI..=PI);
            let heading = wrap_angle(direction + turn);
            let candidate = here + Point::from_angle(heading) * length;
            let ok = geometry::point_in_free_space(env, candidate)
                && geometry::segment_clearance(env, here, candidate)
                    .is_ok_and(|c| c >= PATH_CLEARANCE);
            if ok {
                waypoints.push(candidate);
                here = candidate;
                direction = heading;
                break;
            }
            rejections += 1;
            if rejections >= MAX_PATH_REJECTIONS {
                return Err(SimulationError::PathGenerationStuck { waypoint: index });
            }
        }
    }
    Ok(PathSpec {
        start: pair.virtual_start,
        waypoints,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FramePhase {
    Rotating,
    Translating,
    Resetting,
}

/// State after one frame's motion, with the gains applied during it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub time: f64,
    pub physical: UserState,
    pub virtual_state: UserState,
    pub gains: GainCommand,
    pub phase: FramePhase,
    pub alignment: f64,
    /// Physical distance covered during this frame.
    pub physical_step: f64,
}

impl Frame {
    pub fn resetting(&self) -> bool {
        self.phase == FramePhase::Resetting
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetEvent {
    pub time: f64,
    pub position: Point,
    /// Physical clearance at the trigger.
    pub clearance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub controller: ControllerKind,
    pub path: PathSpec,
    pub physical_start: UserState,
    pub timestep: f64,
    pub frames: Vec<Frame>,
    pub resets: Vec<ResetEvent>,
}

/// Seed for the physical start of a path; shared by every controller.
pub fn physical_start_seed(path_seed: u64, config: &SimConfig) -> u64 {
    path_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ config.rng_seed
}

struct ActiveReset {
    target: f64,
    sign: f64,
    remaining: f64,
    /// Virtual radians per physical radian.
    virtual_ratio: f64,
    virtual_heading: f64,
}

fn state(phys: UserState, virt: UserState) -> SystemState {
    SystemState::new(phys, virt)
}

/// Run one path under one controller.
pub fn run_trial(
    pair: &EnvironmentPair,
    path: &PathSpec,
    kind: ControllerKind,
    config: &SimConfig,
) -> Result<TrialRecord, SimulationError> {
    config.validate()?;
    if path.waypoints.is_empty() {
        return Err(SimulationError::EmptyPath);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(physical_start_seed(path.seed, config));
    let physical_start = pair.physical_start_state(&mut rng);
    geometry::check_free_space(&pair.physical, physical_start.position)?;
    geometry::check_free_space(&pair.virtual_env, path.start.position)?;

    let dt = config.timestep;
    let trigger = config.reset_trigger_distance();
    let mut phys = physical_start;
    let mut virt = path.start;
    let mut previous_state = state(phys, virt);
    let mut previous_gains = GainCommand::IDENTITY;
    let mut clearance = geometry::clearance_unchecked(&pair.physical, phys.position);
    let mut active: Option<ActiveReset> = None;
    let mut next = 0usize;
    let mut turning = true;
    let mut frames = Vec::new();
    let mut resets = Vec::new();
    let budget = path.waypoints.len() * FRAMES_PER_WAYPOINT;

    for k in 1..=budget {
        let time = k as f64 * dt;
        let current = state(phys, virt);

        if let Some(r) = active.as_mut() {
            let step = (config.turn_speed * dt).min(r.remaining);
            r.remaining -= step;
            if r.remaining <= 1e-12 {
                phys.heading = wrap_angle(r.target);
                virt.heading = r.virtual_heading;
                active = None;
            } else {
                phys.heading = wrap_angle(phys.heading + r.sign * step);
                virt.heading = wrap_angle(virt.heading + step * r.virtual_ratio);
            }
            previous_state = current;
            previous_gains = GainCommand::IDENTITY;
            frames.push(frame(
                pair,
                time,
                phys,
                virt,
                GainCommand::IDENTITY,
                FramePhase::Resetting,
                0.0,
            ));
            continue;
        }

        let target = path.waypoints[next];
        let error = wrap_angle((target - virt.position).angle() - virt.heading);
        if !turning && error.abs() > ANGULAR_TOLERANCE {
            turning = true;
        }
        if turning && error == 0.0 {
            turning = false;
        }

        if turning {
            let max_turn = config.turn_speed * dt;
            let turn = error.clamp(-max_turn, max_turn);
            if turn == error {
                turning = false;
            }
            let ctx = FrameContext {
                pair,
                state: &current,
                previous_state: &previous_state,
                previous: previous_gains,
                phase: Phase::Rotating {
                    sign: turn.signum(),
                },
            };
            let gains = controllers::step(kind, &ctx);
            virt.heading = wrap_angle(virt.heading + turn);
            phys.heading = wrap_angle(phys.heading + turn * gains.rotation_gain);
            previous_state = current;
            previous_gains = gains;
            frames.push(frame(
                pair,
                time,
                phys,
                virt,
                gains,
                FramePhase::Rotating,
                0.0,
            ));
            continue;
        }

        let ctx = FrameContext {
            pair,
            state: &current,
            previous_state: &previous_state,
            previous: previous_gains,
            phase: Phase::Translating,
        };
        let gains = controllers::step(kind, &ctx);
        let remaining = target.distance(virt.position);
        let virtual_step = (config.walk_speed * dt).min(remaining);
        virt.position = virt.position + virt.forward() * virtual_step;
        let physical_step = virtual_step * gains.translation_gain;
        phys.position = phys.position + phys.forward() * physical_step;
        phys.heading = wrap_angle(phys.heading + gains.curvature * virtual_step);
        previous_state = current;
        previous_gains = gains;
        frames.push(frame(
            pair,
            time,
            phys,
            virt,
            gains,
            FramePhase::Translating,
            physical_step,
        ));

        if target.distance(virt.position) < ARRIVAL_TOLERANCE {
            next += 1;
            turning = true;
            if next == path.waypoints.len() {
                return Ok(TrialRecord {
                    controller: kind,
                    path: path.clone(),
                    physical_start,
                    timestep: dt,
                    frames,
                    resets,
                });
            }
        }

        let (nearest, new_clearance) = geometry::nearest_edge_point(&pair.physical, phys.position);
        let approaching = new_clearance < clearance;
        clearance = new_clearance;
        if new_clearance <= trigger && approaching {
            let normal = phys.position - nearest;
            let normal = normal * (1.0 / normal.norm());
            let sys = state(phys, virt);
            let cmd = controllers::reset(kind, &sys, pair, normal);
            let sweep = cmd.physical_sweep(phys.heading);
            resets.push(ResetEvent {
                time,
                position: phys.position,
                clearance: new_clearance,
            });
            active = Some(ActiveReset {
                target: cmd.target_physical_heading,
                sign: cmd.turn_direction.sign(),
                remaining: sweep,
                virtual_ratio: cmd.virtual_turn_total / sweep,
                virtual_heading: virt.heading,
            });
        }
    }
    Err(SimulationError::TrialStalled {
        frames: budget,
        reached: next,
        total: path.waypoints.len(),
    })
}

fn frame(
    pair: &EnvironmentPair,
    time: f64,
    physical: UserState,
    virtual_state: UserState,
    gains: GainCommand,
    phase: FramePhase,
    physical_step: f64,
) -> Frame {
    let p = sample_state_unchecked(&pair.physical, &physical);
    let v = sample_state_unchecked(&pair.virtual_env, &virtual_state);
    Frame {
        time,
        physical,
        virtual_state,
        gains,
        phase,
        alignment: p.dist(&v),
        physical_step,
    }
}

// ---------------------------------------------------------------------------
// CSV

pub const TRIAL_CSV_HEADER: &str = "time_s,phys_x,phys_y,phys_heading_rad,virt_x,virt_y,virt_heading_rad,g_t,curvature_rad_per_m,g_r,alignment_m,resetting";

impl TrialRecord {
    /// One row per frame, fixed to six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.frames.len() * 110);
        out.push_str(TRIAL_CSV_HEADER);
        out.push('\n');
        for f in &self.frames {
            let _ = writeln!(
                out,
                "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                f.time,
                f.physical.position.x,
                f.physical.position.y,
                f.physical.heading,
                f.virtual_state.position.x,
                f.virtual_state.position.y,
                f.virtual_state.heading,
                f.gains.translation_gain,
                f.gains.curvature,
                f.gains.rotation_gain,
                f.alignment,
                u8::from(f.resetting()),
            );
        }
        out
    }

    /// Total physical distance walked.
    pub fn physical_distance(&self) -> f64 {
        self.frames.iter().map(|f| f.physical_step).sum()
    }
}

/// Frames recovered from a trial CSV.
///
/// Reset rows are flagged in the file, rows where the virtual user moved
/// are walking and the rest are in-place turns. The first row is taken to
/// start where it ends, which holds unless the trial opens with a step.
/// Physical steps come from consecutive positions, so they carry the
/// file's six-decimal rounding. A reset event starts at every run of
/// flagged rows.
pub fn frames_from_csv(text: &str) -> Result<(Vec<Frame>, Vec<ResetEvent>), SimulationError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == TRIAL_CSV_HEADER => {}
        _ => {
            return Err(SimulationError::Csv {
                line: 1,
                message: "missing or unexpected header".into(),
            })
        }
    }
    let mut frames: Vec<Frame> = Vec::new();
    let mut resets = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 12 {
            return Err(SimulationError::Csv {
                line: i + 1,
                message: format!("expected 12 columns, found {}", cols.len()),
            });
        }
        let num = |j: usize| -> Result<f64, SimulationError> {
            cols[j]
                .trim()
                .parse::<f64>()
                .map_err(|e| SimulationError::Csv {
                    line: i + 1,
                    message: format!("column {j}: {e}"),
                })
        };
        let physical = UserState::new(Point::new(num(1)?, num(2)?), num(3)?);
        let virtual_state = UserState::new(Point::new(num(4)?, num(5)?), num(6)?);
        let resetting = num(11)? != 0.0;
        let (last_physical, last_virtual) = frames
            .last()
            .map_or((physical.position, virtual_state.position), |f| {
                (f.physical.position, f.virtual_state.position)
            });
        let phase = if resetting {
            FramePhase::Resetting
        } else if virtual_state.position != last_virtual {
            FramePhase::Translating
        } else {
            FramePhase::Rotating
        };
        if resetting && frames.last().is_none_or(|f| !f.resetting()) {
            resets.push(ResetEvent {
                time: frames.last().map_or(0.0, |f| f.time),
                position: last_physical,
                clearance: f64::NAN,
            });
        }
        frames.push(Frame {
            time: num(0)?,
            physical,
            virtual_state,
            gains: GainCommand {
                translation_gain: num(7)?,
                curvature: num(8)?,
                rotation_gain: num(9)?,
            },
            phase,
            alignment: num(10)?,
            physical_step: physical.position.distance(last_physical),
        });
    }
    Ok((frames, resets))
}

/// Path waypoints as CSV (`index,x,y`).
pub fn path_to_csv(path: &PathSpec) -> String {
    let mut out = String::from("index,x,y\n");
    let _ = writeln!(
        out,
        "start,{:.6},{:.6}",
        path.start.position.x, path.start.position.y
    );
    for (i, w) in path.waypoints.iter().enumerate() {
        let _ = writeln!(out, "{i},{:.6},{:.6}", w.x, w.y);
    }
    out
}
