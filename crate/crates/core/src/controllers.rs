//! Per-frame steering: the alignment-based controller (ARC), steer-to-center
//! (S2C) and the artificial potential field controller (APF), together with
//! each controller's reset policy.
//!
//! Curvature is expressed as radians of physical heading change per meter
//! of virtual forward travel; positive values steer the user to the left.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alignment::{sample_state_unchecked, ProximityTriple, SystemState};
use crate::environments::{Environment, EnvironmentPair};
use crate::geometry::{self, wrap_angle, Point, Ray};

pub const MIN_TRANSLATION_GAIN: f64 = 0.86;
pub const MAX_TRANSLATION_GAIN: f64 = 1.26;
/// Radius of the tightest allowed physical curve, in meters.
pub const MIN_CURVATURE_RADIUS: f64 = 7.5;
pub const MAX_CURVATURE: f64 = 1.0 / MIN_CURVATURE_RADIUS;
pub const MIN_ROTATION_GAIN: f64 = 0.67;
pub const MAX_ROTATION_GAIN: f64 = 1.24;
/// Weight on the previous frame's gain when smoothing.
pub const SMOOTHING_WEIGHT: f64 = 0.125;
/// Number of candidate headings the ARC reset considers.
pub const RESET_DIRECTIONS: usize = 20;
/// Alignment scores below this count as perfect alignment.
pub const ALIGNED_EPS: f64 = 1e-9;

/// S2C: bearing errors above this switch to a temporary target.
const S2C_TEMP_TARGET_THRESHOLD: f64 = 160.0 * PI / 180.0;
const S2C_TEMP_TARGET_OFFSET: f64 = PI / 2.0;
/// S2C: bearing error at which curvature reaches its maximum.
const S2C_RAMP: f64 = 45.0 * PI / 180.0;
/// Minimum dot product for a heading to count as facing away from an obstacle.
const AWAY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainCommand {
    /// Physical distance per unit of virtual distance.
    pub translation_gain: f64,
    /// Signed rad/m; positive steers left.
    pub curvature: f64,
    /// Physical rotation per unit of virtual rotation.
    pub rotation_gain: f64,
}

impl GainCommand {
    pub const IDENTITY: GainCommand = GainCommand {
        translation_gain: 1.0,
        curvature: 0.0,
        rotation_gain: 1.0,
    };

    pub fn within_bounds(&self) -> bool {
        (MIN_TRANSLATION_GAIN..=MAX_TRANSLATION_GAIN).contains(&self.translation_gain)
            && self.curvature.abs() <= MAX_CURVATURE
            && (MIN_ROTATION_GAIN..=MAX_ROTATION_GAIN).contains(&self.rotation_gain)
    }

    /// True if any gain departs from the identity.
    pub fn is_redirecting(&self) -> bool {
        self.translation_gain != 1.0 || self.curvature != 0.0 || self.rotation_gain != 1.0
    }

    /// Clamp every component into its allowed range.
    pub fn clamped(self) -> Self {
        Self {
            translation_gain: self
                .translation_gain
                .clamp(MIN_TRANSLATION_GAIN, MAX_TRANSLATION_GAIN),
            curvature: self.curvature.clamp(-MAX_CURVATURE, MAX_CURVATURE),
            rotation_gain: self
                .rotation_gain
                .clamp(MIN_ROTATION_GAIN, MAX_ROTATION_GAIN),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TurnDirection {
    Clockwise,
    CounterClockwise,
}

impl TurnDirection {
    pub fn sign(self) -> f64 {
        match self {
            Self::Clockwise => -1.0,
            Self::CounterClockwise => 1.0,
        }
    }
}

/// Reorientation issued when the physical user gets too close to an obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetCommand {
    pub target_physical_heading: f64,
    pub turn_direction: TurnDirection,
    /// Total virtual rotation during the reset; always a full turn.
    pub virtual_turn_total: f64,
}

impl ResetCommand {
    /// Turn toward `target` along the larger of the two arcs from `current`.
    pub fn new(current: f64, target: f64) -> Self {
        let delta = wrap_angle(target - current);
        // delta lies in (-pi, pi]; exactly opposite targets turn clockwise
        // and a zero delta takes a full counterclockwise turn.
        let turn_direction = if delta > 0.0 {
            TurnDirection::Clockwise
        } else {
            TurnDirection::CounterClockwise
        };
        Self {
            target_physical_heading: target,
            turn_direction,
            virtual_turn_total: TAU,
        }
    }

    /// Physical rotation magnitude from `current` to the target in the
    /// commanded direction, in `(0, 2*pi]`.
    pub fn physical_sweep(&self, current: f64) -> f64 {
        let delta = (self.target_physical_heading - current) * self.turn_direction.sign();
        let sweep = delta.rem_euclid(TAU);
        if sweep < 1e-12 {
            TAU
        } else {
            sweep
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ControllerKind {
    #[serde(rename = "arc")]
    Arc,
    #[serde(rename = "s2c")]
    S2c,
    #[serde(rename = "apf")]
    Apf,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [
        ControllerKind::Arc,
        ControllerKind::S2c,
        ControllerKind::Apf,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Arc => "ARC",
            Self::S2c => "S2C",
            Self::Apf => "APF",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Self::Arc => "arc",
            Self::S2c => "s2c",
            Self::Apf => "apf",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "arc" => Ok(Self::Arc),
            "s2c" => Ok(Self::S2c),
            "apf" => Ok(Self::Apf),
            other => Err(format!(
                "unknown controller '{other}' (expected arc, s2c or apf)"
            )),
        }
    }
}

/// What the virtual user is doing this frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    Translating,
    /// Turning in place; `sign` is +1 for counterclockwise, -1 for clockwise.
    Rotating {
        sign: f64,
    },
}

/// Everything a controller may look at when choosing gains.
#[derive(Debug, Clone, Copy)]
pub struct FrameContext<'a> {
    pub pair: &'a EnvironmentPair,
    pub state: &'a SystemState,
    /// State at the previous frame (equal to `state` on the first frame).
    pub previous_state: &'a SystemState,
    /// Gains applied at the previous frame.
    pub previous: GainCommand,
    pub phase: Phase,
}

// ---------------------------------------------------------------------------
// ARC

/// Forward-distance ratio clamped to the translation gain range.
pub fn translation_gain_from(d_phys_forward: f64, d_virt_forward: f64) -> f64 {
    if d_virt_forward < 1e-6 {
        log::warn!("virtual forward distance {d_virt_forward} too small; using maximum gain");
        return MAX_TRANSLATION_GAIN;
    }
    (d_phys_forward / d_virt_forward).clamp(MIN_TRANSLATION_GAIN, MAX_TRANSLATION_GAIN)
}

/// Curvature from left/right misalignments: steer toward the side with the
/// larger positive surplus of physical space, proportionally up to 1 m.
pub fn curvature_from_misalignment(misalign_left: f64, misalign_right: f64) -> f64 {
    if misalign_left > misalign_right {
        misalign_left.clamp(0.0, 1.0) * MAX_CURVATURE
    } else if misalign_right > misalign_left {
        -misalign_right.clamp(0.0, 1.0) * MAX_CURVATURE
    } else {
        0.0
    }
}

/// Bang-bang rotation gain on the change in alignment, smoothed against
/// the previous frame's gain.
pub fn rotation_gain_from(
    previous_alignment: f64,
    current_alignment: f64,
    previous_gain: f64,
) -> f64 {
    let raw = if (previous_alignment - current_alignment).abs() <= ALIGNED_EPS {
        1.0
    } else if previous_alignment < current_alignment {
        MIN_ROTATION_GAIN
    } else {
        MAX_ROTATION_GAIN
    };
    (SMOOTHING_WEIGHT * previous_gain + (1.0 - SMOOTHING_WEIGHT) * raw)
        .clamp(MIN_ROTATION_GAIN, MAX_ROTATION_GAIN)
}

fn triples(pair: &EnvironmentPair, s: &SystemState) -> (ProximityTriple, ProximityTriple) {
    (
        sample_state_unchecked(&pair.physical, &s.physical),
        sample_state_unchecked(&pair.virtual_env, &s.virtual_state),
    )
}

pub fn arc_translation_gain(state: &SystemState, pair: &EnvironmentPair) -> f64 {
    let (p, v) = triples(pair, state);
    translation_gain_from(p.forward, v.forward)
}

pub fn arc_curvature(state: &SystemState, pair: &EnvironmentPair) -> f64 {
    let (p, v) = triples(pair, state);
    curvature_from_misalignment(p.left - v.left, p.right - v.right)
}

pub fn arc_rotation_gain(
    current: &SystemState,
    previous: &SystemState,
    previous_gain: f64,
    pair: &EnvironmentPair,
) -> f64 {
    let (cp, cv) = triples(pair, current);
    let (pp, pv) = triples(pair, previous);
    rotation_gain_from(pp.dist(&pv), cp.dist(&cv), previous_gain)
}

fn arc_step(ctx: &FrameContext<'_>) -> GainCommand {
    let (p, v) = triples(ctx.pair, ctx.state);
    let alignment = p.dist(&v);
    match ctx.phase {
        Phase::Translating if alignment < ALIGNED_EPS => GainCommand::IDENTITY,
        Phase::Translating => GainCommand {
            translation_gain: translation_gain_from(p.forward, v.forward),
            curvature: curvature_from_misalignment(p.left - v.left, p.right - v.right),
            rotation_gain: 1.0,
        },
        Phase::Rotating { .. } => {
            let (pp, pv) = triples(ctx.pair, ctx.previous_state);
            let previous_alignment = if alignment < ALIGNED_EPS {
                alignment
            } else {
                pp.dist(&pv)
            };
            GainCommand {
                rotation_gain: rotation_gain_from(
                    previous_alignment,
                    alignment,
                    ctx.previous.rotation_gain,
                ),
                ..GainCommand::IDENTITY
            }
        }
    }
}

/// The 20 candidate reset headings, `i * 18` degrees.
pub fn reset_candidates() -> impl Iterator<Item = f64> {
    (0..RESET_DIRECTIONS).map(|i| TAU * i as f64 / RESET_DIRECTIONS as f64)
}

fn faces_away(theta: f64, normal: Point) -> bool {
    Point::from_angle(theta).dot(normal) > AWAY_EPS
}

/// Choose the reset heading index from candidate distances.
///
/// Candidates must face away from the obstacle. Among those whose
/// physical distance is at least `virtual_forward`, the smallest surplus
/// wins; otherwise the smallest absolute difference wins. `None` when no
/// candidate faces away.
pub fn choose_reset_index(
    headings: &[f64],
    distances: &[f64],
    virtual_forward: f64,
    obstacle_normal: Point,
) -> Option<usize> {
    let valid: Vec<usize> = (0..headings.len())
        .filter(|&i| faces_away(headings[i], obstacle_normal))
        .collect();
    let argmin = |key: &dyn Fn(usize) -> f64, set: &mut dyn Iterator<Item = usize>| {
        set.fold(None, |best: Option<(usize, f64)>, i| {
            let k = key(i);
            match best {
                Some((_, bk)) if bk <= k => best,
                _ => Some((i, k)),
            }
        })
        .map(|(i, _)| i)
    };
    let surplus = |i: usize| distances[i] - virtual_forward;
    argmin(
        &surplus,
        &mut valid.iter().copied().filter(|&i| surplus(i) >= 0.0),
    )
    .or_else(|| argmin(&|i| surplus(i).abs(), &mut valid.iter().copied()))
}

pub fn arc_reset(
    state: &SystemState,
    pair: &EnvironmentPair,
    obstacle_normal: Point,
) -> ResetCommand {
    let p = state.physical.position;
    let headings: Vec<f64> = reset_candidates().collect();
    let distances: Vec<f64> = headings
        .iter()
        .map(|&t| geometry::cast(&pair.physical, &Ray::new(p, t)))
        .collect();
    let virtual_forward = geometry::cast(
        &pair.virtual_env,
        &Ray::new(state.virtual_state.position, state.virtual_state.heading),
    );
    let target = match choose_reset_index(&headings, &distances, virtual_forward, obstacle_normal) {
        Some(i) => headings[i],
        None => obstacle_normal.angle(),
    };
    ResetCommand::new(state.physical.heading, target)
}

// ---------------------------------------------------------------------------
// S2C

fn s2c_bearing_error(state: &SystemState, pair: &EnvironmentPair) -> Option<f64> {
    let to_center = pair.physical.center() - state.physical.position;
    if to_center.norm() < 1e-9 {
        return None;
    }
    Some(wrap_angle(to_center.angle() - state.physical.heading))
}

/// Raw (unsmoothed) S2C curvature for a bearing error to the center.
pub fn s2c_raw_curvature(bearing_error: f64) -> f64 {
    let mut beta = bearing_error;
    if beta.abs() > S2C_TEMP_TARGET_THRESHOLD {
        // Temporary target a quarter turn off the center bearing, on the
        // side nearer the current heading.
        beta -= beta.signum() * S2C_TEMP_TARGET_OFFSET;
    }
    beta.signum() * MAX_CURVATURE * (beta.abs() / S2C_RAMP).min(1.0)
}

fn turn_gain_toward(error: f64, sign: f64) -> f64 {
    if error * sign > 0.0 {
        MAX_ROTATION_GAIN
    } else {
        MIN_ROTATION_GAIN
    }
}

pub fn s2c_step(
    state: &SystemState,
    pair: &EnvironmentPair,
    phase: Phase,
    previous: GainCommand,
) -> GainCommand {
    let Some(beta) = s2c_bearing_error(state, pair) else {
        return GainCommand::IDENTITY;
    };
    match phase {
        Phase::Translating => {
            let raw = s2c_raw_curvature(beta);
            GainCommand {
                curvature: SMOOTHING_WEIGHT * previous.curvature + (1.0 - SMOOTHING_WEIGHT) * raw,
                ..GainCommand::IDENTITY
            }
        }
        Phase::Rotating { sign } => GainCommand {
            rotation_gain: turn_gain_toward(beta, sign),
            ..GainCommand::IDENTITY
        },
    }
}

// ---------------------------------------------------------------------------
// APF

/// Sum over every wall and obstacle edge of the unit vector from the edge's
/// closest point to `p`, weighted by inverse distance.
pub fn apf_force(env: &Environment, p: Point) -> Point {
    env.edges().fold(Point::default(), |acc, e| {
        let w = p - e.closest_point(p);
        let d2 = w.dot(w);
        if d2 == 0.0 {
            acc
        } else {
            acc + w * (1.0 / d2)
        }
    })
}

const APF_ZERO_FORCE: f64 = 1e-9;

pub fn apf_step(state: &SystemState, pair: &EnvironmentPair, phase: Phase) -> GainCommand {
    let force = apf_force(&pair.physical, state.physical.position);
    if force.norm() < APF_ZERO_FORCE {
        return GainCommand::IDENTITY;
    }
    let error = wrap_angle(force.angle() - state.physical.heading);
    match phase {
        Phase::Translating => GainCommand {
            curvature: if error >= 0.0 {
                MAX_CURVATURE
            } else {
                -MAX_CURVATURE
            },
            ..GainCommand::IDENTITY
        },
        Phase::Rotating { sign } => GainCommand {
            rotation_gain: turn_gain_toward(error, sign),
            ..GainCommand::IDENTITY
        },
    }
}

/// Reset-to-center for the two baselines. When the center bearing does not
/// face away from the obstacle, APF falls back to its force direction and
/// S2C (or APF without a usable force) to the obstacle normal.
pub fn baseline_reset(
    state: &SystemState,
    pair: &EnvironmentPair,
    kind: ControllerKind,
    obstacle_normal: Point,
) -> ResetCommand {
    let p = state.physical.position;
    let to_center = pair.physical.center() - p;
    let mut target = None;
    if to_center.norm() >= 1e-9 && faces_away(to_center.angle(), obstacle_normal) {
        target = Some(to_center.angle());
    }
    if target.is_none() && kind == ControllerKind::Apf {
        let force = apf_force(&pair.physical, p);
        if force.norm() >= APF_ZERO_FORCE && faces_away(force.angle(), obstacle_normal) {
            target = Some(force.angle());
        }
    }
    let target = target.unwrap_or_else(|| obstacle_normal.angle());
    ResetCommand::new(state.physical.heading, target)
}

// ---------------------------------------------------------------------------
// Dispatch

/// Gains for one frame from the selected controller, clamped to the
/// perceptual bounds.
pub fn step(kind: ControllerKind, ctx: &FrameContext<'_>) -> GainCommand {
    let cmd = raw_step(kind, ctx);
    debug_assert!(cmd.within_bounds(), "{kind} emitted {cmd:?}");
    cmd.clamped()
}

/// The controller's own output, before the bounds are re-applied.
pub fn raw_step(kind: ControllerKind, ctx: &FrameContext<'_>) -> GainCommand {
    match kind {
        ControllerKind::Arc => arc_step(ctx),
        ControllerKind::S2c => s2c_step(ctx.state, ctx.pair, ctx.phase, ctx.previous),
        ControllerKind::Apf => apf_step(ctx.state, ctx.pair, ctx.phase),
    }
}

pub fn reset(
    kind: ControllerKind,
    state: &SystemState,
    pair: &EnvironmentPair,
    obstacle_normal: Point,
) -> ResetCommand {
    match kind {
        ControllerKind::Arc => arc_reset(state, pair, obstacle_normal),
        ControllerKind::S2c | ControllerKind::Apf => {
            baseline_reset(state, pair, kind, obstacle_normal)
        }
    }
}
