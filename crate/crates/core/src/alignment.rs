//! User states, proximity sampling and the alignment score between the
//! physical and the virtual user.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use crate::environments::{Environment, EnvironmentPair};
use crate::geometry::{self, DomainError, Point, Ray};

/// Position and heading of the user in one world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub position: Point,
    /// Radians, counterclockwise from +x.
    pub heading: f64,
}

impl UserState {
    pub const fn new(position: Point, heading: f64) -> Self {
        Self { position, heading }
    }

    pub fn forward(&self) -> Point {
        Point::from_angle(self.heading)
    }
}

/// Wall distances straight ahead, to the left (+90 deg) and to the right
/// (-90 deg) of a user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProximityTriple {
    pub forward: f64,
    pub left: f64,
    pub right: f64,
}

impl ProximityTriple {
    /// Sum of absolute componentwise differences.
    pub fn dist(&self, other: &ProximityTriple) -> f64 {
        (self.forward - other.forward).abs()
            + (self.left - other.left).abs()
            + (self.right - other.right).abs()
    }
}

/// The physical and virtual user at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub physical: UserState,
    pub virtual_state: UserState,
}

impl SystemState {
    pub const fn new(physical: UserState, virtual_state: UserState) -> Self {
        Self {
            physical,
            virtual_state,
        }
    }
}

pub fn sample_state(env: &Environment, u: &UserState) -> Result<ProximityTriple, DomainError> {
    geometry::check_free_space(env, u.position)?;
    Ok(sample_state_unchecked(env, u))
}

pub(crate) fn sample_state_unchecked(env: &Environment, u: &UserState) -> ProximityTriple {
    let cast = |theta: f64| geometry::cast(env, &Ray::new(u.position, theta));
    ProximityTriple {
        forward: cast(u.heading),
        left: cast(u.heading + FRAC_PI_2),
        right: cast(u.heading - FRAC_PI_2),
    }
}

/// Both proximity triples of a system state, physical first.
pub fn sample_system(
    pair: &EnvironmentPair,
    s: &SystemState,
) -> Result<(ProximityTriple, ProximityTriple), DomainError> {
    Ok((
        sample_state(&pair.physical, &s.physical)?,
        sample_state(&pair.virtual_env, &s.virtual_state)?,
    ))
}

/// Alignment score in meters; zero when the local surroundings match.
pub fn alignment_score(pair: &EnvironmentPair, s: &SystemState) -> Result<f64, DomainError> {
    let (phys, virt) = sample_system(pair, s)?;
    Ok(phys.dist(&virt))
}

/// Proximity sum over `k` equally spaced absolute directions starting at 0.
pub fn proximity(env: &Environment, p: Point, k: usize) -> Result<f64, DomainError> {
    Ok(proximity_profile(env, p, k)?.iter().sum())
}

fn proximity_profile(env: &Environment, p: Point, k: usize) -> Result<Vec<f64>, DomainError> {
    geometry::check_free_space(env, p)?;
    Ok((0..k)
        .map(|i| geometry::cast(env, &Ray::new(p, TAU * i as f64 / k as f64)))
        .collect())
}

/// Sum over `k` shared directions of the absolute distance differences
/// between a physical and a virtual point.
pub fn proximity_dist(
    physical: &Environment,
    p_phys: Point,
    virtual_env: &Environment,
    p_virt: Point,
    k: usize,
) -> Result<f64, DomainError> {
    let a = proximity_profile(physical, p_phys, k)?;
    let b = proximity_profile(virtual_env, p_virt, k)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{builtin_pair, BuiltinPair};

    const NORTH: f64 = FRAC_PI_2;

    fn close(t: ProximityTriple, f: f64, l: f64, r: f64) {
        assert!((t.forward - f).abs() < 1e-9, "{t:?}");
        assert!((t.left - l).abs() < 1e-9, "{t:?}");
        assert!((t.right - r).abs() < 1e-9, "{t:?}");
    }

    #[test]
    fn triples_in_builtin_rooms() {
        let a = builtin_pair(BuiltinPair::A).physical;
        close(
            sample_state(&a, &UserState::new(Point::new(0.0, 0.0), NORTH)).unwrap(),
            5.0,
            5.0,
            5.0,
        );
        close(
            sample_state(&a, &UserState::new(Point::new(1.0, 0.0), NORTH)).unwrap(),
            5.0,
            6.0,
            4.0,
        );
        // Left ray meets the east edge of the south-west block at x = -2.5.
        let c = builtin_pair(BuiltinPair::C).physical;
        close(
            sample_state(&c, &UserState::new(Point::new(0.0, -3.0), NORTH)).unwrap(),
            2.0,
            2.5,
            5.0,
        );
    }

    #[test]
    fn alignment_examples() {
        let pair = builtin_pair(BuiltinPair::A);
        let origin = UserState::new(Point::new(0.0, 0.0), NORTH);
        assert_eq!(
            alignment_score(&pair, &SystemState::new(origin, origin)).unwrap(),
            0.0
        );
        let shifted = UserState::new(Point::new(1.0, 0.0), NORTH);
        let s = alignment_score(&pair, &SystemState::new(origin, shifted)).unwrap();
        assert!((s - 2.0).abs() < 1e-9);
        let east = UserState::new(Point::new(0.0, 0.0), 0.0);
        let s = alignment_score(&pair, &SystemState::new(origin, east)).unwrap();
        assert!(s.abs() < 1e-9);
    }

    #[test]
    fn proximity_sum_in_square() {
        let a = builtin_pair(BuiltinPair::A).physical;
        let p = proximity(&a, Point::new(0.0, 0.0), 4).unwrap();
        assert!((p - 20.0).abs() < 1e-9);
        let d = proximity_dist(&a, Point::new(0.0, 0.0), &a, Point::new(1.0, 0.0), 4).unwrap();
        assert!((d - 2.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_state_propagates() {
        let a = builtin_pair(BuiltinPair::A).physical;
        assert!(sample_state(&a, &UserState::new(Point::new(9.0, 0.0), 0.0)).is_err());
    }
}
