//! Environment model, the three built-in benchmark pairs and a JSON loader.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::UserState;
use crate::geometry::{self, DomainError, Point, Polygon, PolygonError, Segment};

/// Minimum clearance required at every start position: user radius plus
/// the collision buffer.
pub const START_CLEARANCE: f64 = 0.7;

/// One world (physical or virtual): a boundary wall and interior obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    name: String,
    boundary: Polygon,
    obstacles: Vec<Polygon>,
    edges: Vec<Segment>,
}

impl Environment {
    /// Build an environment, checking that every obstacle lies within the
    /// boundary and that obstacle interiors do not overlap. Obstacles may
    /// touch the boundary wall.
    pub fn new(
        name: impl Into<String>,
        boundary: Polygon,
        obstacles: Vec<Polygon>,
    ) -> Result<Self, EnvironmentError> {
        Self::validated(name.into(), boundary, obstacles, "")
    }

    fn validated(
        name: String,
        boundary: Polygon,
        obstacles: Vec<Polygon>,
        path: &str,
    ) -> Result<Self, EnvironmentError> {
        for (i, obs) in obstacles.iter().enumerate() {
            let inside = obs.vertices().iter().all(|&v| boundary.contains_closed(v));
            let crosses = obs
                .edges()
                .any(|e| boundary.edges().any(|b| e.crosses_properly(&b)));
            if !inside || crosses {
                return Err(EnvironmentError::ObstacleOutsideBoundary {
                    path: format!("{path}obstacles[{i}]"),
                });
            }
        }
        for i in 0..obstacles.len() {
            for j in (i + 1)..obstacles.len() {
                if overlaps(&obstacles[i], &obstacles[j]) {
                    return Err(EnvironmentError::OverlappingObstacles {
                        path: format!("{path}obstacles[{i}]"),
                        other: format!("{path}obstacles[{j}]"),
                    });
                }
            }
        }
        let edges = boundary
            .edges()
            .chain(obstacles.iter().flat_map(|o| o.edges()))
            .collect();
        Ok(Self {
            name,
            boundary,
            obstacles,
            edges,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn boundary(&self) -> &Polygon {
        &self.boundary
    }

    pub fn obstacles(&self) -> &[Polygon] {
        &self.obstacles
    }

    /// Every wall and obstacle edge, boundary first.
    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        self.edges.iter().copied()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        self.boundary.bounding_box()
    }

    /// Center of the boundary's bounding box.
    pub fn center(&self) -> Point {
        let (lo, hi) = self.bounding_box();
        (lo + hi) * 0.5
    }

    pub fn translated(&self, by: Point) -> Self {
        let obstacles = self.obstacles.iter().map(|o| o.translated(by)).collect();
        Self::new(self.name.clone(), self.boundary.translated(by), obstacles)
            .expect("translation preserves validity")
    }

    pub fn scaled(&self, k: f64) -> Self {
        let obstacles = self.obstacles.iter().map(|o| o.scaled(k)).collect();
        Self::new(self.name.clone(), self.boundary.scaled(k), obstacles)
            .expect("uniform scaling preserves validity")
    }
}

fn overlaps(a: &Polygon, b: &Polygon) -> bool {
    let crossing = a.edges().any(|e| b.edges().any(|f| e.crosses_properly(&f)));
    crossing
        || a.vertices().iter().any(|&v| b.strictly_contains(v))
        || b.vertices().iter().any(|&v| a.strictly_contains(v))
}

/// How the physical user is placed at the start of each path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhysicalStart {
    /// Uniform rejection sampling over the physical free space.
    Random,
    Fixed(Point),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentPair {
    pub name: String,
    pub physical: Environment,
    pub virtual_env: Environment,
    pub virtual_start: UserState,
    pub physical_start: PhysicalStart,
}

impl EnvironmentPair {
    /// Check the start-state invariants.
    pub fn validate(&self) -> Result<(), EnvironmentError> {
        check_start(
            &self.virtual_env,
            self.virtual_start.position,
            "virtual_start.position",
        )?;
        if let PhysicalStart::Fixed(p) = self.physical_start {
            check_start(&self.physical, p, "physical_start.position")?;
        }
        Ok(())
    }

    /// The same pair with the physical user starting exactly where the
    /// virtual user does. Only meaningful when the start is free in both.
    pub fn with_fixed_start_at_virtual(mut self) -> Self {
        self.physical_start = PhysicalStart::Fixed(self.virtual_start.position);
        self
    }

    /// Draw the physical start state. The heading always matches the
    /// virtual start heading.
    pub fn physical_start_state<R: Rng + ?Sized>(&self, rng: &mut R) -> UserState {
        let position = match self.physical_start {
            PhysicalStart::Fixed(p) => p,
            PhysicalStart::Random => sample_free_position(&self.physical, START_CLEARANCE, rng),
        };
        UserState::new(position, self.virtual_start.heading)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PairDoc::from(self)).expect("pair serializes")
    }
}

fn check_start(env: &Environment, p: Point, path: &str) -> Result<(), EnvironmentError> {
    geometry::check_free_space(env, p).map_err(|source| EnvironmentError::StartNotFree {
        path: path.to_string(),
        source,
    })?;
    let c = geometry::clearance_unchecked(env, p);
    if c < START_CLEARANCE {
        return Err(EnvironmentError::StartTooClose {
            path: path.to_string(),
            clearance: c,
        });
    }
    Ok(())
}

/// Rejection-sample a uniformly distributed free position with at least
/// `min_clearance` to every edge.
pub fn sample_free_position<R: Rng + ?Sized>(
    env: &Environment,
    min_clearance: f64,
    rng: &mut R,
) -> Point {
    let (lo, hi) = env.bounding_box();
    loop {
        let p = Point::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        if geometry::point_in_free_space(env, p)
            && geometry::clearance_unchecked(env, p) >= min_clearance
        {
            return p;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvironmentError {
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("degenerate polygon at {path}: {source}")]
    DegeneratePolygon { path: String, source: PolygonError },
    #[error("non-simple polygon at {path}: {source}")]
    NonSimplePolygon { path: String, source: PolygonError },
    #[error("{path} is not contained in the boundary")]
    ObstacleOutsideBoundary { path: String },
    #[error("{path} overlaps {other}")]
    OverlappingObstacles { path: String, other: String },
    #[error("{path} is not in free space: {source}")]
    StartNotFree { path: String, source: DomainError },
    #[error("{path} has clearance {clearance:.3} m, below the 0.7 m minimum")]
    StartTooClose { path: String, clearance: f64 },
}

impl EnvironmentError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Schema { .. } => "schema_violation",
            Self::DegeneratePolygon { .. } => "degenerate_polygon",
            Self::NonSimplePolygon { .. } => "non_simple_polygon",
            Self::ObstacleOutsideBoundary { .. } => "obstacle_outside_boundary",
            Self::OverlappingObstacles { .. } => "overlapping_obstacles",
            Self::StartNotFree { .. } => "start_not_free",
            Self::StartTooClose { .. } => "start_too_close",
        }
    }

    /// Location of the offending element inside the document.
    pub fn path(&self) -> &str {
        match self {
            Self::Schema { path, .. }
            | Self::DegeneratePolygon { path, .. }
            | Self::NonSimplePolygon { path, .. }
            | Self::ObstacleOutsideBoundary { path }
            | Self::OverlappingObstacles { path, .. }
            | Self::StartNotFree { path, .. }
            | Self::StartTooClose { path, .. } => path,
        }
    }
}

// ---------------------------------------------------------------------------
// JSON document

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairDoc {
    name: String,
    physical: EnvDoc,
    #[serde(rename = "virtual")]
    virtual_env: EnvDoc,
    virtual_start: StartDoc,
    physical_start: PhysicalStartDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvDoc {
    boundary: Vec<[f64; 2]>,
    #[serde(default)]
    obstacles: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StartDoc {
    position: [f64; 2],
    heading_deg: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PhysicalStartDoc {
    Keyword(String),
    Fixed { position: [f64; 2] },
}

impl From<&EnvironmentPair> for PairDoc {
    fn from(pair: &EnvironmentPair) -> Self {
        let env = |e: &Environment| EnvDoc {
            boundary: e.boundary.vertices().iter().map(|&p| p.into()).collect(),
            obstacles: e
                .obstacles
                .iter()
                .map(|o| o.vertices().iter().map(|&p| p.into()).collect())
                .collect(),
        };
        PairDoc {
            name: pair.name.clone(),
            physical: env(&pair.physical),
            virtual_env: env(&pair.virtual_env),
            virtual_start: StartDoc {
                position: pair.virtual_start.position.into(),
                heading_deg: pair.virtual_start.heading.to_degrees(),
            },
            physical_start: match pair.physical_start {
                PhysicalStart::Random => PhysicalStartDoc::Keyword("random".into()),
                PhysicalStart::Fixed(p) => PhysicalStartDoc::Fixed { position: p.into() },
            },
        }
    }
}

fn polygon_at(coords: &[[f64; 2]], path: String) -> Result<Polygon, EnvironmentError> {
    Polygon::new(coords.iter().map(|&c| c.into()).collect()).map_err(|source| match source {
        PolygonError::Degenerate(_) | PolygonError::ZeroArea | PolygonError::RepeatedVertex(..) => {
            EnvironmentError::DegeneratePolygon { path, source }
        }
        PolygonError::NonFinite(_) => EnvironmentError::Schema {
            path,
            message: source.to_string(),
        },
        PolygonError::SelfIntersecting(..) => EnvironmentError::NonSimplePolygon { path, source },
    })
}

fn environment_at(name: String, doc: &EnvDoc, path: &str) -> Result<Environment, EnvironmentError> {
    let boundary = polygon_at(&doc.boundary, format!("{path}boundary"))?;
    let obstacles = doc
        .obstacles
        .iter()
        .enumerate()
        .map(|(i, o)| polygon_at(o, format!("{path}obstacles[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    Environment::validated(name, boundary, obstacles, path)
}

/// Parse and validate an environment-pair document.
pub fn load_pair(document: &str) -> Result<EnvironmentPair, EnvironmentError> {
    let doc: PairDoc = serde_json::from_str(document).map_err(|e| EnvironmentError::Schema {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let physical = environment_at(format!("{} physical", doc.name), &doc.physical, "physical.")?;
    let virtual_env = environment_at(
        format!("{} virtual", doc.name),
        &doc.virtual_env,
        "virtual.",
    )?;
    let physical_start = match doc.physical_start {
        PhysicalStartDoc::Keyword(k) if k == "random" => PhysicalStart::Random,
        PhysicalStartDoc::Keyword(k) => {
            return Err(EnvironmentError::Schema {
                path: "physical_start".into(),
                message: format!("expected \"random\" or an object, found \"{k}\""),
            })
        }
        PhysicalStartDoc::Fixed { position } => PhysicalStart::Fixed(position.into()),
    };
    let heading = doc.virtual_start.heading_deg;
    if !heading.is_finite() {
        return Err(EnvironmentError::Schema {
            path: "virtual_start.heading_deg".into(),
            message: "heading must be finite".into(),
        });
    }
    let pair = EnvironmentPair {
        name: doc.name,
        physical,
        virtual_env,
        virtual_start: UserState::new(doc.virtual_start.position.into(), heading.to_radians()),
        physical_start,
    };
    pair.validate()?;
    Ok(pair)
}

// ---------------------------------------------------------------------------
// Built-in pairs

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinPair {
    A,
    B,
    C,
}

impl BuiltinPair {
    pub const ALL: [BuiltinPair; 3] = [BuiltinPair::A, BuiltinPair::B, BuiltinPair::C];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "A" | "a" => Some(Self::A),
            "B" | "b" => Some(Self::B),
            "C" | "c" => Some(Self::C),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::A => "A",
            Self::B => "B",
            Self::C => "C",
        }
    }
}

type Coords = &'static [(f64, f64)];

const SQUARE_10: Coords = &[(-5.0, -5.0), (5.0, -5.0), (5.0, 5.0), (-5.0, 5.0)];

const B_PHYSICAL_BOUNDARY: Coords = &[(-6.0, -6.0), (6.0, -6.0), (6.0, 6.0), (-6.0, 6.0)];
const B_QUADRANT_BLOCKS: [Coords; 4] = [
    &[(-4.0, -4.0), (-1.0, -4.0), (-1.0, -1.0), (-4.0, -1.0)],
    &[(1.0, -4.0), (4.0, -4.0), (4.0, -1.0), (1.0, -1.0)],
    &[(1.0, 1.0), (4.0, 1.0), (4.0, 4.0), (1.0, 4.0)],
    &[(-4.0, 1.0), (-1.0, 1.0), (-1.0, 4.0), (-4.0, 4.0)],
];
const B_VIRTUAL_BOUNDARY: Coords = &[(-11.0, -6.0), (6.0, -6.0), (6.0, 6.0), (-11.0, 6.0)];
const B_VIRTUAL_EXTRA: [Coords; 2] = [
    &[(-9.0, 1.0), (-6.0, 1.0), (-6.0, 4.0), (-9.0, 4.0)],
    &[(-9.0, -4.0), (-6.0, -4.0), (-6.0, -1.0), (-9.0, -1.0)],
];

const C_PHYSICAL_OBSTACLES: [Coords; 3] = [
    &[(-4.5, -4.5), (-2.5, -4.5), (-2.5, -2.5), (-4.5, -2.5)],
    &[(-2.0, -1.0), (2.0, -1.0), (2.0, 1.0), (-2.0, 1.0)],
    &[(-2.0, 4.0), (2.0, 4.0), (2.0, 5.0), (-2.0, 5.0)],
];
const C_VIRTUAL_BOUNDARY: Coords = &[(10.0, -10.0), (10.0, 10.0), (-10.0, 10.0), (-10.0, -10.0)];
const C_VIRTUAL_OBSTACLES: [Coords; 10] = [
    &[(-4.5, -4.5), (-2.5, -4.5), (-3.5, -2.5)],
    &[
        (0.0, 2.0),
        (2.0, 1.0),
        (1.0, -2.0),
        (-1.0, -2.0),
        (-2.0, 1.0),
    ],
    &[(-2.0, 4.0), (2.0, 4.0), (2.0, 5.0), (-2.0, 5.0)],
    &[
        (-8.5, 8.5),
        (-8.5, 2.5),
        (-6.5, 2.5),
        (-7.0, 7.0),
        (-2.5, 6.5),
        (-2.5, 8.5),
    ],
    &[(-8.0, -1.0), (-8.0, -2.0), (-7.0, -2.0), (-7.0, -1.0)],
    &[(-7.0, -3.0), (-7.0, -4.0), (-6.0, -4.0), (-6.0, -3.0)],
    &[(-9.0, -5.0), (-9.0, -7.0), (-8.0, -7.0), (-8.0, -5.0)],
    &[(-6.0, -9.0), (-3.0, -7.0), (-3.0, -6.0), (-7.0, -8.0)],
    &[(3.0, -4.0), (3.0, -8.0), (7.0, -8.0), (7.0, -4.0)],
    &[(5.0, 9.0), (4.0, 8.0), (8.0, 4.0), (8.0, 8.0)],
];

fn builtin_env(name: &str, boundary: Coords, obstacles: &[Coords]) -> Environment {
    let poly = |c: Coords| Polygon::from_coords(c).expect("built-in polygon is valid");
    Environment::new(
        name,
        poly(boundary),
        obstacles.iter().map(|&o| poly(o)).collect(),
    )
    .expect("built-in environment is valid")
}

/// One of the three benchmark environment pairs. Virtual users start
/// facing north: A at the room center, B at the center of its bounding box
/// and C 3.5 m south of the center.
pub fn builtin_pair(which: BuiltinPair) -> EnvironmentPair {
    let north = std::f64::consts::FRAC_PI_2;
    let (physical, virtual_env, start) = match which {
        BuiltinPair::A => (
            builtin_env("A physical", SQUARE_10, &[]),
            builtin_env("A virtual", SQUARE_10, &[]),
            Point::new(0.0, 0.0),
        ),
        BuiltinPair::B => {
            let virtual_obstacles: Vec<Coords> = B_QUADRANT_BLOCKS
                .iter()
                .chain(B_VIRTUAL_EXTRA.iter())
                .copied()
                .collect();
            (
                builtin_env("B physical", B_PHYSICAL_BOUNDARY, &B_QUADRANT_BLOCKS),
                builtin_env("B virtual", B_VIRTUAL_BOUNDARY, &virtual_obstacles),
                Point::new(-2.5, 0.0),
            )
        }
        BuiltinPair::C => (
            builtin_env("C physical", SQUARE_10, &C_PHYSICAL_OBSTACLES),
            builtin_env("C virtual", C_VIRTUAL_BOUNDARY, &C_VIRTUAL_OBSTACLES),
            Point::new(0.0, -3.5),
        ),
    };
    EnvironmentPair {
        name: which.label().to_string(),
        physical,
        virtual_env,
        virtual_start: UserState::new(start, north),
        physical_start: PhysicalStart::Random,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coords(p: &Polygon) -> Vec<(f64, f64)> {
        p.vertices().iter().map(|v| (v.x, v.y)).collect()
    }

    #[test]
    fn builtin_examples() {
        let a = builtin_pair(BuiltinPair::A);
        assert_eq!(
            coords(a.physical.boundary()),
            vec![(-5.0, -5.0), (5.0, -5.0), (5.0, 5.0), (-5.0, 5.0)]
        );
        assert_eq!(
            builtin_pair(BuiltinPair::B).virtual_env.obstacles().len(),
            6
        );
        let c = builtin_pair(BuiltinPair::C);
        assert_eq!(c.physical.obstacles().len(), 3);
        assert_eq!(
            coords(&c.physical.obstacles()[1]),
            vec![(-2.0, -1.0), (2.0, -1.0), (2.0, 1.0), (-2.0, 1.0)]
        );
        assert_eq!(c.virtual_start.position, Point::new(0.0, -3.5));
    }

    #[test]
    fn builtin_starts_have_clearance() {
        for which in BuiltinPair::ALL {
            let pair = builtin_pair(which);
            pair.validate().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for _ in 0..50 {
                let s = pair.physical_start_state(&mut rng);
                assert!(
                    geometry::clearance(&pair.physical, s.position).unwrap() >= START_CLEARANCE
                );
                assert_eq!(s.heading, pair.virtual_start.heading);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        for which in BuiltinPair::ALL {
            let pair = builtin_pair(which);
            let back = load_pair(&pair.to_json()).unwrap();
            assert_eq!(back, pair);
        }
        let fixed = builtin_pair(BuiltinPair::A).with_fixed_start_at_virtual();
        assert_eq!(load_pair(&fixed.to_json()).unwrap(), fixed);
    }

    fn doc_with(physical_obstacles: &str, physical_start: &str) -> String {
        format!(
            r#"{{
              "name": "t",
              "physical": {{"boundary": [[-5,-5],[5,-5],[5,5],[-5,5]], "obstacles": {physical_obstacles}}},
              "virtual": {{"boundary": [[-5,-5],[5,-5],[5,5],[-5,5]], "obstacles": []}},
              "virtual_start": {{"position": [0,0], "heading_deg": 90}},
              "physical_start": {physical_start}
            }}"#
        )
    }

    #[test]
    fn loader_error_codes() {
        let err = load_pair(&doc_with("[[[4,4],[6,4],[6,6],[4,6]]]", r#""random""#)).unwrap_err();
        assert_eq!(err.code(), "obstacle_outside_boundary");
        assert_eq!(err.path(), "physical.obstacles[0]");

        let err = load_pair(&doc_with("[[[0,0],[1,1]]]", r#""random""#)).unwrap_err();
        assert_eq!(err.code(), "degenerate_polygon");
        assert_eq!(err.path(), "physical.obstacles[0]");

        let err = load_pair(&doc_with("[[[0,0],[1,1],[1,0],[0,1]]]", r#""random""#)).unwrap_err();
        assert_eq!(err.code(), "non_simple_polygon");

        let err = load_pair(&doc_with(
            "[[[0,0],[2,0],[2,2],[0,2]], [[1,1],[3,1],[3,3],[1,3]]]",
            r#""random""#,
        ))
        .unwrap_err();
        assert_eq!(err.code(), "overlapping_obstacles");

        let err = load_pair(&doc_with("[]", r#"{"position": [4.5, 0]}"#)).unwrap_err();
        assert_eq!(err.code(), "start_too_close");
        assert_eq!(err.path(), "physical_start.position");

        let err = load_pair(&doc_with("[]", r#""somewhere""#)).unwrap_err();
        assert_eq!(err.code(), "schema_violation");

        let err = load_pair(r#"{"name": "x"}"#).unwrap_err();
        assert_eq!(err.code(), "schema_violation");
    }

    #[test]
    fn obstacle_touching_wall_is_accepted() {
        // C's top obstacle shares part of the north wall.
        let c = builtin_pair(BuiltinPair::C);
        assert!(c.physical.obstacles()[2].vertices().iter().any(|v| c
            .physical
            .boundary()
            .distance_to_boundary(*v)
            == 0.0));
    }
}
