//! 2D board/particle scenarios with exact simulation.
//!
//! Coordinates are multiples of 0.5 and are held as integer half-units, so
//! moves, translations and quarter-turn rotations never accumulate error.

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{seeded_rng, SeededRng};
use crate::types::{instance_id, ComplexityMeta, GroundTruth, ProblemInstance, ProblemSpec, TaskFamily};

pub const BOARD_SIZE: i64 = 20;
pub const MAX_STEPS: u32 = 10;
pub const MIN_PARTICLES: usize = 2;
pub const MAX_PARTICLES: usize = 4;
pub const MAX_ACTIONS: usize = 50;
pub const ATTEMPT_BUDGET: usize = 10_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpatialError {
    #[error("board size must be {BOARD_SIZE}, got {0}")]
    BoardSize(i64),
    #[error("need {MIN_PARTICLES}-{MAX_PARTICLES} particles, got {0}")]
    ParticleCount(usize),
    #[error("duplicate particle id `{0}`")]
    DuplicateId(String),
    #[error("unknown particle id `{0}`")]
    UnknownId(String),
    #[error("particle `{0}` starts outside the board")]
    OffBoard(String),
    #[error("action {index}: {reason}")]
    Action { index: usize, reason: String },
    #[error("a problem needs at least one action")]
    NoActions,
    #[error("relative query compares `{0}` with itself")]
    SelfQuery(String),
    #[error("invalid spatial config: {0}")]
    Config(String),
    #[error("could not produce instance {ordinal} within {ATTEMPT_BUDGET} attempts")]
    GenerationBudget { ordinal: usize },
}

/// A multiple of 0.5, stored as a count of half-units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Half(pub i64);

impl Half {
    pub fn from_units(units: i64) -> Self {
        Half(2 * units)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl TryFrom<f64> for Half {
    type Error = String;

    fn try_from(x: f64) -> Result<Self, Self::Error> {
        let doubled = x * 2.0;
        if doubled.is_finite() && doubled.fract() == 0.0 && doubled.abs() < 1e15 {
            Ok(Half(doubled as i64))
        } else {
            Err(format!("{x} is not a multiple of 0.5"))
        }
    }
}

impl From<Half> for f64 {
    fn from(h: Half) -> f64 {
        h.to_f64()
    }
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.to_f64())
    }
}

/// Cardinal directions in counterclockwise order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cardinal {
    East,
    North,
    West,
    South,
}

impl Cardinal {
    pub const ALL: [Cardinal; 4] = [Cardinal::East, Cardinal::North, Cardinal::West, Cardinal::South];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Self {
        Cardinal::ALL[(i % 4) as usize]
    }

    /// Rotates by `quarter_turns` × 90° counterclockwise.
    pub fn rotate_ccw(self, quarter_turns: u8) -> Self {
        Cardinal::from_index(self.index() + quarter_turns % 4)
    }

    /// Unit step as (dx, dy).
    pub fn unit(self) -> (i64, i64) {
        match self {
            Cardinal::East => (1, 0),
            Cardinal::North => (0, 1),
            Cardinal::West => (-1, 0),
            Cardinal::South => (0, -1),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Cardinal::East => "East",
            Cardinal::North => "North",
            Cardinal::West => "West",
            Cardinal::South => "South",
        }
    }
}

impl fmt::Display for Cardinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Cardinal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Cardinal::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| format!("unknown direction `{s}`"))
    }
}

/// Orientation of one particle relative to another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelativeTurn {
    #[serde(rename = "same")]
    Same,
    /// 90° counterclockwise from the reference.
    #[serde(rename = "left-of")]
    LeftOf,
    #[serde(rename = "opposite")]
    Opposite,
    /// 90° clockwise from the reference.
    #[serde(rename = "right-of")]
    RightOf,
}

impl RelativeTurn {
    pub const ALL: [RelativeTurn; 4] = [RelativeTurn::Same, RelativeTurn::LeftOf, RelativeTurn::Opposite, RelativeTurn::RightOf];

    /// Orientation of `a` relative to `b`.
    pub fn between(a: Cardinal, b: Cardinal) -> Self {
        RelativeTurn::ALL[((a.index() + 4 - b.index()) % 4) as usize]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelativeTurn::Same => "same",
            RelativeTurn::LeftOf => "left-of",
            RelativeTurn::Opposite => "opposite",
            RelativeTurn::RightOf => "right-of",
        }
    }
}

impl fmt::Display for RelativeTurn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RelativeTurn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        RelativeTurn::ALL
            .into_iter()
            .find(|r| r.as_str() == t)
            .ok_or_else(|| format!("unknown relative orientation `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    AbsoluteLocation,
    AbsoluteOrientation,
    RelativeLocation,
    RelativeOrientation,
}

impl QueryKind {
    pub const ALL: [QueryKind; 4] = [
        QueryKind::AbsoluteLocation,
        QueryKind::AbsoluteOrientation,
        QueryKind::RelativeLocation,
        QueryKind::RelativeOrientation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryKind::AbsoluteLocation => "absolute_location",
            QueryKind::AbsoluteOrientation => "absolute_orientation",
            QueryKind::RelativeLocation => "relative_location",
            QueryKind::RelativeOrientation => "relative_orientation",
        }
    }

    /// Two-letter code used in reports (AL, AO, RL, RO).
    pub fn code(self) -> &'static str {
        match self {
            QueryKind::AbsoluteLocation => "AL",
            QueryKind::AbsoluteOrientation => "AO",
            QueryKind::RelativeLocation => "RL",
            QueryKind::RelativeOrientation => "RO",
        }
    }

    pub fn is_relative(self) -> bool {
        matches!(self, QueryKind::RelativeLocation | QueryKind::RelativeOrientation)
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for QueryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        QueryKind::ALL
            .into_iter()
            .find(|q| q.as_str() == t || q.code().eq_ignore_ascii_case(t))
            .ok_or_else(|| format!("unknown query kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Board {
    pub size: i64,
    pub center: (Half, Half),
    pub orientation: Cardinal,
}

impl Default for Board {
    fn default() -> Self {
        Board { size: BOARD_SIZE, center: (Half(0), Half(0)), orientation: Cardinal::North }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Particle {
    pub id: String,
    pub position: (Half, Half),
    pub orientation: Cardinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveDirection {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Turn {
    Left,
    Right,
    Around,
}

impl Turn {
    fn quarter_turns(self) -> u8 {
        match self {
            Turn::Left => 1,
            Turn::Around => 2,
            Turn::Right => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    ParticleMove { id: String, direction: MoveDirection, steps: u32 },
    ParticleTurn { id: String, turn: Turn },
    /// Shifts the board and every particle on it.
    BoardTranslate { dx: Half, dy: Half },
    /// Rotates the board and every particle on it counterclockwise about the board center.
    BoardRotate { quarter_turns: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Query {
    AbsoluteLocation { id: String },
    AbsoluteOrientation { id: String },
    RelativeLocation { a: String, b: String },
    RelativeOrientation { a: String, b: String },
}

impl Query {
    pub fn kind(&self) -> QueryKind {
        match self {
            Query::AbsoluteLocation { .. } => QueryKind::AbsoluteLocation,
            Query::AbsoluteOrientation { .. } => QueryKind::AbsoluteOrientation,
            Query::RelativeLocation { .. } => QueryKind::RelativeLocation,
            Query::RelativeOrientation { .. } => QueryKind::RelativeOrientation,
        }
    }

    fn ids(&self) -> Vec<&str> {
        match self {
            Query::AbsoluteLocation { id } | Query::AbsoluteOrientation { id } => vec![id],
            Query::RelativeLocation { a, b } | Query::RelativeOrientation { a, b } => vec![a, b],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpatialProblem {
    pub board: Board,
    pub particles: Vec<Particle>,
    pub actions: Vec<Action>,
    pub query: Query,
}

impl SpatialProblem {
    pub fn validate(&self) -> Result<(), SpatialError> {
        if self.board.size != BOARD_SIZE {
            return Err(SpatialError::BoardSize(self.board.size));
        }
        let n = self.particles.len();
        if !(MIN_PARTICLES..=MAX_PARTICLES).contains(&n) {
            return Err(SpatialError::ParticleCount(n));
        }
        let mut ids = HashSet::new();
        let half_extent = BOARD_SIZE; // in half-units: size/2 units = size half-units
        for p in &self.particles {
            if !ids.insert(p.id.as_str()) {
                return Err(SpatialError::DuplicateId(p.id.clone()));
            }
            let (dx, dy) = (p.position.0 .0 - self.board.center.0 .0, p.position.1 .0 - self.board.center.1 .0);
            if dx.abs() > half_extent || dy.abs() > half_extent {
                return Err(SpatialError::OffBoard(p.id.clone()));
            }
        }
        if self.actions.is_empty() {
            return Err(SpatialError::NoActions);
        }
        for (index, action) in self.actions.iter().enumerate() {
            let bad = |reason: String| SpatialError::Action { index, reason };
            match action {
                Action::ParticleMove { id, steps, .. } => {
                    if !ids.contains(id.as_str()) {
                        return Err(bad(format!("unknown particle `{id}`")));
                    }
                    if !(1..=MAX_STEPS).contains(steps) {
                        return Err(bad(format!("steps {steps} outside 1..={MAX_STEPS}")));
                    }
                }
                Action::ParticleTurn { id, .. } => {
                    if !ids.contains(id.as_str()) {
                        return Err(bad(format!("unknown particle `{id}`")));
                    }
                }
                Action::BoardTranslate { .. } => {}
                Action::BoardRotate { quarter_turns } => {
                    if !(1..=3).contains(quarter_turns) {
                        return Err(bad(format!("quarter_turns {quarter_turns} outside 1..=3")));
                    }
                }
            }
        }
        for id in self.query.ids() {
            if !ids.contains(id) {
                return Err(SpatialError::UnknownId(id.to_string()));
            }
        }
        if let Query::RelativeLocation { a, b } | Query::RelativeOrientation { a, b } = &self.query {
            if a == b {
                return Err(SpatialError::SelfQuery(a.clone()));
            }
        }
        Ok(())
    }
}

/// Board and particle state after some actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpatialState {
    pub board: Board,
    pub particles: Vec<Particle>,
}

impl SpatialState {
    pub fn new(problem: &SpatialProblem) -> Self {
        SpatialState { board: problem.board.clone(), particles: problem.particles.clone() }
    }

    pub fn particle(&self, id: &str) -> &Particle {
        self.particles.iter().find(|p| p.id == id).expect("validated id")
    }

    pub fn apply(&mut self, action: &Action) {
        match action {
            Action::ParticleMove { id, direction, steps } => {
                let p = self.particles.iter_mut().find(|p| &p.id == id).expect("validated id");
                let (ux, uy) = p.orientation.unit();
                let sign = if *direction == MoveDirection::Forward { 1 } else { -1 };
                let d = 2 * sign * *steps as i64;
                p.position = (Half(p.position.0 .0 + d * ux), Half(p.position.1 .0 + d * uy));
            }
            Action::ParticleTurn { id, turn } => {
                let p = self.particles.iter_mut().find(|p| &p.id == id).expect("validated id");
                p.orientation = p.orientation.rotate_ccw(turn.quarter_turns());
            }
            Action::BoardTranslate { dx, dy } => {
                let shift = |(x, y): (Half, Half)| (Half(x.0 + dx.0), Half(y.0 + dy.0));
                self.board.center = shift(self.board.center);
                for p in &mut self.particles {
                    p.position = shift(p.position);
                }
            }
            Action::BoardRotate { quarter_turns } => {
                let (cx, cy) = (self.board.center.0 .0, self.board.center.1 .0);
                self.board.orientation = self.board.orientation.rotate_ccw(*quarter_turns);
                for p in &mut self.particles {
                    let (mut rx, mut ry) = (p.position.0 .0 - cx, p.position.1 .0 - cy);
                    for _ in 0..*quarter_turns % 4 {
                        (rx, ry) = (-ry, rx);
                    }
                    p.position = (Half(cx + rx), Half(cy + ry));
                    p.orientation = p.orientation.rotate_ccw(*quarter_turns);
                }
            }
        }
    }

    pub fn answer(&self, query: &Query) -> GroundTruth {
        match query {
            Query::AbsoluteLocation { id } => {
                let p = self.particle(id);
                GroundTruth::Coordinate { x: p.position.0.to_f64(), y: p.position.1.to_f64() }
            }
            Query::AbsoluteOrientation { id } => GroundTruth::Orientation { value: self.particle(id).orientation },
            Query::RelativeLocation { a, b } => {
                let (pa, pb) = (self.particle(a), self.particle(b));
                GroundTruth::Coordinate {
                    x: Half(pa.position.0 .0 - pb.position.0 .0).to_f64(),
                    y: Half(pa.position.1 .0 - pb.position.1 .0).to_f64(),
                }
            }
            Query::RelativeOrientation { a, b } => GroundTruth::RelativeOrientation {
                value: RelativeTurn::between(self.particle(a).orientation, self.particle(b).orientation),
            },
        }
    }
}

/// Runs every action and answers the query. The problem must be valid.
pub fn simulate(problem: &SpatialProblem) -> GroundTruth {
    let mut state = SpatialState::new(problem);
    for action in &problem.actions {
        state.apply(action);
    }
    state.answer(&problem.query)
}

pub fn complexity(problem: &SpatialProblem) -> ComplexityMeta {
    ComplexityMeta::Spatial { n_actions: problem.actions.len(), query_kind: problem.query.kind() }
}

fn number_word(n: usize) -> String {
    match n {
        2 => "two".into(),
        3 => "three".into(),
        4 => "four".into(),
        _ => n.to_string(),
    }
}

fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn point((x, y): (Half, Half)) -> String {
    format!("({x}, {y})")
}

fn action_sentence(action: &Action) -> String {
    match action {
        Action::ParticleMove { id, direction, steps } => {
            let unit = if *steps == 1 { "step" } else { "steps" };
            let dir = if *direction == MoveDirection::Forward { "forward" } else { "backwards" };
            format!("{id} moves {steps} {unit} {dir}.")
        }
        Action::ParticleTurn { id, turn } => match turn {
            Turn::Left => format!("{id} turns left."),
            Turn::Right => format!("{id} turns right."),
            Turn::Around => format!("{id} turns around."),
        },
        Action::BoardTranslate { dx, dy } => {
            format!("The grid, together with all particles on it, shifts by ({dx}, {dy}).")
        }
        Action::BoardRotate { quarter_turns } => format!(
            "The grid, together with all particles on it, rotates {} degrees counterclockwise about the grid's center.",
            90 * *quarter_turns as u32
        ),
    }
}

/// Renders the canonical prompt.
pub fn render_spatial_prompt(problem: &SpatialProblem) -> String {
    let b = &problem.board;
    let ids: Vec<String> = problem.particles.iter().map(|p| p.id.clone()).collect();
    let locations: Vec<String> = problem.particles.iter().map(|p| point(p.position)).collect();
    let facings: Vec<String> = problem.particles.iter().map(|p| p.orientation.to_string()).collect();
    let mut out = format!(
        "Consider a square grid of size {}x{} centered at {}, oriented towards {}. \
         It has {} particles {} at locations {}, respectively. {} face towards {}, respectively.",
        b.size,
        b.size,
        point(b.center),
        b.orientation,
        number_word(ids.len()),
        join_and(&ids),
        join_and(&locations),
        join_and(&ids),
        join_and(&facings),
    );
    for action in &problem.actions {
        out.push(' ');
        out.push_str(&action_sentence(action));
    }
    out.push(' ');
    let question = match &problem.query {
        Query::AbsoluteLocation { id } => format!("What is the location of {id}?"),
        Query::AbsoluteOrientation { id } => format!("Which direction does {id} face?"),
        Query::RelativeLocation { a, b } => format!("What is the location of {a}, relative to {b}?"),
        Query::RelativeOrientation { a, b } => format!("What is the orientation of {a}, relative to {b}?"),
    };
    out.push_str(&question);
    out.push_str(
        "\nConventions: x grows towards East and y towards North; one step is 1 unit along the direction a particle faces, \
         and backwards steps go the opposite way. Particles may leave the grid.",
    );
    let format = match problem.query.kind() {
        QueryKind::AbsoluteLocation => {
            " Give your final answer as a JSON object, for example {\"answer\": {\"x\": 1.5, \"y\": -2.0}}."
        }
        QueryKind::RelativeLocation => {
            " The location of A relative to B is A's position minus B's position. \
             Give your final answer as a JSON object, for example {\"answer\": {\"x\": 1.5, \"y\": -2.0}}."
        }
        QueryKind::AbsoluteOrientation => {
            " Answer with one of East, North, West or South as a JSON object, for example {\"answer\": \"North\"}."
        }
        QueryKind::RelativeOrientation => {
            " Answer \"same\", \"left-of\" (A faces 90 degrees counterclockwise from B), \"opposite\" or \
             \"right-of\" (A faces 90 degrees clockwise from B) as a JSON object, for example {\"answer\": \"left-of\"}."
        }
    };
    out.push_str(format);
    out
}

/// Builds a dataset instance from a hand-pinned problem.
pub fn instance_from_problem(problem: SpatialProblem, seed: u64, ordinal: usize) -> Result<ProblemInstance, SpatialError> {
    problem.validate()?;
    Ok(ProblemInstance {
        id: instance_id(TaskFamily::Spatial, seed, ordinal),
        family: TaskFamily::Spatial,
        prompt: render_spatial_prompt(&problem),
        truth: simulate(&problem),
        complexity: complexity(&problem),
        spec: ProblemSpec::Spatial(problem),
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialConfig {
    pub count: usize,
    pub action_count_bounds: (usize, usize),
    pub particle_count_bounds: (usize, usize),
    /// Query kinds drawn uniformly; repeat a kind to weight it.
    pub query_mix: Vec<QueryKind>,
    pub seed: u64,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        SpatialConfig {
            count: 100,
            action_count_bounds: (1, 10),
            particle_count_bounds: (MIN_PARTICLES, MAX_PARTICLES),
            query_mix: QueryKind::ALL.to_vec(),
            seed: 0,
        }
    }
}

impl SpatialConfig {
    pub fn validate(&self) -> Result<(), SpatialError> {
        let (alo, ahi) = self.action_count_bounds;
        if alo < 1 || alo > ahi || ahi > MAX_ACTIONS {
            return Err(SpatialError::Config(format!(
                "action_count_bounds ({alo}, {ahi}) must satisfy 1 <= min <= max <= {MAX_ACTIONS}"
            )));
        }
        let (plo, phi) = self.particle_count_bounds;
        if plo < MIN_PARTICLES || plo > phi || phi > MAX_PARTICLES {
            return Err(SpatialError::Config(format!(
                "particle_count_bounds ({plo}, {phi}) must lie within {MIN_PARTICLES}..={MAX_PARTICLES}"
            )));
        }
        if self.query_mix.is_empty() {
            return Err(SpatialError::Config("query_mix is empty".into()));
        }
        Ok(())
    }
}

fn draw_problem(config: &SpatialConfig, rng: &mut SeededRng) -> SpatialProblem {
    let n = rng.gen_range(config.particle_count_bounds.0..=config.particle_count_bounds.1);
    // Distinct cell centres: x, y in {-9.5, ..., 9.5}.
    let mut cells: Vec<(i64, i64)> = Vec::with_capacity(n);
    while cells.len() < n {
        let c = (rng.gen_range(-10..10), rng.gen_range(-10..10));
        if !cells.contains(&c) {
            cells.push(c);
        }
    }
    let particles: Vec<Particle> = cells
        .iter()
        .enumerate()
        .map(|(i, &(cx, cy))| Particle {
            id: format!("P{}", i + 1),
            position: (Half(2 * cx + 1), Half(2 * cy + 1)),
            orientation: Cardinal::ALL[rng.gen_range(0..4)],
        })
        .collect();
    let ids: Vec<String> = particles.iter().map(|p| p.id.clone()).collect();
    let n_actions = rng.gen_range(config.action_count_bounds.0..=config.action_count_bounds.1);
    let actions = (0..n_actions)
        .map(|_| {
            let roll = rng.gen_range(0..8);
            match roll {
                0..=3 => Action::ParticleMove {
                    id: ids.choose(rng).expect("particles").clone(),
                    direction: if rng.gen_bool(0.5) { MoveDirection::Forward } else { MoveDirection::Backward },
                    steps: rng.gen_range(1..=MAX_STEPS),
                },
                4 | 5 => Action::ParticleTurn {
                    id: ids.choose(rng).expect("particles").clone(),
                    turn: [Turn::Left, Turn::Right, Turn::Around][rng.gen_range(0..3)],
                },
                6 => loop {
                    let (dx, dy) = (rng.gen_range(-5..=5), rng.gen_range(-5..=5));
                    if (dx, dy) != (0, 0) {
                        break Action::BoardTranslate { dx: Half::from_units(dx), dy: Half::from_units(dy) };
                    }
                },
                _ => Action::BoardRotate { quarter_turns: rng.gen_range(1..=3) },
            }
        })
        .collect();
    let kind = config.query_mix[rng.gen_range(0..config.query_mix.len())];
    let pair: Vec<&String> = ids.choose_multiple(rng, 2).collect();
    let (a, b) = (pair[0].clone(), pair[1].clone());
    let query = match kind {
        QueryKind::AbsoluteLocation => Query::AbsoluteLocation { id: a },
        QueryKind::AbsoluteOrientation => Query::AbsoluteOrientation { id: a },
        QueryKind::RelativeLocation => Query::RelativeLocation { a, b },
        QueryKind::RelativeOrientation => Query::RelativeOrientation { a, b },
    };
    SpatialProblem { board: Board::default(), particles, actions, query }
}

/// Generates `config.count` distinct spatial instances.
pub fn generate_spatial(config: &SpatialConfig) -> Result<Vec<ProblemInstance>, SpatialError> {
    config.validate()?;
    let mut rng = seeded_rng(config.seed);
    let mut seen = HashSet::with_capacity(config.count);
    let mut out = Vec::with_capacity(config.count);
    for ordinal in 0..config.count {
        let mut attempt = 0;
        let problem = loop {
            if attempt == ATTEMPT_BUDGET {
                return Err(SpatialError::GenerationBudget { ordinal });
            }
            attempt += 1;
            let p = draw_problem(config, &mut rng);
            if !seen.contains(&p) {
                break p;
            }
        };
        seen.insert(problem.clone());
        out.push(instance_from_problem(problem, config.seed, ordinal)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn worked_problem() -> SpatialProblem {
        SpatialProblem {
            board: Board::default(),
            particles: vec![
                Particle { id: "P1".into(), position: (Half(-3), Half(5)), orientation: Cardinal::East },
                Particle { id: "P2".into(), position: (Half(7), Half(3)), orientation: Cardinal::West },
            ],
            actions: vec![
                Action::ParticleMove { id: "P1".into(), direction: MoveDirection::Forward, steps: 1 },
                Action::ParticleMove { id: "P2".into(), direction: MoveDirection::Backward, steps: 1 },
            ],
            query: Query::RelativeLocation { a: "P1".into(), b: "P2".into() },
        }
    }

    #[test]
    fn worked_example() {
        let p = worked_problem();
        p.validate().unwrap();
        assert_eq!(simulate(&p), GroundTruth::Coordinate { x: -5.0, y: 1.0 });
        let text = render_spatial_prompt(&p);
        assert!(text.starts_with("Consider a square grid of size 20x20 centered at (0.0, 0.0)"));
        assert!(text.contains(
            "It has two particles P1 and P2 at locations (-1.5, 2.5) and (3.5, 1.5), respectively. \
             P1 and P2 face towards East and West, respectively. \
             P1 moves 1 step forward. P2 moves 1 step backwards. What is the location of P1, relative to P2?"
        ));
    }

    #[test]
    fn four_left_turns_are_identity() {
        let mut p = worked_problem();
        p.actions = vec![Action::ParticleTurn { id: "P1".into(), turn: Turn::Left }; 4];
        p.query = Query::AbsoluteOrientation { id: "P1".into() };
        assert_eq!(simulate(&p), GroundTruth::Orientation { value: Cardinal::East });
    }

    #[test]
    fn board_rotation_carries_particles() {
        let mut p = worked_problem();
        p.particles[0].position = (Half(2), Half(0));
        p.actions = vec![Action::BoardRotate { quarter_turns: 1 }];
        let mut state = SpatialState::new(&p);
        state.apply(&p.actions[0]);
        assert_eq!(state.particle("P1").position, (Half(0), Half(2)));
        assert_eq!(state.particle("P1").orientation, Cardinal::North);
        assert_eq!(state.board.orientation, Cardinal::West);
    }

    #[test]
    fn relative_turn_tokens() {
        assert_eq!(RelativeTurn::between(Cardinal::North, Cardinal::East), RelativeTurn::LeftOf);
        assert_eq!(RelativeTurn::between(Cardinal::South, Cardinal::East), RelativeTurn::RightOf);
        assert_eq!(RelativeTurn::between(Cardinal::West, Cardinal::East), RelativeTurn::Opposite);
        assert_eq!("Left_Of".parse::<RelativeTurn>().unwrap(), RelativeTurn::LeftOf);
        assert_eq!(serde_json::to_value(RelativeTurn::RightOf).unwrap(), "right-of");
    }

    #[test]
    fn validation_errors() {
        let mut p = worked_problem();
        p.actions.clear();
        assert_eq!(p.validate(), Err(SpatialError::NoActions));
        let mut p = worked_problem();
        p.particles[1].id = "P1".into();
        assert!(matches!(p.validate(), Err(SpatialError::DuplicateId(_))));
        let mut p = worked_problem();
        p.particles[0].position = (Half(21), Half(0));
        assert!(matches!(p.validate(), Err(SpatialError::OffBoard(_))));
        let c = SpatialConfig { action_count_bounds: (0, 3), ..SpatialConfig::default() };
        assert!(matches!(generate_spatial(&c), Err(SpatialError::Config(_))));
    }

    #[test]
    fn half_serialization() {
        assert_eq!(serde_json::to_string(&Half(-3)).unwrap(), "-1.5");
        assert_eq!(serde_json::from_str::<Half>("2.5").unwrap(), Half(5));
        assert!(serde_json::from_str::<Half>("0.25").is_err());
    }

    #[test]
    fn generation_is_deterministic_and_unique() {
        let c = SpatialConfig { count: 300, seed: 11, ..SpatialConfig::default() };
        let a = generate_spatial(&c).unwrap();
        assert_eq!(a, generate_spatial(&c).unwrap());
        let unique: HashSet<_> = a.iter().map(|i| serde_json::to_string(&i.spec).unwrap()).collect();
        assert_eq!(unique.len(), 300);
    }
}
