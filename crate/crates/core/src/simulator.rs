//! Deterministic desk-scale robot world that produces traces for the learner.
//!
//! Heading 0° points North (+axis 1) and 90° points East (+axis 0), so a move
//! of `x` displaces the robot by `(c·x·sin θ, c·x·cos θ)`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::trace::{ActionRecord, Binding, Sample, StateSnapshot, TraceError};
use crate::types::{is_identifier, TypedValue};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("gripper already holds `{0}`")]
    GripperFull(String),
    #[error("gripper is empty")]
    GripperEmpty,
    #[error("`{0}` is out of reach")]
    OutOfReach(String),
    #[error("`{0}` is not held")]
    NotHeld(String),
    #[error("`{0}` cannot be picked up")]
    NotGrabbable(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("scenario file: {0}")]
    ScenarioFile(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

impl SimError {
    /// Errors that model an action failing in the world rather than a bad input.
    pub fn is_action_failure(&self) -> bool {
        matches!(
            self,
            SimError::GripperFull(_)
                | SimError::GripperEmpty
                | SimError::OutOfReach(_)
                | SimError::NotHeld(_)
                | SimError::NotGrabbable(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub name: String,
    /// Footprint corners in the ground plane.
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Obstacle {
    pub fn contains(&self, p: &[f64]) -> bool {
        (0..2).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    fn center(&self, dim: usize) -> Vec<f64> {
        let mut c = vec![(self.min[0] + self.max[0]) / 2.0, (self.min[1] + self.max[1]) / 2.0];
        c.resize(dim, 0.0);
        c
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

/// Which snapshot variable each world field is published as.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariableNames {
    pub position: String,
    pub heading: String,
    pub gripper: String,
    pub object_count: String,
    /// Object and obstacle positions publish as `<prefix><name>`.
    pub object_prefix: String,
}

impl Default for VariableNames {
    fn default() -> Self {
        VariableNames {
            position: "r_pos".into(),
            heading: "r_dir".into(),
            gripper: "obj_grab".into(),
            object_count: "obj_num".into(),
            object_prefix: "obj_pos_".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub position: Vec<f64>,
    /// Degrees in `[0, 360)`.
    pub heading: f64,
    pub held: Option<String>,
    pub objects: BTreeMap<String, Vec<f64>>,
    /// Speed factor `c` turning a commanded distance into displacement.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub initial: WorldState,
    pub obstacles: Vec<Obstacle>,
    pub bounds: Option<Bounds>,
    pub grab_radius: f64,
    pub names: VariableNames,
    /// Half-width of uniform noise added to the published robot position.
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    MoveForward(f64),
    TurnLeft(f64),
    TurnRight(f64),
    Grab(String),
    Drop(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ActionKind {
    MoveForward,
    TurnLeft,
    TurnRight,
    Grab,
    Drop,
}

impl ActionKind {
    pub const ALL: [ActionKind; 5] = [
        ActionKind::MoveForward,
        ActionKind::TurnLeft,
        ActionKind::TurnRight,
        ActionKind::Grab,
        ActionKind::Drop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::MoveForward => "move_forward",
            ActionKind::TurnLeft => "turn_left",
            ActionKind::TurnRight => "turn_right",
            ActionKind::Grab => "grab",
            ActionKind::Drop => "drop",
        }
    }
}

impl Command {
    pub fn kind(&self) -> ActionKind {
        match self {
            Command::MoveForward(_) => ActionKind::MoveForward,
            Command::TurnLeft(_) => ActionKind::TurnLeft,
            Command::TurnRight(_) => ActionKind::TurnRight,
            Command::Grab(_) => ActionKind::Grab,
            Command::Drop(_) => ActionKind::Drop,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind().name()
    }

    pub fn params(&self) -> Vec<TypedValue> {
        match self {
            Command::MoveForward(x) => vec![TypedValue::Dist(*x)],
            Command::TurnLeft(g) | Command::TurnRight(g) => vec![TypedValue::Angl(*g)],
            Command::Grab(o) | Command::Drop(o) => vec![TypedValue::Obj(o.clone())],
        }
    }
}

pub type CommandScript = Vec<Command>;

/// `sin` and `cos` of an angle in degrees, exact at multiples of 90°.
pub fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let q = deg / 90.0;
    if q.fract() == 0.0 {
        match (q as i64).rem_euclid(4) {
            0 => return (0.0, 1.0),
            1 => return (1.0, 0.0),
            2 => return (0.0, -1.0),
            _ => return (-1.0, 0.0),
        }
    }
    deg.to_radians().sin_cos()
}

pub fn normalize_heading(deg: f64) -> f64 {
    let h = deg.rem_euclid(360.0);
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

impl Scenario {
    fn blocked(&self, p: &[f64]) -> bool {
        if self.obstacles.iter().any(|o| o.contains(p)) {
            return true;
        }
        match &self.bounds {
            Some(b) => (0..2).any(|i| p[i] < b.min[i] || p[i] > b.max[i]),
            None => false,
        }
    }

    pub fn dimension(&self) -> usize {
        self.initial.position.len()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        let w = &self.initial;
        let dim = w.position.len();
        if dim != 2 && dim != 3 {
            return bad(format!("position has {dim} coordinates, expected 2 or 3"));
        }
        if !(0.0..360.0).contains(&w.heading) {
            return bad(format!("heading {} outside [0, 360)", w.heading));
        }
        if !(w.speed > 0.0 && w.speed.is_finite()) {
            return bad(format!("speed factor must be positive, got {}", w.speed));
        }
        if !(self.grab_radius >= 0.0 && self.noise >= 0.0) {
            return bad("grab radius and noise must be non-negative".into());
        }
        if w.position.iter().any(|x| !x.is_finite()) {
            return bad("robot position must be finite".into());
        }
        if self.blocked(&w.position) {
            return bad("robot starts inside an obstacle or outside the bounds".into());
        }
        let n = &self.names;
        let fixed = [&n.position, &n.heading, &n.gripper, &n.object_count];
        if fixed.iter().any(|v| !is_identifier(v)) || !is_identifier(&format!("{}x", n.object_prefix)) {
            return bad("variable names must be identifiers".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in w.objects.keys().chain(self.obstacles.iter().map(|o| &o.name)) {
            if !is_identifier(name) || name == "none" {
                return bad(format!("`{name}` is not a usable object name"));
            }
            if !seen.insert(name.clone()) {
                return bad(format!("object name `{name}` used twice"));
            }
        }
        let mut vars: Vec<String> = fixed.iter().map(|s| s.to_string()).collect();
        vars.extend(seen.iter().map(|o| format!("{}{o}", n.object_prefix)));
        let distinct: std::collections::BTreeSet<&String> = vars.iter().collect();
        if distinct.len() != vars.len() {
            return bad("published variable names collide".into());
        }
        for (name, p) in &w.objects {
            if p.len() != dim || p.iter().any(|x| !x.is_finite()) {
                return bad(format!("object `{name}` position does not match the robot's dimension"));
            }
        }
        if let Some(h) = &w.held {
            if !w.objects.contains_key(h) {
                return bad(format!("held object `{h}` does not exist"));
            }
        }
        Ok(())
    }

    /// Publishes the observable variables for a world state.
    pub fn snapshot(&self, t: i64, w: &WorldState, rng: Option<&mut ChaCha8Rng>) -> StateSnapshot {
        let n = &self.names;
        let dim = w.position.len();
        let mut position = w.position.clone();
        if let (Some(rng), true) = (rng, self.noise > 0.0) {
            for x in &mut position {
                *x += rng.gen_range(-self.noise..=self.noise);
            }
        }
        let mut bindings = vec![
            Binding::observable(n.position.clone(), TypedValue::Pos(position)),
            Binding::observable(n.heading.clone(), TypedValue::Angl(w.heading)),
            Binding::observable(
                n.gripper.clone(),
                TypedValue::Product(vec![
                    TypedValue::Obj(w.held.clone().unwrap_or_else(|| "none".into())),
                    TypedValue::Bool(w.held.is_some()),
                ]),
            ),
            Binding::observable(
                n.object_count.clone(),
                TypedValue::Num((w.objects.len() + self.obstacles.len()) as f64),
            ),
        ];
        let located = w
            .objects
            .iter()
            .map(|(k, p)| (k.clone(), p.clone()))
            .chain(self.obstacles.iter().map(|o| (o.name.clone(), o.center(dim))));
        for (name, p) in located {
            bindings.push(Binding::observable(
                format!("{}{name}", n.object_prefix),
                TypedValue::Product(vec![TypedValue::Obj(name), TypedValue::Pos(p)]),
            ));
        }
        StateSnapshot::new(t, bindings)
    }

    fn reachable(&self, w: &WorldState) -> Vec<String> {
        w.objects
            .iter()
            .filter(|(_, p)| planar_distance(p, &w.position) <= self.grab_radius)
            .map(|(k, _)| k.clone())
            .collect()
    }
}

fn planar_distance(a: &[f64], b: &[f64]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// What happened when a command was applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    /// The move would end inside an obstacle; nothing changed.
    Blocked,
}

/// Applies one command. Illegal gripper use is an error; blocked moves are no-ops.
pub fn apply_command(scenario: &Scenario, w: &WorldState, cmd: &Command) -> Result<(WorldState, Outcome), SimError> {
    let mut next = w.clone();
    match cmd {
        Command::MoveForward(x) => {
            if !x.is_finite() {
                return Err(SimError::InvalidCommand(format!("move distance {x}")));
            }
            let (s, c) = sin_cos_deg(w.heading);
            next.position[0] += w.speed * x * s;
            next.position[1] += w.speed * x * c;
            if scenario.blocked(&next.position) {
                return Ok((w.clone(), Outcome::Blocked));
            }
            if let Some(h) = &w.held {
                next.objects.insert(h.clone(), next.position.clone());
            }
        }
        Command::TurnLeft(g) | Command::TurnRight(g) => {
            if !(0.0..360.0).contains(g) {
                return Err(SimError::InvalidCommand(format!("turn angle {g} outside [0, 360)")));
            }
            let signed = if matches!(cmd, Command::TurnLeft(_)) { *g } else { -*g };
            next.heading = normalize_heading(w.heading + signed);
        }
        Command::Grab(o) => {
            if !w.objects.contains_key(o) {
                if scenario.obstacles.iter().any(|ob| &ob.name == o) {
                    return Err(SimError::NotGrabbable(o.clone()));
                }
                return Err(SimError::UnknownObject(o.clone()));
            }
            if let Some(h) = &w.held {
                return Err(SimError::GripperFull(h.clone()));
            }
            if planar_distance(&w.objects[o], &w.position) > scenario.grab_radius {
                return Err(SimError::OutOfReach(o.clone()));
            }
            next.held = Some(o.clone());
            next.objects.insert(o.clone(), w.position.clone());
        }
        Command::Drop(o) => match &w.held {
            None => return Err(SimError::GripperEmpty),
            Some(h) if h != o => return Err(SimError::NotHeld(o.clone())),
            Some(_) => {
                next.held = None;
                next.objects.insert(o.clone(), w.position.clone());
            }
        },
    }
    Ok((next, Outcome::Done))
}

/// Runs a script: snapshot at t=1, then each command at an even timestamp
/// followed by its posterior snapshot at the next odd one.
pub fn run_script(scenario: &Scenario, script: &[Command], seed: u64) -> Result<Sample, SimError> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut world = scenario.initial.clone();
    let mut snapshots = vec![scenario.snapshot(1, &world, Some(&mut rng))];
    let mut actions = Vec::with_capacity(script.len());
    for (i, cmd) in script.iter().enumerate() {
        let t = 2 * i as i64 + 2;
        match apply_command(scenario, &world, cmd) {
            Ok((next, _)) => world = next,
            Err(e) if e.is_action_failure() => {}
            Err(e) => return Err(e),
        }
        actions.push(ActionRecord::new(cmd.name(), t, cmd.params()));
        snapshots.push(scenario.snapshot(t + 1, &world, Some(&mut rng)));
    }
    Ok(Sample::new(snapshots, actions)?)
}

const TURN_ANGLES: [f64; 8] = [15.0, 30.0, 45.0, 60.0, 90.0, 120.0, 135.0, 150.0];

pub fn random_policy(scenario: &Scenario, n_steps: usize, seed: u64) -> CommandScript {
    random_policy_with(scenario, n_steps, seed, &ActionKind::ALL)
}

/// Pseudo-random legal commands drawn from `kinds`.
///
/// Grab and drop are only issued when they would succeed; moves may run into
/// obstacles.
pub fn random_policy_with(scenario: &Scenario, n_steps: usize, seed: u64, kinds: &[ActionKind]) -> CommandScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut world = scenario.initial.clone();
    let mut script = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let reach = scenario.reachable(&world);
        let mut options: Vec<(ActionKind, u32)> = Vec::new();
        for k in kinds {
            let weight = match k {
                ActionKind::MoveForward => 4,
                ActionKind::TurnLeft | ActionKind::TurnRight => 2,
                ActionKind::Grab if world.held.is_none() && !reach.is_empty() => 6,
                ActionKind::Drop if world.held.is_some() => 3,
                _ => 0,
            };
            if weight > 0 {
                options.push((*k, weight));
            }
        }
        if options.is_empty() {
            break;
        }
        let total: u32 = options.iter().map(|(_, w)| w).sum();
        let mut pick = rng.gen_range(0..total);
        let kind = options
            .iter()
            .find(|(_, w)| {
                if pick < *w {
                    true
                } else {
                    pick -= w;
                    false
                }
            })
            .map(|(k, _)| *k)
            .expect("pick below total");
        let cmd = match kind {
            ActionKind::MoveForward => Command::MoveForward(rng.gen_range(1..=3) as f64),
            ActionKind::TurnLeft => Command::TurnLeft(TURN_ANGLES[rng.gen_range(0..TURN_ANGLES.len())]),
            ActionKind::TurnRight => Command::TurnRight(TURN_ANGLES[rng.gen_range(0..TURN_ANGLES.len())]),
            ActionKind::Grab => Command::Grab(reach[rng.gen_range(0..reach.len())].clone()),
            ActionKind::Drop => Command::Drop(world.held.clone().expect("drop only offered while holding")),
        };
        if let Ok((next, _)) = apply_command(scenario, &world, &cmd) {
            world = next;
        }
        script.push(cmd);
    }
    script
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    position: Vec<f64>,
    #[serde(default)]
    heading: f64,
    #[serde(default = "default_speed")]
    speed: f64,
    #[serde(default = "default_grab_radius")]
    grab_radius: f64,
    #[serde(default)]
    noise: f64,
    bounds: Option<Bounds>,
    #[serde(default)]
    obstacle: Vec<Obstacle>,
    #[serde(default)]
    object: Vec<ObjectEntry>,
    #[serde(default)]
    names: VariableNames,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectEntry {
    name: String,
    position: Vec<f64>,
}

fn default_speed() -> f64 {
    2.0
}

fn default_grab_radius() -> f64 {
    3.0
}

/// Parses a TOML scenario description.
pub fn parse_scenario(text: &str) -> Result<Scenario, SimError> {
    let f: ScenarioFile = toml::from_str(text).map_err(|e| SimError::ScenarioFile(e.to_string()))?;
    let scenario = Scenario {
        name: f.name,
        initial: WorldState {
            position: f.position,
            heading: f.heading,
            held: None,
            objects: f.object.into_iter().map(|o| (o.name, o.position)).collect(),
            speed: f.speed,
        },
        obstacles: f.obstacle,
        bounds: f.bounds,
        grab_radius: f.grab_radius,
        names: f.names,
        noise: f.noise,
    };
    scenario.validate()?;
    Ok(scenario)
}

const TWO_OBSTACLES: &str = r#"
name = "two-obstacles"
position = [10.0, 10.0]
heading = 90.0
speed = 2.0
grab_radius = 4.0
bounds = { min = [0.0, 0.0], max = [20.0, 20.0] }

[[obstacle]]
name = "obst_w"
min = [3.0, 7.0]
max = [5.0, 13.0]

[[obstacle]]
name = "obst_e"
min = [15.0, 7.0]
max = [17.0, 13.0]

[[object]]
name = "ball"
position = [11.0, 10.0]

[[object]]
name = "cube"
position = [9.0, 4.0]

[[object]]
name = "cup"
position = [10.0, 16.0]
"#;

const CLUTTERED_DESK: &str = r#"
name = "cluttered-desk"
position = [10.0, 10.0]
heading = 0.0
speed = 2.0
grab_radius = 4.0
bounds = { min = [0.0, 0.0], max = [20.0, 20.0] }

[[obstacle]]
name = "lamp"
min = [2.0, 2.0]
max = [4.0, 4.0]

[[obstacle]]
name = "monitor"
min = [8.0, 16.0]
max = [12.0, 18.0]

[[obstacle]]
name = "mug"
min = [16.0, 3.0]
max = [17.0, 4.0]

[[object]]
name = "ball"
position = [11.0, 10.0]

[[object]]
name = "cube"
position = [5.0, 12.0]

[[object]]
name = "pen"
position = [15.0, 9.0]
"#;

const TWO_OBSTACLES_3D: &str = r#"
name = "two-obstacles-3d"
position = [10.0, 10.0, 0.5]
heading = 90.0
speed = 2.0
grab_radius = 4.0
bounds = { min = [0.0, 0.0], max = [20.0, 20.0] }

[[obstacle]]
name = "obst_w"
min = [3.0, 7.0]
max = [5.0, 13.0]

[[obstacle]]
name = "obst_e"
min = [15.0, 7.0]
max = [17.0, 13.0]

[[object]]
name = "ball"
position = [11.0, 10.0, 0.0]
"#;

pub const BUILTIN_SCENARIOS: &[&str] = &["two-obstacles", "two-obstacles-3d", "cluttered-desk"];

pub fn builtin_scenario(name: &str) -> Result<Scenario, SimError> {
    let text = match name {
        "two-obstacles" => TWO_OBSTACLES,
        "two-obstacles-3d" => TWO_OBSTACLES_3D,
        "cluttered-desk" => CLUTTERED_DESK,
        other => return Err(SimError::UnknownScenario(other.to_string())),
    };
    parse_scenario(text)
}

/// A built-in scenario name, or a path to a scenario file.
pub fn resolve_scenario(name_or_path: &str) -> Result<Scenario, SimError> {
    if BUILTIN_SCENARIOS.contains(&name_or_path) {
        return builtin_scenario(name_or_path);
    }
    let path = Path::new(name_or_path);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::ScenarioFile(e.to_string()))?;
        return parse_scenario(&text);
    }
    Err(SimError::UnknownScenario(name_or_path.to_string()))
}
