//! Scenario files: a single TOML document describing the world, the
//! reference path, the robot, gains, and run settings. Unknown keys are
//! rejected so that typos fail loudly.

use std::path::Path;

use serde::Deserialize;

use unicycle_motion::geom::ConvexSet;
use unicycle_motion::govern::{GovernorGains, ReferencePath, World};
use unicycle_motion::predict::PredictionMethod;
use unicycle_motion::simulate::IntegratorSettings;
use unicycle_motion::unicycle::{ControlGains, SteeringMode, UnicycleState};
use unicycle_motion::Vec2;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub world: Option<WorldSection>,
    #[serde(default)]
    pub path: Option<PathSection>,
    #[serde(default)]
    pub initial: Option<InitialSection>,
    #[serde(default)]
    pub gains: GainsSection,
    #[serde(default)]
    pub governor: GovernorSection,
    #[serde(default)]
    pub prediction: PredictionSection,
    #[serde(default)]
    pub steering: SteeringSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSection {
    /// Convex workspace polygon vertices.
    pub workspace: Vec<[f64; 2]>,
    pub robot_radius: f64,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum ObstacleSection {
    Disk { center: [f64; 2], radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSection {
    pub waypoints: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub position: [f64; 2],
    #[serde(default)]
    pub orientation: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub kv: f64,
    pub kw: f64,
}

impl Default for GainsSection {
    fn default() -> Self {
        GainsSection { kv: 1.0, kw: 2.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovernorSection {
    pub k_eps: f64,
    pub k_s: f64,
}

impl Default for GovernorSection {
    fn default() -> Self {
        GovernorSection {
            k_eps: 4.0,
            k_s: 4.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionSection {
    #[serde(default)]
    pub method: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteeringSection {
    #[serde(default)]
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_step: Option<f64>,
    pub max_time: Option<f64>,
    pub goal_eps: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub goal: [f64; 2],
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

fn default_snapshots() -> usize {
    8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default)]
    pub multistart: usize,
}

fn default_orders() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_grid_size() -> usize {
    2001
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            orders: default_orders(),
            grid_size: default_grid_size(),
            multistart: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".to_string(),
        }
    }
}

/// A parsed, cross-validated scenario with library-level types.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub world: Option<World>,
    pub path: Option<ReferencePath>,
    pub initial: Option<UnicycleState>,
    pub gains: ControlGains,
    pub governor: GovernorGains,
    pub method: Option<PredictionMethod>,
    pub mode: SteeringMode,
    pub integrator: IntegratorSettings,
    pub simulate_goal: Option<Vec2>,
    pub snapshots: usize,
    pub fit: FitSection,
    pub output_dir: String,
}

pub fn parse_method(name: &str) -> Result<PredictionMethod, CliError> {
    match name {
        "ball" => Ok(PredictionMethod::Ball),
        "cone" => Ok(PredictionMethod::Cone),
        "diamond" => Ok(PredictionMethod::Diamond),
        "reachable" => Ok(PredictionMethod::ForwardReachable),
        other => Err(CliError::Validation(format!(
            "unknown prediction method '{other}' (expected ball|cone|diamond|reachable)"
        ))),
    }
}

pub fn parse_mode(name: &str) -> Result<SteeringMode, CliError> {
    match name {
        "bi" => Ok(SteeringMode::Bidirectional),
        "fwd" => Ok(SteeringMode::Forward),
        "bwd" => Ok(SteeringMode::Backward),
        other => Err(CliError::Validation(format!(
            "unknown steering mode '{other}' (expected bi|fwd|bwd)"
        ))),
    }
}

fn vec2(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

/// Load, schema-check, and cross-validate a scenario file. When the file
/// defines both a world and a path, the path clearance hypothesis is
/// checked here.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Validation(format!("cannot read scenario {}: {e}", path.display()))
    })?;
    let file: ScenarioFile = toml::from_str(&text).map_err(|e| {
        // toml errors carry line/column context in their display.
        CliError::Validation(format!("scenario {}: {e}", path.display()))
    })?;
    build_scenario(file)
}

pub fn build_scenario(file: ScenarioFile) -> Result<Scenario, CliError> {
    let world = file
        .world
        .map(|w| -> Result<World, CliError> {
            let vertices: Vec<Vec2> = w.workspace.iter().copied().map(vec2).collect();
            let workspace = ConvexSet::convex_polygon(&vertices)
                .map_err(|e| CliError::Validation(format!("workspace: {e}")))?;
            let mut obstacles = Vec::new();
            for (i, obs) in w.obstacles.iter().enumerate() {
                let set = match obs {
                    ObstacleSection::Disk { center, radius } => {
                        ConvexSet::disk(vec2(*center), *radius)
                    }
                    ObstacleSection::Polygon { vertices } => {
                        let pts: Vec<Vec2> = vertices.iter().copied().map(vec2).collect();
                        ConvexSet::convex_polygon(&pts)
                    }
                }
                .map_err(|e| CliError::Validation(format!("obstacle {i}: {e}")))?;
                obstacles.push(set);
            }
            World::new(workspace, obstacles, w.robot_radius)
                .map_err(|e| CliError::Validation(format!("world: {e}")))
        })
        .transpose()?;

    let path = file
        .path
        .map(|p| {
            ReferencePath::new(p.waypoints.iter().copied().map(vec2).collect())
                .map_err(|e| CliError::Validation(format!("path: {e}")))
        })
        .transpose()?;

    // Clearance hypothesis is part of scenario validity.
    if let (Some(world), Some(path)) = (&world, &path) {
        path.validate_clearance(world)
            .map_err(|e| CliError::Validation(format!("path: {e}")))?;
    }

    let initial = match (&file.initial, &path) {
        (Some(init), _) => Some(UnicycleState::new(vec2(init.position), init.orientation)),
        (None, Some(p)) => Some(UnicycleState::new(p.point_at(0.0), 0.0)),
        (None, None) => None,
    };

    let gains = ControlGains::new(file.gains.kv, file.gains.kw)
        .map_err(|e| CliError::Validation(format!("gains: {e}")))?;
    let governor = GovernorGains::new(file.governor.k_eps, file.governor.k_s)
        .map_err(|e| CliError::Validation(format!("governor: {e}")))?;

    let method = file
        .prediction
        .method
        .as_deref()
        .map(parse_method)
        .transpose()?;
    let mode = file
        .steering
        .mode
        .as_deref()
        .map(parse_mode)
        .transpose()?
        .unwrap_or(SteeringMode::Bidirectional);

    let defaults = IntegratorSettings::default();
    let integrator = IntegratorSettings {
        rel_tol: file.integrator.rel_tol.unwrap_or(defaults.rel_tol),
        abs_tol: file.integrator.abs_tol.unwrap_or(defaults.abs_tol),
        max_step: file.integrator.max_step.unwrap_or(defaults.max_step),
        max_time: file.integrator.max_time.unwrap_or(defaults.max_time),
        goal_eps: file.integrator.goal_eps.or(defaults.goal_eps),
    };
    integrator
        .validate()
        .map_err(|e| CliError::Validation(format!("integrator: {e}")))?;

    for order in &file.fit.orders {
        if !(1..=3).contains(order) {
            return Err(CliError::Validation(format!(
                "fit: order {order} not in 1..=3"
            )));
        }
    }

    Ok(Scenario {
        world,
        path,
        initial,
        gains,
        governor,
        method,
        mode,
        integrator,
        simulate_goal: file.simulate.as_ref().map(|s| vec2(s.goal)),
        snapshots: file.simulate.as_ref().map_or(8, |s| s.snapshots),
        fit: file.fit,
        output_dir: file.output.dir,
    })
}

impl Scenario {
    pub fn require_world(&self) -> Result<&World, CliError> {
        self.world
            .as_ref()
            .ok_or_else(|| CliError::Validation("scenario has no [world] section".into()))
    }

    pub fn require_path(&self) -> Result<&ReferencePath, CliError> {
        self.path
            .as_ref()
            .ok_or_else(|| CliError::Validation("scenario has no [path] section".into()))
    }

    pub fn require_initial(&self) -> Result<&UnicycleState, CliError> {
        self.initial
            .as_ref()
            .ok_or_else(|| CliError::Validation("scenario has no [initial] section".into()))
    }

    pub fn require_goal(&self) -> Result<Vec2, CliError> {
        self.simulate_goal
            .ok_or_else(|| CliError::Validation("scenario has no [simulate] goal".into()))
    }
}
