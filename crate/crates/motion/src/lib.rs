//! Unicycle motion control via angular feedback linearization, closed-form
//! total turning effort, feedback motion prediction sets (ball, cone,
//! diamond, forward-reachable), and time-governed safe path following
//! around obstacles.

pub mod geom;
pub mod govern;
pub mod predict;
pub mod simulate;
pub mod turning;
pub mod unicycle;

pub use geom::{Angle, ConvexSet, Disk, Vec2};
pub use govern::{
    follow_path, free_space_distance, FollowResult, FollowSettings, GovernedState, GovernorGains,
    ReferencePath, World,
};
pub use predict::{predict, MotionPrediction, PredictionMethod};
pub use simulate::{integrated_turning, simulate_to_goal, IntegratorSettings, Trajectory};
pub use turning::{
    final_orientation, fit_si_sinusoids, sine_integral, total_turning, turning_report, SiFit,
};
pub use unicycle::{ControlGains, ControlInput, SteeringMode, UnicycleState};
