//! World construction: parameters, node placement and constellation motion.

mod config;
pub mod orbit;
pub mod placement;

pub use config::{
    AlgorithmConfig, BandConfig, BandSection, ConstellationConfig, HandoverMode, PowerConfig,
    PowerSection, Scenario, ScenarioConfig, SicReading, TbsLayout,
};
pub use orbit::{elevation_angle, ConstellationState, VisibilityReport, WalkerShell};
pub use placement::Nodes;
