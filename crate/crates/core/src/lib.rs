//! Stochastic bubbles in economies with unbalanced growth: a land economy
//! with closed-form prices, an endogenous-innovation economy, a truncation
//! oracle for fundamental values and a deterministic Monte Carlo driver.

pub mod innovation_model;
pub mod io;
pub mod oracle;
pub mod params;
pub mod sim_engine;
pub mod toy_model;

pub use innovation_model::{Asymptotics, BgpSolution, Corner, InnoPathPoint, InnovationError, TauSolution};
pub use oracle::{OracleError, OracleModel, TruncationCertificate};
pub use params::{
    draw_collapse_date, draw_regime_path, draw_replication_path, validate_innovation, validate_toy,
    InnovationParams, InnovationReport, PathError, Regime, RegimePath, SecondAsset, SpilloverClass, ToyParams,
    ValidationError, Violation,
};
pub use sim_engine::{McConfig, McSummary, ModelConfig};
pub use toy_model::{BubbleDecomposition, ToyError, ToyPathPoint};
