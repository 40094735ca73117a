//! File formats: g2o pose graphs with a multi-robot ID convention, TUM
//! trajectories, and machine-readable JSON solve reports.

pub mod g2o;
pub mod report;
pub mod tum;

pub use g2o::{parse_g2o, parse_g2o_bytes, write_g2o, DEFAULT_ROBOT_ID_STRIDE};
pub use report::{improvement_percent, write_report, SolveReport, TrafficSummary};
pub use tum::{parse_tum, write_tum};
