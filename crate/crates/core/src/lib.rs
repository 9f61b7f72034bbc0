//! Kinematics and workspace analysis for the ATHENA-1 and ATHENA-2 4-DOF
//! parallel robots for minimally invasive surgery.

pub mod config;
pub mod error;
pub mod jacobian;
pub mod kinematics;
pub mod rcm;
pub mod stiffness;
pub mod workspace;

pub use config::{default_geometry, load_config, Config, GeometryParams, JointLimits};
pub use error::{Error, ReasonCode, Result};
pub use kinematics::{Arch, Branch, ChainVariant, JointVector, Residuals, SolveOptions};
pub use rcm::{pose_to_tip, tip_to_pose, TaskPose, TipPoint};
