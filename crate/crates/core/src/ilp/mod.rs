//! Tracking and ground-truth selection programs, their exact solver, LP
//! export, and lineage decoding.

mod gt_selection;
mod lineage;
mod lp;
mod model;
mod solver;
mod tracking;

pub use gt_selection::{build_gt_selection_model, select_ground_truth, GtSelectionModel};
pub use lineage::{build_lineage, check_solution, Lineage};
pub use lp::{export_lp, format_lp, parse_lp};
pub use model::{Block, Constraint, Model, Outflow, Sense};
pub use solver::{solve, Solution, SolveOptions, SolveStatus};
pub use tracking::{build_tracking_model, FrameStructure, Penalties, Pin, PinVar, Selection, TrackingModel};
