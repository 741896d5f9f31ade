//! Topological maps compiled from natural-language route instructions.
//!
//! Instructions are read into canonical paths (waypoints plus a turn action
//! at each interior waypoint), merged into a [`topo_map::TopoMap`] whose
//! unstated actions are inferred algebraically, and queried with
//! [`router::find_route`]. Routes are rendered back to text with
//! [`instruction::generate_instruction`].

#![allow(clippy::result_large_err)]

pub mod action;
pub mod canonical;
pub mod cli;
pub mod envsim;
pub mod evaluator;
pub mod instruction;
pub mod llm;
mod relation;
pub mod router;
pub mod topo_map;
