//! Planning-task model, LTLf goals, goal-conflict analysis and explanations.

pub mod conflicts;
pub mod efcc;
pub mod fixtures;
pub mod goalset;
pub mod ltlf;
pub mod model;
pub mod planner;
pub mod session;
pub mod templates;
