pub mod geometry;
pub mod encoding;
pub mod uncertainty;
pub mod estimation;
pub mod simulation;
pub mod metrics;
pub mod cli;
