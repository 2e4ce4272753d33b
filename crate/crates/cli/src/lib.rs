//! Experiment harness for the zip tree library.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod run;
pub mod svg;
pub mod table;
