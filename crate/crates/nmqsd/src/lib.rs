pub mod config;
pub mod error;
pub mod output;
pub mod parallel;
pub mod runner;
pub mod svg;
pub mod tables_io;
