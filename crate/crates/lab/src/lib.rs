//! Std companion to `trustgame-core`: record files and CSV exports, worker
//! pools for batches, fits and confusion runs, run manifests, and the HTTP
//! session service, plus the command-line front end.

pub mod cli;
pub mod config;
pub mod io;
pub mod manifest;
pub mod parallel;
pub mod service;
pub mod session;
