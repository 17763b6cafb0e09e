//! Experiment harness, file formats and command-line front end for
//! [`stc_core`].

pub mod config;
pub mod experiment;
pub mod formats;
pub mod oracle_check;
pub mod report;
