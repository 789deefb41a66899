//! Deterministic simulation and control core for mid-air ultrasound haptics
//! carried by teams of tabletop robots.

pub mod acoustics;
pub mod config;
pub mod format;
pub mod geometry;
pub mod platform;
pub mod robot_sim;
pub mod scenarios;
pub mod session;
pub mod tracking;
