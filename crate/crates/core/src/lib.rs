//! Computational tools for non-additive neutralized Bowen topological
//! pressure on subshifts of finite type and expanding circle maps.

pub mod config;
pub mod cover;
pub mod frostman;
pub mod harness;
pub mod measures;
pub mod potentials;
pub mod systems;
