//! Simulation and analysis toolkit for universal coating by self-organizing
//! particles on the triangular grid.

pub mod analysis;
pub mod coating;
pub mod grid;
pub mod harness;
pub mod model;
pub mod scheduler;
