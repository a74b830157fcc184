//! Finite combinatorial models of chainable, circularly chainable and
//! tree-like continua: graphs with unit-length edges, finite covers and their
//! nerves, distance-2 colorings, vertex splitting, piecewise-linear maps and
//! the hat construction.

pub mod coloring;
pub mod cover;
pub mod graph;
pub mod hat;
pub mod models;
pub mod plmap;
pub mod rational;
pub mod search;
pub mod surgery;
