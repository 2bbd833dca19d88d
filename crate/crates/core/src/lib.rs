pub mod ad;
pub mod discretization;
pub mod geometry;
pub mod sparse;
pub mod physics;
pub mod solver;
pub mod mms;
pub mod config;
pub mod export;
pub mod scenario;
