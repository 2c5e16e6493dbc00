//! State-space reduction of weighted parametric MDPs by graph-based
//! inference of never-worse relations.

pub mod analysis;
pub mod deweight;
pub mod etr;
pub mod graph;
pub mod io;
pub mod mc_equiv;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod poly;
pub mod quotient;
pub mod reduce;
pub mod report;
pub mod samples;
pub mod solver;
pub mod ua;
pub mod valuation;
