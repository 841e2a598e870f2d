//! Rooted planar maps: exact counts, pattern occurrences, intersection types,
//! asymptotic constants of pattern counts, and uniform sampling.

pub mod asymptotics;
pub mod enumeration;
pub mod intersections;
pub mod map_core;
pub mod sampler;
pub mod series;
