pub mod error;
pub mod estimators;
pub mod experiments;
pub mod population;
pub mod samplers;
pub mod seed;
pub mod stats;
pub mod subsampling;
