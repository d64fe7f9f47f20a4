pub mod bench;
pub mod formulations;
pub mod instance;
pub mod schedule;
pub mod solver;
