pub mod baselines;
pub mod driver;
pub mod gen;
pub mod predicate;
pub mod problem;
pub mod program;
pub mod prover;
pub mod smt;
