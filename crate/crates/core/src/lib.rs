pub mod chemo;
pub mod fluid;
pub mod functionals;
pub mod grid;
pub mod linsolve;
pub mod oracles;
pub mod runner;
