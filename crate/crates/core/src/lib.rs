//! Symbolic construction and verification of conservation laws for scalar
//! (1+1)-dimensional PDEs via multipliers.

pub mod calculus;
pub mod cli;
pub mod conslaw;
pub mod detsys;
pub mod jet;
pub mod linsolve;
pub mod numcheck;
pub mod pde;
pub mod rational;

pub use jet::{Direction, JetCoordinate, JetExpression};
pub use pde::{parse_pde, PdeSpec, Shape};
pub use rational::Rational;
