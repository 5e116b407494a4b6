//! k-best enumeration for optimization problems on graphs of bounded treewidth.

pub mod algebra;
pub mod error;
pub mod eval;
pub mod graph;
pub mod kbest;
pub mod oracle;
pub mod persist;
pub mod problems;
pub mod treedec;
