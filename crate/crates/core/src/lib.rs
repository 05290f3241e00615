pub mod acquisition;
pub mod bench;
pub mod error;
pub mod gp;
pub mod inner_opt;
pub mod lbfgs;
pub mod problem;
pub mod region_select;
pub mod regional;
pub mod subset;
pub mod theory;
pub mod turbo;

pub use error::{Error, Result};
