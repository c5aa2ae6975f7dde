//! Instance files, random generation, the claim audit and its reports.

pub mod audit;
pub mod gen;
pub mod instance;
pub mod report;

pub use gen::{gen_instance, Profile};
pub use instance::{load_instance, parse_instance, Instance, InstanceFile};
