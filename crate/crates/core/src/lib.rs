//! Core of the tagmill annotation platform.

pub mod analytics;
pub mod catalog;
pub mod clock;
pub mod error;
pub mod export;
pub mod interning;
pub mod model;
pub mod platform;
pub mod preannotation;
pub mod review;
pub mod scheduler;
pub mod search;
pub mod store;

pub use error::{Error, Result};
pub use platform::Platform;
pub use store::{FaultPoint, Store, StoreOptions};
