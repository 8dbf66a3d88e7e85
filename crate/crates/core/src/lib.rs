pub mod app;
pub mod datetime;
pub mod dsl;
pub mod eval;
pub mod interp;
pub mod nl;
pub mod registry;
pub mod service;
pub mod session;
pub mod types;
pub mod ui;
pub mod value;
