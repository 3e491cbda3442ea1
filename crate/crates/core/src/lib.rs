pub mod data;
pub mod evalcli;
pub mod metrics;
pub mod models;
pub mod signal;
pub mod training;
