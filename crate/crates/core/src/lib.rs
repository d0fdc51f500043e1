pub mod agents;
pub mod analysis;
pub mod backends;
pub mod engine;
pub mod prompts;
pub mod runner;
pub mod seed;
pub mod tracestore;
