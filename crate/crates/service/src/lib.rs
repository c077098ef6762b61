//! HTTP service for goal-conflict planning projects: projects and goals,
//! iteration steps planned by background jobs, question answering and a
//! server-sent event stream, all persisted to a document store.

pub mod api;
pub mod app;
pub mod config;
pub mod error;
pub mod store;
pub mod wire;

pub use api::{router, serve};
pub use app::{App, Options};
pub use config::Config;
pub use error::ApiError;
pub use store::{DocumentStore, FileStore, MemoryStore, StoreError};
