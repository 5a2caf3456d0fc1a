//! Session service for running the explanation-ordering loop with people.
//!
//! A participant works through the items of a [`TaskBundle`]: they pick an
//! intended action, see the support model's prediction, request explanations
//! one at a time in the order chosen by their session's arm, and submit a
//! final action. Ardent sessions update their particle posterior after every
//! item. Every state change is appended to a per-session event log from
//! which the session can be replayed exactly.

pub mod bundle;
pub mod error;
pub mod http;
pub mod session;
pub mod store;

pub use bundle::{ContextBucketing, LoadedBundle, TaskBundle, TaskItem};
pub use error::{Result, ServiceError};
pub use http::{router, serve};
pub use session::{Arm, Event, EventBody, Session, SessionParams};
pub use store::{read_log, ArmRequest, CreateRequest, ServiceConfig, SessionStore};
