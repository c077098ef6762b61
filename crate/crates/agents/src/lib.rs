//! Translator agents and the dispatcher that routes user questions between
//! them and the explanation framework.

pub mod dispatch;
pub mod prompts;
pub mod provider;
pub mod template;
pub mod translate;

pub use dispatch::{AgentContext, AgentError, Conversation, Dispatcher, GoalOutcome, Turn, UserInput};
pub use provider::{HttpProvider, LoggedProvider, MockProvider, Provider, ProviderError, ProviderRequest};
pub use translate::{Route, RoutingDecision};
