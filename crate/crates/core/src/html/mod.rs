//! The HTML engine: a recovery parser, human/machine text extraction,
//! policy-fragment rendering, and invariance-checked injection.

pub mod dom;
pub mod extract;
pub mod inject;
pub mod policy;

pub use dom::DomTree;
pub use extract::{extract_visible, ViewProfile};
pub use inject::{inject, verify_invariance, InjectionOutcome, InvarianceCheck};
pub use policy::{render_policy, PolicyFragment};
