//! Core domain model for the anti-retrieval defense toolkit: raw/rendered page
//! representations, defense goals and policies, text similarity measures, the
//! disclosure objective, and the HTML engine that embeds policies into pages
//! without changing what a human visitor sees.

pub mod error;
pub mod manifest;
pub mod model;
pub mod objective;
pub mod similarity;
pub mod text;

pub mod html;

pub use error::CoreError;
pub use model::{
    DefenseGoal, DefensePolicy, InjectionSpec, ObjectiveScore, Position, Query, QueryKind,
    RawHtml, Stage, Tone, Visibility,
};
pub use similarity::Measure;
pub use text::RenderedText;
