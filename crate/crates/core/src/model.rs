//! Shared domain types: pages, defense goals, policies, queries, and
//! objective scores.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::CoreError;
use crate::text::normalize;

/// A webpage exactly as served: markup, head, scripts and all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RawHtml(String);

impl RawHtml {
    /// Wrap a non-empty HTML document.
    pub fn new(html: impl Into<String>) -> Result<Self, CoreError> {
        let html = html.into();
        if html.trim().is_empty() {
            return Err(CoreError::InvalidPage("empty HTML document".into()));
        }
        Ok(RawHtml(html))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

/// Where a policy fragment is placed in the page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Position {
    /// First element of the body (head, for meta-tag fragments).
    Top,
    /// After the ⌈n/2⌉-th element child of the body.
    Middle,
    /// Last element of the body.
    Bottom,
}

impl Position {
    pub const ALL: [Position; 3] = [Position::Top, Position::Middle, Position::Bottom];

    pub fn name(self) -> &'static str {
        match self {
            Position::Top => "top",
            Position::Middle => "middle",
            Position::Bottom => "bottom",
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Position {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "top" => Ok(Position::Top),
            "middle" => Ok(Position::Middle),
            "bottom" => Ok(Position::Bottom),
            other => Err(CoreError::unknown("position", other, "top, middle, bottom")),
        }
    }
}

/// How the policy fragment hides from human visitors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Visibility {
    /// Policy carried in `<meta>` tags in the document head.
    MetaTag,
    /// A `display: none` block (also absolute-positioned, visibility:
    /// hidden, and aria-hidden) in the body.
    HiddenBlock,
    /// A block whose text color is fully transparent: absent from the
    /// human-visible rendering, but present in the rendered DOM text that
    /// lightweight page parsers read.
    TransparentText,
}

impl Visibility {
    pub const ALL: [Visibility; 3] = [
        Visibility::MetaTag,
        Visibility::HiddenBlock,
        Visibility::TransparentText,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Visibility::MetaTag => "meta-tag",
            Visibility::HiddenBlock => "hidden-block",
            Visibility::TransparentText => "transparent-text",
        }
    }
}

impl fmt::Display for Visibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Visibility {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "meta-tag" => Ok(Visibility::MetaTag),
            "hidden-block" => Ok(Visibility::HiddenBlock),
            "transparent-text" => Ok(Visibility::TransparentText),
            other => Err(CoreError::unknown(
                "visibility",
                other,
                "meta-tag, hidden-block, transparent-text",
            )),
        }
    }
}

/// Placement of an injected policy fragment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionSpec {
    pub position: Position,
    pub visibility: Visibility,
}

impl Default for InjectionSpec {
    /// Top placement in a hidden block: the strongest configuration
    /// observed against machine-view attackers.
    fn default() -> Self {
        InjectionSpec {
            position: Position::Top,
            visibility: Visibility::HiddenBlock,
        }
    }
}

/// What the defense wants retrieval-enabled models to do with the page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DefenseGoal {
    /// Refuse to share anything from the page.
    Refusal,
    /// Share only an allowed subset of the page's facts.
    PartialMask { allowed: Vec<String> },
    /// Point the user at a different URL instead of page content.
    Redirect { url: String },
}

impl DefenseGoal {
    pub fn refusal() -> Self {
        DefenseGoal::Refusal
    }

    /// Partial-mask goal; the allowed subset must be non-empty. Fact strings
    /// are stored normalized so they compare equal to extracted facts.
    pub fn partial_mask(allowed: Vec<String>) -> Result<Self, CoreError> {
        if allowed.is_empty() {
            return Err(CoreError::InvalidGoal(
                "partial-mask goal requires a non-empty allowed subset".into(),
            ));
        }
        let allowed = allowed.iter().map(|f| normalize(f)).collect();
        Ok(DefenseGoal::PartialMask { allowed })
    }

    /// Redirect goal; the URL must be syntactically valid and absolute.
    pub fn redirect(url: impl Into<String>) -> Result<Self, CoreError> {
        let url = url.into();
        Url::parse(&url)
            .map_err(|e| CoreError::InvalidGoal(format!("redirect URL `{url}`: {e}")))?;
        Ok(DefenseGoal::Redirect { url })
    }

    /// Stable label used in reports and CLI arguments.
    pub fn label(&self) -> &'static str {
        match self {
            DefenseGoal::Refusal => "refusal",
            DefenseGoal::PartialMask { .. } => "partial-mask",
            DefenseGoal::Redirect { .. } => "redirect",
        }
    }
}

/// Escalation rung of the defense ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Plain notice, no mandated response.
    Baseline,
    /// Adds an exact response template the reader must echo.
    Iteration2,
    /// Adds repetition, strict enforcement markers, and enforcement metas.
    Iteration3,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Baseline, Stage::Iteration2, Stage::Iteration3];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Baseline => "baseline",
            Stage::Iteration2 => "iteration2",
            Stage::Iteration3 => "iteration3",
        }
    }

    /// The next rung, or `None` at the top of the ladder.
    pub fn next(self) -> Option<Stage> {
        match self {
            Stage::Baseline => Some(Stage::Iteration2),
            Stage::Iteration2 => Some(Stage::Iteration3),
            Stage::Iteration3 => None,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Stage::Baseline),
            "iteration2" => Ok(Stage::Iteration2),
            "iteration3" => Ok(Stage::Iteration3),
            other => Err(CoreError::unknown(
                "stage",
                other,
                "baseline, iteration2, iteration3",
            )),
        }
    }
}

/// A complete, validated defense policy: the hidden text plus how it is
/// embedded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefensePolicy {
    pub goal: DefenseGoal,
    pub stage: Stage,
    /// The policy notice paragraph (may carry inline markup).
    pub notice_text: String,
    /// Exact response the page mandates (Iteration2 and up).
    pub response_template: Option<String>,
    /// How many times the notice is repeated in the fragment.
    pub repetition_count: u32,
    /// Strict enforcement statements (Iteration3).
    pub strict_markers: Vec<String>,
    pub injection: InjectionSpec,
}

impl DefensePolicy {
    /// Validate the stage invariants:
    /// baseline — no template, single repetition, no markers;
    /// iteration2 — template required;
    /// iteration3 — template, repetition ≥ 2, and markers required.
    pub fn new(
        goal: DefenseGoal,
        stage: Stage,
        notice_text: impl Into<String>,
        response_template: Option<String>,
        repetition_count: u32,
        strict_markers: Vec<String>,
        injection: InjectionSpec,
    ) -> Result<Self, CoreError> {
        let notice_text = notice_text.into();
        if notice_text.trim().is_empty() {
            return Err(CoreError::InvalidPolicy("notice text must be non-empty".into()));
        }
        if repetition_count == 0 {
            return Err(CoreError::InvalidPolicy("repetition count must be ≥ 1".into()));
        }
        match stage {
            Stage::Baseline => {
                if response_template.is_some() {
                    return Err(CoreError::InvalidPolicy(
                        "baseline policies carry no response template".into(),
                    ));
                }
                if repetition_count != 1 {
                    return Err(CoreError::InvalidPolicy(
                        "baseline policies use a single repetition".into(),
                    ));
                }
                if !strict_markers.is_empty() {
                    return Err(CoreError::InvalidPolicy(
                        "baseline policies carry no strict markers".into(),
                    ));
                }
            }
            Stage::Iteration2 => {
                if response_template.is_none() {
                    return Err(CoreError::InvalidPolicy(
                        "iteration2 policies require a response template".into(),
                    ));
                }
            }
            Stage::Iteration3 => {
                if response_template.is_none() {
                    return Err(CoreError::InvalidPolicy(
                        "iteration3 policies require a response template".into(),
                    ));
                }
                if repetition_count < 2 {
                    return Err(CoreError::InvalidPolicy(
                        "iteration3 policies require repetition count ≥ 2".into(),
                    ));
                }
                if strict_markers.is_empty() {
                    return Err(CoreError::InvalidPolicy(
                        "iteration3 policies require strict markers".into(),
                    ));
                }
            }
        }
        Ok(DefensePolicy {
            goal,
            stage,
            notice_text,
            response_template,
            repetition_count,
            strict_markers,
            injection,
        })
    }
}

/// Whether a query opens a session or tries to break a standing refusal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryKind {
    Single,
    BypassFollowup,
}

/// Whether the query names the page outright or asks around it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tone {
    Direct,
    Indirect,
}

/// One user query in an attack session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    /// 1-based round number; round 1 is always the opening single query.
    pub round: u32,
    pub kind: QueryKind,
    pub tone: Tone,
}

impl Query {
    /// Validate the round/kind pairing: round 1 ⇔ single.
    pub fn new(
        text: impl Into<String>,
        round: u32,
        kind: QueryKind,
        tone: Tone,
    ) -> Result<Self, CoreError> {
        if round == 0 {
            return Err(CoreError::InvalidQuery("rounds are 1-based".into()));
        }
        match kind {
            QueryKind::Single if round != 1 => Err(CoreError::InvalidQuery(
                "single queries always open the session at round 1".into(),
            )),
            QueryKind::BypassFollowup if round == 1 => Err(CoreError::InvalidQuery(
                "bypass follow-ups never open a session".into(),
            )),
            _ => Ok(Query { text: text.into(), round, kind, tone }),
        }
    }

    pub fn single(text: impl Into<String>, tone: Tone) -> Self {
        Query { text: text.into(), round: 1, kind: QueryKind::Single, tone }
    }

    pub fn followup(text: impl Into<String>, round: u32) -> Result<Self, CoreError> {
        Query::new(text, round, QueryKind::BypassFollowup, Tone::Direct)
    }
}

/// Breakdown of how badly a response defeats the defense. Lower `j_value`
/// favors the defense; higher favors the attacker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveScore {
    pub j_value: f64,
    /// Similarity of the response to the full visible page text.
    pub disclosure: f64,
    /// Similarity of the response to the allowed subset (partial-mask only).
    pub subset_coverage: f64,
    /// Fraction of protected facts the response reveals.
    pub leakage: f64,
    /// Whether the response contains the redirect URL (redirect only).
    pub redirect_hit: bool,
}
