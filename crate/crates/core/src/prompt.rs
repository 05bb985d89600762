//! Prompt composition: a base instruction, zero to two SOAP examples, and any
//! subset of the context statements, rendered into chat messages.
//!
//! The experiment matrix first varies the number of shots, then adds context
//! statements on top of one chosen shot strategy.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{ShotExample, Transcript};
use crate::soap::render_soap;

pub const TRANSCRIPT_PLACEHOLDER: &str = "{transcript}";

const DEFAULT_PACK: &str = include_str!("../assets/default_prompt_pack.toml");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("{kind} needs {needed} shot examples but the corpus has {available}")]
    InsufficientShots {
        kind: ShotKind,
        needed: usize,
        available: usize,
    },
    #[error("invalid base template: {0}")]
    InvalidTemplate(String),
    #[error("unknown context key {0:?}")]
    UnknownContextKey(String),
    #[error("unknown shot kind {0:?}")]
    UnknownShotKind(String),
    #[error("prompt pack {path}: {message}")]
    Pack { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextKey {
    A,
    B,
    C,
    D,
    Abbrev,
}

impl ContextKey {
    pub const ALL: [ContextKey; 5] = [
        ContextKey::A,
        ContextKey::B,
        ContextKey::C,
        ContextKey::D,
        ContextKey::Abbrev,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ContextKey::A => "a",
            ContextKey::B => "b",
            ContextKey::C => "c",
            ContextKey::D => "d",
            ContextKey::Abbrev => "abbrev",
        }
    }

    /// Scope statements fix the model's role and task; domain statements
    /// encode conventions of the medical field.
    pub fn is_scope(self) -> bool {
        matches!(self, ContextKey::A | ContextKey::B)
    }

    pub fn is_domain(self) -> bool {
        matches!(self, ContextKey::C | ContextKey::D)
    }
}

impl fmt::Display for ContextKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextKey {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ContextKey::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| PromptError::UnknownContextKey(s.to_string()))
    }
}

/// Set of context keys, written as `a+b+c` in configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContextSet(BTreeSet<ContextKey>);

impl ContextSet {
    pub fn new(keys: impl IntoIterator<Item = ContextKey>) -> Self {
        Self(keys.into_iter().collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = ContextKey> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, key: ContextKey) -> bool {
        self.0.contains(&key)
    }
}

impl fmt::Display for ContextSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let keys: Vec<&str> = self.iter().map(ContextKey::as_str).collect();
        f.write_str(&keys.join("+"))
    }
}

impl FromStr for ContextSet {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(['+', ','])
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<BTreeSet<_>, _>>()
            .map(ContextSet)
    }
}

impl Serialize for ContextSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ContextSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ShotKind {
    #[serde(rename = "zero-shot")]
    ZeroShot,
    #[serde(rename = "one-shot")]
    OneShot,
    #[serde(rename = "two-shot")]
    TwoShot,
}

impl ShotKind {
    pub const ALL: [ShotKind; 3] = [ShotKind::ZeroShot, ShotKind::OneShot, ShotKind::TwoShot];

    pub fn example_count(self) -> usize {
        match self {
            ShotKind::ZeroShot => 0,
            ShotKind::OneShot => 1,
            ShotKind::TwoShot => 2,
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            ShotKind::ZeroShot => "zero-shot",
            ShotKind::OneShot => "one-shot",
            ShotKind::TwoShot => "two-shot",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ShotKind::ZeroShot => "Zero-shot",
            ShotKind::OneShot => "One-shot",
            ShotKind::TwoShot => "Two-shot",
        }
    }
}

impl fmt::Display for ShotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for ShotKind {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ShotKind::ALL
            .into_iter()
            .find(|k| k.slug() == s)
            .ok_or_else(|| PromptError::UnknownShotKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseTemplate {
    /// Task instruction; contains [`TRANSCRIPT_PLACEHOLDER`] exactly once.
    pub instruction: String,
    /// Restricts the model to content found in the transcript.
    pub constraint: String,
    /// Describes the expected SOAP layout.
    pub format: String,
}

impl BaseTemplate {
    pub fn validate(&self) -> Result<(), PromptError> {
        let n = self.instruction.matches(TRANSCRIPT_PLACEHOLDER).count();
        if n != 1 {
            return Err(PromptError::InvalidTemplate(format!(
                "instruction must contain {TRANSCRIPT_PLACEHOLDER} exactly once, found {n}"
            )));
        }
        if self.constraint.trim().is_empty() {
            return Err(PromptError::InvalidTemplate("constraint is empty".into()));
        }
        Ok(())
    }

    fn fill(&self, transcript: &str) -> String {
        let (head, tail) = self
            .instruction
            .split_once(TRANSCRIPT_PLACEHOLDER)
            .unwrap_or((&self.instruction, ""));
        let mut out = String::with_capacity(head.len() + transcript.len() + tail.len());
        out.push_str(head);
        out.push_str(transcript);
        out.push_str(tail);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextStatement {
    pub key: ContextKey,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Statements {
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
    pub abbrev_intro: String,
    #[serde(default)]
    pub abbreviations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotStrategy {
    pub kind: ShotKind,
    pub examples: Vec<ShotExample>,
    pub include_transcript: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    #[default]
    Chat,
    Flat,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextPosition {
    #[default]
    Before,
    After,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderStyle {
    #[serde(default)]
    pub layout: Layout,
    #[serde(default)]
    pub context_position: ContextPosition,
    pub example_header: String,
    pub example_transcript_header: String,
    #[serde(default)]
    pub include_transcript_in_shots: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub shot_kinds: Vec<ShotKind>,
    pub best_shot: ShotKind,
    #[serde(default)]
    pub context_sets: Vec<ContextSet>,
    #[serde(default)]
    pub extras: Vec<ContextSet>,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        PromptPack::default().matrix
    }
}

impl MatrixConfig {
    /// Shot variants only, no context statements.
    pub fn shots_only() -> Self {
        Self {
            context_sets: Vec::new(),
            extras: Vec::new(),
            ..Self::default()
        }
    }
}

/// All prompt texts plus the matrix selection, loaded from a TOML file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptPack {
    pub base: BaseTemplate,
    pub statements: Statements,
    pub render: RenderStyle,
    pub matrix: MatrixConfig,
}

impl Default for PromptPack {
    fn default() -> Self {
        toml::from_str(DEFAULT_PACK).expect("shipped default prompt pack parses")
    }
}

impl PromptPack {
    pub fn default_toml() -> &'static str {
        DEFAULT_PACK
    }

    pub fn from_toml(text: &str) -> Result<Self, PromptError> {
        let pack: PromptPack = toml::from_str(text).map_err(|e| PromptError::Pack {
            path: "<inline>".into(),
            message: e.to_string(),
        })?;
        pack.base.validate()?;
        Ok(pack)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PromptError::Pack {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            PromptError::Pack { message, .. } => PromptError::Pack {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn statement(&self, key: ContextKey) -> ContextStatement {
        let text = match key {
            ContextKey::A => self.statements.a.clone(),
            ContextKey::B => self.statements.b.clone(),
            ContextKey::C => self.statements.c.clone(),
            ContextKey::D => self.statements.d.clone(),
            ContextKey::Abbrev => {
                let mut text = self.statements.abbrev_intro.clone();
                for a in &self.statements.abbreviations {
                    text.push_str("\n- ");
                    text.push_str(a);
                }
                text
            }
        };
        ContextStatement { key, text }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptVariant {
    pub id: String,
    pub base: BaseTemplate,
    pub shots: ShotStrategy,
    /// Always held in key order a, b, c, d, abbrev.
    pub contexts: Vec<ContextStatement>,
    pub style: RenderStyle,
}

impl PromptVariant {
    pub fn context_set(&self) -> ContextSet {
        ContextSet::new(self.contexts.iter().map(|c| c.key))
    }
}

/// Stable, filesystem-safe identifier: shot kind followed by the sorted
/// context keys, e.g. `two-shot+a+c`.
pub fn variant_id(kind: ShotKind, contexts: &ContextSet) -> String {
    let mut id = kind.slug().to_string();
    for key in contexts.iter() {
        id.push('+');
        id.push_str(key.as_str());
    }
    id
}

/// Inverse of [`variant_id`].
pub fn parse_variant_id(id: &str) -> Option<(ShotKind, ContextSet)> {
    let (kind, rest) = match id.split_once('+') {
        Some((k, rest)) => (k, rest),
        None => (id, ""),
    };
    let kind = kind.parse().ok()?;
    let set: ContextSet = rest.parse().ok()?;
    // Reject non-canonical spellings such as "two-shot+c+a".
    (variant_id(kind, &set) == id).then_some((kind, set))
}

fn build_variant(
    pack: &PromptPack,
    kind: ShotKind,
    contexts: &ContextSet,
    shots: &[ShotExample],
) -> Result<PromptVariant, PromptError> {
    let needed = kind.example_count();
    if shots.len() < needed {
        return Err(PromptError::InsufficientShots {
            kind,
            needed,
            available: shots.len(),
        });
    }
    Ok(PromptVariant {
        id: variant_id(kind, contexts),
        base: pack.base.clone(),
        shots: ShotStrategy {
            kind,
            examples: shots[..needed].to_vec(),
            include_transcript: pack.render.include_transcript_in_shots,
        },
        contexts: contexts.iter().map(|k| pack.statement(k)).collect(),
        style: pack.render.clone(),
    })
}

/// The experiment matrix: every configured shot kind without context, then
/// each context set (and extra) on top of the best shot kind. Duplicate ids
/// keep their first occurrence.
pub fn generate_matrix(pack: &PromptPack, shots: &[ShotExample]) -> Result<Vec<PromptVariant>, PromptError> {
    pack.base.validate()?;
    let matrix = &pack.matrix;
    let combos = matrix
        .shot_kinds
        .iter()
        .map(|k| (*k, ContextSet::default()))
        .chain(
            matrix
                .context_sets
                .iter()
                .chain(&matrix.extras)
                .map(|set| (matrix.best_shot, set.clone())),
        );

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (kind, set) in combos {
        if seen.insert(variant_id(kind, &set)) {
            out.push(build_variant(pack, kind, &set, shots)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    fn new(role: Role, content: String) -> Self {
        Self { role, content }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub messages: Vec<Message>,
}

impl RenderedPrompt {
    pub fn system(&self) -> Option<&Message> {
        self.messages.iter().find(|m| m.role == Role::System)
    }

    pub fn final_user(&self) -> Option<&Message> {
        self.messages.iter().rev().find(|m| m.role == Role::User)
    }

    /// Human-readable dump, one block per message.
    pub fn to_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::System => "system",
                    Role::User => "user",
                };
                format!("--- {role} ---\n{}", m.content)
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

fn example_block(style: &RenderStyle, shot: &ShotExample, include_transcript: bool) -> String {
    let mut block = String::new();
    if include_transcript {
        if let Some(t) = &shot.transcript {
            block.push_str(&style.example_transcript_header);
            block.push('\n');
            block.push_str(t.trim_end());
            block.push_str("\n\n");
        }
    }
    block.push_str(&style.example_header);
    block.push('\n');
    block.push_str(&render_soap(&shot.report));
    block
}

pub fn render_prompt(variant: &PromptVariant, transcript: &Transcript) -> RenderedPrompt {
    let style = &variant.style;
    let statements = variant.contexts.iter().map(|c| c.text.as_str());
    let base = [variant.base.constraint.as_str(), variant.base.format.as_str()]
        .into_iter()
        .filter(|s| !s.is_empty());
    let system: Vec<&str> = match style.context_position {
        ContextPosition::Before => statements.chain(base).collect(),
        ContextPosition::After => base.chain(statements).collect(),
    };
    let system = system.join("\n");

    let examples: Vec<String> = variant
        .shots
        .examples
        .iter()
        .map(|s| example_block(style, s, variant.shots.include_transcript))
        .collect();
    let request = variant.base.fill(&transcript.text);

    let messages = match style.layout {
        Layout::Chat => std::iter::once(Message::new(Role::System, system))
            .chain(examples.into_iter().map(|e| Message::new(Role::User, e)))
            .chain(std::iter::once(Message::new(Role::User, request)))
            .collect(),
        Layout::Flat => {
            let mut parts = vec![system];
            parts.extend(examples);
            parts.push(request);
            vec![Message::new(Role::User, parts.join("\n\n"))]
        }
    };
    RenderedPrompt { messages }
}
