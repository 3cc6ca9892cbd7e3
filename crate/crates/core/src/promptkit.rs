//! Rendering of records into model inputs.
//!
//! Instruction-following models get a single natural-language instruction;
//! sequence-to-sequence models get a `[CLS]`/`[SEP]` segmented sequence. Both
//! forms exist for each of the three prompt settings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::QuadRecord;

/// Which cue, if any, accompanies the context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptSetting {
    WithLongPrompt,
    WithShortPrompt,
    WithoutPrompt,
}

impl PromptSetting {
    pub const ALL: [PromptSetting; 3] = [
        PromptSetting::WithLongPrompt,
        PromptSetting::WithShortPrompt,
        PromptSetting::WithoutPrompt,
    ];

    /// Short name used on the command line and in file names.
    pub fn slug(self) -> &'static str {
        match self {
            PromptSetting::WithLongPrompt => "long",
            PromptSetting::WithShortPrompt => "short",
            PromptSetting::WithoutPrompt => "none",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PromptSetting::WithLongPrompt => "With long prompt",
            PromptSetting::WithShortPrompt => "With short prompt",
            PromptSetting::WithoutPrompt => "Without prompt",
        }
    }

    fn cue(self, record: &QuadRecord) -> Option<(&'static str, &str)> {
        match self {
            PromptSetting::WithLongPrompt => Some(("long prompt", &record.long_prompt)),
            PromptSetting::WithShortPrompt => Some(("short prompt", &record.short_prompt)),
            PromptSetting::WithoutPrompt => None,
        }
    }
}

impl fmt::Display for PromptSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown prompt setting `{0}` (expected long, short or none)")]
pub struct UnknownSetting(pub String);

impl FromStr for PromptSetting {
    type Err = UnknownSetting;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "long" | "with_long_prompt" | "long_prompt" => Ok(PromptSetting::WithLongPrompt),
            "short" | "with_short_prompt" | "short_prompt" => Ok(PromptSetting::WithShortPrompt),
            "none" | "without" | "without_prompt" => Ok(PromptSetting::WithoutPrompt),
            _ => Err(UnknownSetting(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Marker {
    #[serde(rename = "[CLS]")]
    Cls,
    #[serde(rename = "[SEP]")]
    Sep,
}

impl Marker {
    pub fn as_str(self) -> &'static str {
        match self {
            Marker::Cls => "[CLS]",
            Marker::Sep => "[SEP]",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Marker(Marker),
    Text(String),
}

/// Source side is the model input; target side is the training label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderedInput {
    Instruction(String),
    Segmented(Vec<Segment>),
}

impl RenderedInput {
    /// The exact string handed to a model: the instruction itself, or the
    /// segments joined by single spaces.
    pub fn flatten(&self) -> String {
        match self {
            RenderedInput::Instruction(text) => text.clone(),
            RenderedInput::Segmented(segments) => segments
                .iter()
                .map(|s| match s {
                    Segment::Marker(m) => m.as_str(),
                    Segment::Text(t) => t.as_str(),
                })
                .collect::<Vec<_>>()
                .join(" "),
        }
    }

    pub fn count_marker(&self, marker: Marker) -> usize {
        match self {
            RenderedInput::Instruction(_) => 0,
            RenderedInput::Segmented(segments) => segments
                .iter()
                .filter(|s| **s == Segment::Marker(marker))
                .count(),
        }
    }
}

/// Which of the two input forms to render.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputStyle {
    #[default]
    Instruction,
    Segmented,
}

pub fn render_instruction(record: &QuadRecord, setting: PromptSetting) -> RenderedInput {
    let text = match setting.cue(record) {
        Some((name, cue)) => format!(
            "Given the context {} and the {name} {cue}, generate a Question",
            record.context
        ),
        None => format!("Given the context {}, generate a Question", record.context),
    };
    RenderedInput::Instruction(text)
}

pub fn render_segmented(record: &QuadRecord, setting: PromptSetting, side: Side) -> RenderedInput {
    use Marker::{Cls, Sep};
    let mut segments = vec![Segment::Marker(Cls)];
    match side {
        Side::Source => {
            segments.push(Segment::Text(record.context.clone()));
            segments.push(Segment::Marker(Sep));
            if let Some((_, cue)) = setting.cue(record) {
                segments.push(Segment::Text(cue.to_string()));
                segments.push(Segment::Marker(Sep));
            }
        }
        Side::Target => {
            segments.push(Segment::Text(record.question.clone()));
            segments.push(Segment::Marker(Sep));
        }
    }
    RenderedInput::Segmented(segments)
}

/// Model input for the given style (segmented inputs use the source side).
pub fn render(record: &QuadRecord, setting: PromptSetting, style: InputStyle) -> RenderedInput {
    match style {
        InputStyle::Instruction => render_instruction(record, setting),
        InputStyle::Segmented => render_segmented(record, setting, Side::Source),
    }
}
