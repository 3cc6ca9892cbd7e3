use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use super::CorpusError;

/// School subject a record was drawn from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subject {
    History,
    Geography,
    Economics,
    EnvironmentalStudies,
    Science,
    Other(String),
}

impl Subject {
    pub const KNOWN: [Subject; 5] = [
        Subject::History,
        Subject::Geography,
        Subject::Economics,
        Subject::EnvironmentalStudies,
        Subject::Science,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            Subject::History => "History",
            Subject::Geography => "Geography",
            Subject::Economics => "Economics",
            Subject::EnvironmentalStudies => "Environmental Studies",
            Subject::Science => "Science",
            Subject::Other(name) => name,
        }
    }

    /// Lenient parse: case and inner spacing/underscores are ignored for the
    /// known subjects, anything else becomes `Other`.
    pub fn parse(raw: &str) -> Subject {
        let key: String = raw
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "history" => Subject::History,
            "geography" => Subject::Geography,
            "economics" => Subject::Economics,
            "environmentalstudies" | "evs" => Subject::EnvironmentalStudies,
            "science" => Subject::Science,
            _ => Subject::Other(raw.trim().to_string()),
        }
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Subject {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Subject {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Ok(Subject::parse(&raw))
    }
}

/// One annotated sample: a context passage, two prompt cues of different
/// length and the gold question written for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadRecord {
    pub id: String,
    pub subject: Subject,
    pub context: String,
    pub long_prompt: String,
    pub short_prompt: String,
    pub question: String,
}

/// Field names in on-disk order.
pub const FIELDS: [&str; 6] = [
    "id",
    "subject",
    "context",
    "long_prompt",
    "short_prompt",
    "question",
];

/// Text fields that must be non-empty after trimming.
pub const TEXT_FIELDS: [&str; 4] = ["context", "long_prompt", "short_prompt", "question"];

impl QuadRecord {
    pub fn field(&self, name: &str) -> Option<&str> {
        match name {
            "id" => Some(&self.id),
            "subject" => Some(self.subject.as_str()),
            "context" => Some(&self.context),
            "long_prompt" => Some(&self.long_prompt),
            "short_prompt" => Some(&self.short_prompt),
            "question" => Some(&self.question),
            _ => None,
        }
    }

    /// Names of text fields that are blank after trimming.
    pub fn empty_fields(&self) -> Vec<&'static str> {
        TEXT_FIELDS
            .iter()
            .copied()
            .filter(|f| self.field(f).is_some_and(|v| v.trim().is_empty()))
            .collect()
    }
}

/// Parses one corpus line without checking the non-empty invariants.
/// `line_no` is 1-based and only used for error reporting.
pub fn parse_line(line: &str, line_no: usize) -> Result<QuadRecord, CorpusError> {
    let value: Value =
        serde_json::from_str(line).map_err(|_| CorpusError::MalformedLine(line_no))?;
    let Value::Object(map) = value else {
        return Err(CorpusError::MalformedLine(line_no));
    };
    let get = |field: &'static str| -> Result<String, CorpusError> {
        match map.get(field) {
            None | Some(Value::Null) => Err(CorpusError::MissingField(field.into(), line_no)),
            Some(Value::String(s)) => Ok(s.clone()),
            // ids are sometimes written as bare numbers
            Some(Value::Number(n)) if field == "id" => Ok(n.to_string()),
            Some(_) => Err(CorpusError::MalformedLine(line_no)),
        }
    };
    Ok(QuadRecord {
        id: get("id")?,
        subject: Subject::parse(&get("subject")?),
        context: get("context")?,
        long_prompt: get("long_prompt")?,
        short_prompt: get("short_prompt")?,
        question: get("question")?,
    })
}

/// Reads a newline-delimited corpus. Blank lines are skipped. Records come
/// back in file order with every text field non-empty and ids unique.
pub fn parse_quads<R: BufRead>(reader: R) -> Result<Vec<QuadRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_line(&line, line_no)?;
        if let Some(field) = record.empty_fields().first() {
            return Err(CorpusError::EmptyField((*field).into(), line_no));
        }
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn parse_quads_str(text: &str) -> Result<Vec<QuadRecord>, CorpusError> {
    parse_quads(text.as_bytes())
}

/// Serializes one record as a single JSON line (no trailing newline) with
/// fields in the canonical order.
pub fn to_line(record: &QuadRecord) -> String {
    let mut map = Map::new();
    for field in FIELDS {
        map.insert(
            field.to_string(),
            Value::String(record.field(field).unwrap_or_default().to_string()),
        );
    }
    Value::Object(map).to_string()
}

pub fn write_quads<W: Write>(mut writer: W, records: &[QuadRecord]) -> std::io::Result<()> {
    for record in records {
        writeln!(writer, "{}", to_line(record))?;
    }
    writer.flush()
}
