//! Markdown and CSV rendering of corpus statistics, automatic scores and
//! human ratings, plus the question-type heuristic.

mod typology;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

pub use typology::{
    classify_question, deep_ratio, typology, EmptyInput, QuestionKind, QuestionType,
    TypologySummary,
};

use crate::agreement::{AggregateTable, AgreementReport, Criterion};
use crate::corpus::DatasetStats;
use crate::metrics::{Prf, ScoreReport};
use crate::promptkit::PromptSetting;

pub const BIGRAMS_CSV: &str = "table_bigrams.csv";
pub const AUTOMATIC_CSV: &str = "table_automatic.csv";
pub const HUMAN_CSV: &str = "table_human.csv";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv buffer: {0}")]
    Buffer(String),
}

/// Everything a report can draw from. Absent parts are omitted.
#[derive(Debug, Clone, Default)]
pub struct ReportInputs<'a> {
    pub stats: Option<&'a DatasetStats>,
    pub typology: Option<&'a TypologySummary>,
    pub scores: &'a [ScoreReport],
    pub agreement: Option<&'a AgreementReport>,
    pub ratings: Option<&'a AggregateTable>,
    /// How many leading bigrams to list.
    pub top_bigrams: usize,
    pub sections: Sections,
}

/// Which score sections to emit. The dataset sections appear whenever
/// their inputs are given.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sections {
    pub automatic: bool,
    pub human: bool,
}

impl Default for Sections {
    fn default() -> Self {
        Self {
            automatic: true,
            human: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedReport {
    pub markdown: String,
    /// File name to CSV content.
    pub csv: BTreeMap<String, String>,
}

/// Display values for one automatic-score row. ChrF and BLEU are
/// percentages; the rest stay in `[0, 1]`.
fn automatic_cells(report: &ScoreReport) -> Vec<Option<f64>> {
    let m = &report.corpus_means;
    let mut cells = vec![
        Some(m.rouge2.precision),
        Some(m.rouge2.recall),
        Some(m.rouge2.f1),
        Some(m.rouge_l.precision),
        Some(m.rouge_l.recall),
        Some(m.rouge_l.f1),
        Some(m.meteor),
        Some(m.chrf * 100.0),
        Some(m.bleu * 100.0),
    ];
    cells.push(m.bertscore.map(|b: Prf| b.f1));
    cells
}

const AUTOMATIC_HEADERS: [&str; 10] = [
    "R2-P", "R2-R", "R2-F1", "RL-P", "RL-R", "RL-F1", "METEOR", "CHrF (%)", "BLEU (%)", "BERTScore",
];
const AUTOMATIC_CSV_HEADERS: [&str; 10] = [
    "rouge2_p", "rouge2_r", "rouge2_f1", "rougel_p", "rougel_r", "rougel_f1", "meteor", "chrf_pct",
    "bleu_pct", "bertscore_f1",
];
const PERCENT_COLUMNS: [usize; 2] = [7, 8];

fn format_cell(col: usize, value: f64) -> String {
    if PERCENT_COLUMNS.contains(&col) {
        format!("{value:.2}")
    } else {
        format!("{value:.3}")
    }
}

fn grouped(scores: &[ScoreReport]) -> Vec<(PromptSetting, Vec<&ScoreReport>)> {
    PromptSetting::ALL
        .iter()
        .filter_map(|setting| {
            let mut rows: Vec<&ScoreReport> =
                scores.iter().filter(|r| r.setting == *setting).collect();
            rows.sort_by(|a, b| a.model_id.cmp(&b.model_id).then(a.run_id.cmp(&b.run_id)));
            (!rows.is_empty()).then_some((*setting, rows))
        })
        .collect()
}

fn table_header(out: &mut String, first: &str, cols: &[&str]) {
    let _ = writeln!(out, "| {first} | {} |", cols.join(" | "));
    let _ = writeln!(out, "|---|{}", "---:|".repeat(cols.len()));
}

fn render_stats(out: &mut String, stats: &DatasetStats, top: usize) {
    let _ = writeln!(out, "## Dataset\n");
    let _ = writeln!(out, "Total records: {}\n", stats.total);
    table_header(out, "Subject", &["Records"]);
    for (subject, n) in &stats.per_subject {
        let _ = writeln!(out, "| {subject} | {n} |");
    }
    out.push('\n');
    if let Some(m) = &stats.mean_words {
        table_header(out, "Field", &["Mean words"]);
        for (name, v) in [
            ("Context", m.context),
            ("Long prompt", m.long_prompt),
            ("Short prompt", m.short_prompt),
            ("Question", m.question),
        ] {
            let _ = writeln!(out, "| {name} | {v:.2} |");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "### Leading question bigrams\n");
    table_header(out, "Bigram", &["Count", "Share (%)"]);
    for b in stats.leading_bigrams.iter().take(top) {
        let _ = writeln!(out, "| {} | {} | {:.2} |", b.bigram, b.count, b.share);
    }
    out.push('\n');
}

fn render_typology(out: &mut String, t: &TypologySummary) {
    let _ = writeln!(out, "### Question types (heuristic)\n");
    table_header(out, "Type", &["Count", "Deep"]);
    for (kind, n) in &t.counts {
        let deep = if kind.is_deep() { "yes" } else { "no" };
        let _ = writeln!(out, "| {kind} | {n} | {deep} |");
    }
    let _ = writeln!(out, "\nDeep-reasoning share: {:.2}%\n", t.deep_ratio * 100.0);
}

fn render_automatic(out: &mut String, scores: &[ScoreReport]) {
    let _ = writeln!(out, "## Automatic evaluation\n");
    let groups = grouped(scores);
    if groups.is_empty() {
        let _ = writeln!(out, "_No scored runs._\n");
        return;
    }
    let _ = writeln!(
        out,
        "Bold marks the best value per column within a setting. CHrF and BLEU are percentages.\n"
    );
    for (setting, rows) in groups {
        let _ = writeln!(out, "### {}\n", setting.label());
        let cells: Vec<Vec<Option<f64>>> = rows.iter().map(|r| automatic_cells(r)).collect();
        let maxima: Vec<Option<f64>> = (0..AUTOMATIC_HEADERS.len())
            .map(|col| {
                cells
                    .iter()
                    .filter_map(|row| row[col])
                    .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            })
            .collect();
        table_header(out, "Model", &AUTOMATIC_HEADERS);
        for (report, row) in rows.iter().zip(&cells) {
            let rendered: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(col, v)| match v {
                    None => "-".to_string(),
                    Some(v) => {
                        let text = format_cell(col, *v);
                        // Compare on the displayed value so ties render alike.
                        let best = maxima[col].map(|m| format_cell(col, m)) == Some(text.clone());
                        if best && rows.len() > 1 {
                            format!("**{text}**")
                        } else {
                            text
                        }
                    }
                })
                .collect();
            let _ = writeln!(out, "| {} | {} |", report.model_id, rendered.join(" | "));
        }
        out.push('\n');
    }
}

fn render_human(out: &mut String, agreement: Option<&AgreementReport>, ratings: Option<&AggregateTable>) {
    let _ = writeln!(out, "## Human evaluation\n");
    let headers: Vec<&str> = Criterion::ALL.iter().map(|c| c.as_str()).collect();
    match ratings {
        Some(table) if !table.rows.is_empty() => {
            let mut cols = vec!["Setting", "Ratings"];
            cols.extend(&headers);
            table_header(out, "Model", &cols);
            for row in &table.rows {
                let means: Vec<String> = Criterion::ALL
                    .iter()
                    .map(|c| row.means.get(c).map_or("-".into(), |v| format!("{v:.2}")))
                    .collect();
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    row.model_id,
                    row.setting.label(),
                    row.n_ratings,
                    means.join(" | ")
                );
            }
            if table.unmatched > 0 {
                let _ = writeln!(out, "\n{} ratings referenced unknown targets.", table.unmatched);
            }
            out.push('\n');
        }
        _ => {
            let _ = writeln!(out, "_No ratings._\n");
        }
    }
    if let Some(a) = agreement {
        let _ = writeln!(
            out,
            "Fleiss' kappa over {} items and {} raters:\n",
            a.n_items, a.n_raters
        );
        table_header(out, "Criterion", &["Kappa"]);
        for (c, k) in &a.kappa {
            let _ = writeln!(out, "| {c} | {k:.3} |");
        }
        out.push('\n');
    }
}

fn to_csv<T: Serialize>(headers: Option<&[&str]>, rows: impl IntoIterator<Item = T>) -> Result<String, ReportError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(headers.is_none())
        .from_writer(Vec::new());
    if let Some(h) = headers {
        w.write_record(h)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Buffer(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ReportError::Buffer(e.to_string()))
}

/// Renders the report. Output depends only on the inputs, so identical
/// inputs give byte-identical files.
pub fn render_report(inputs: &ReportInputs<'_>) -> Result<RenderedReport, ReportError> {
    let mut md = String::from("# Question generation benchmark report\n\n");
    let mut csv_files = BTreeMap::new();

    if let Some(stats) = inputs.stats {
        render_stats(&mut md, stats, inputs.top_bigrams);
        let rows = stats
            .leading_bigrams
            .iter()
            .take(inputs.top_bigrams)
            .enumerate()
            .map(|(i, b)| (i + 1, b.bigram.clone(), b.count, format!("{:.2}", b.share)));
        csv_files.insert(
            BIGRAMS_CSV.to_string(),
            to_csv(Some(&["rank", "bigram", "count", "share_pct"]), rows)?,
        );
    }
    if let Some(t) = inputs.typology {
        render_typology(&mut md, t);
    }

    if inputs.sections.automatic {
        render_automatic(&mut md, inputs.scores);
        csv_files.insert(AUTOMATIC_CSV.to_string(), automatic_csv(inputs.scores)?);
    }
    if inputs.sections.human {
        render_human(&mut md, inputs.agreement, inputs.ratings);
        csv_files.insert(HUMAN_CSV.to_string(), human_csv(inputs.ratings)?);
    }

    Ok(RenderedReport {
        markdown: md,
        csv: csv_files,
    })
}

fn automatic_csv(scores: &[ScoreReport]) -> Result<String, ReportError> {
    let mut headers = vec!["setting", "model", "run_id", "n_scored", "n_failed"];
    headers.extend(AUTOMATIC_CSV_HEADERS);
    let rows: Vec<Vec<String>> = grouped(scores)
        .into_iter()
        .flat_map(|(setting, rows)| {
            rows.into_iter().map(move |r| {
                let mut line = vec![
                    setting.slug().to_string(),
                    r.model_id.clone(),
                    r.run_id.clone(),
                    r.n_scored.to_string(),
                    r.n_failed.to_string(),
                ];
                line.extend(
                    automatic_cells(r)
                        .into_iter()
                        .enumerate()
                        .map(|(col, v)| v.map_or(String::new(), |v| format_cell(col, v))),
                );
                line
            })
        })
        .collect();
    to_csv(Some(&headers), rows)
}

fn human_csv(ratings: Option<&AggregateTable>) -> Result<String, ReportError> {
    let mut headers = vec!["setting".to_string(), "model".into(), "n_ratings".into()];
    headers.extend(Criterion::ALL.iter().map(|c| c.as_str().to_lowercase()));
    let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = ratings
        .map(|t| {
            t.rows
                .iter()
                .map(|row| {
                    let mut line = vec![
                        row.setting.slug().to_string(),
                        row.model_id.clone(),
                        row.n_ratings.to_string(),
                    ];
                    line.extend(
                        Criterion::ALL
                            .iter()
                            .map(|c| row.means.get(c).map_or(String::new(), |v| format!("{v:.2}"))),
                    );
                    line
                })
                .collect()
        })
        .unwrap_or_default();
    to_csv(Some(&header_refs), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::stats;
    use crate::fixtures::sample10;
    use crate::metrics::ScoreMeans;

    fn score(model: &str, setting: PromptSetting, f: f64) -> ScoreReport {
        let prf = Prf::new(f, f);
        ScoreReport {
            run_id: format!("{model}-{}", setting.slug()),
            model_id: model.into(),
            setting,
            per_pair: vec![],
            corpus_means: ScoreMeans {
                rouge2: prf,
                rouge_l: prf,
                meteor: f,
                chrf: f,
                bleu: f,
                bertscore: None,
            },
            corpus_bleu: f,
            n_scored: 1,
            n_failed: 0,
        }
    }

    #[test]
    fn empty_scores_leave_stats_only() {
        let s = stats(&sample10());
        let out = render_report(&ReportInputs {
            stats: Some(&s),
            top_bigrams: 5,
            ..Default::default()
        })
        .unwrap();
        assert!(out.markdown.contains("Total records: 10"));
        assert!(out.markdown.contains("_No scored runs._"));
        assert_eq!(out.csv[AUTOMATIC_CSV].lines().count(), 1);
        assert!(out.csv.contains_key(BIGRAMS_CSV));
    }

    #[test]
    fn single_row_under_single_heading() {
        let scores = [score("m", PromptSetting::WithShortPrompt, 0.5)];
        let out = render_report(&ReportInputs { scores: &scores, ..Default::default() }).unwrap();
        assert_eq!(out.markdown.matches("### ").count(), 1);
        assert!(out.markdown.contains("### With short prompt"));
        assert!(!out.markdown.contains("**"));
        assert!(out.markdown.contains("| 50.00 |"));
    }

    #[test]
    fn maxima_bold_within_setting() {
        let scores = [
            score("a", PromptSetting::WithLongPrompt, 0.2),
            score("b", PromptSetting::WithLongPrompt, 0.4),
            score("c", PromptSetting::WithoutPrompt, 0.1),
        ];
        let out = render_report(&ReportInputs { scores: &scores, ..Default::default() }).unwrap();
        let b_line = out.markdown.lines().find(|l| l.starts_with("| b |")).unwrap();
        assert!(b_line.contains("**0.400**") && b_line.contains("**40.00**"));
        let a_line = out.markdown.lines().find(|l| l.starts_with("| a |")).unwrap();
        assert!(!a_line.contains("**"));
        let c_line = out.markdown.lines().find(|l| l.starts_with("| c |")).unwrap();
        assert!(!c_line.contains("**"));
    }

    #[test]
    fn sections_can_be_dropped() {
        let out = render_report(&ReportInputs {
            sections: Sections { automatic: true, human: false },
            ..Default::default()
        })
        .unwrap();
        assert!(!out.markdown.contains("## Human evaluation"));
        assert!(!out.csv.contains_key(HUMAN_CSV));
    }

    #[test]
    fn deterministic() {
        let s = stats(&sample10());
        let scores = [score("b", PromptSetting::WithLongPrompt, 0.3), score("a", PromptSetting::WithLongPrompt, 0.3)];
        let reversed = [scores[1].clone(), scores[0].clone()];
        let a = render_report(&ReportInputs { stats: Some(&s), scores: &scores, top_bigrams: 3, ..Default::default() }).unwrap();
        let b = render_report(&ReportInputs { stats: Some(&s), scores: &reversed, top_bigrams: 3, ..Default::default() }).unwrap();
        assert_eq!(a, b);
    }
}
