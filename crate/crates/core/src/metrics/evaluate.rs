use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    bert_score, bleu, chrf_default, corpus_bleu, meteor, rouge_l, rouge_n, tokenize,
    EmbeddingError, EmbeddingProvider, Prf, TokenSeq,
};
use crate::generation::GenerationRun;
use crate::promptkit::PromptSetting;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("run has no successful generations to score")]
    NoScorablePairs,
    #[error("no gold question for record `{0}`")]
    MissingGold(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub record_id: String,
    pub rouge2: Prf,
    pub rouge_l: Prf,
    pub meteor: f64,
    pub chrf: f64,
    pub bleu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bertscore: Option<Prf>,
}

/// Arithmetic means of the per-pair columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMeans {
    pub rouge2: Prf,
    pub rouge_l: Prf,
    pub meteor: f64,
    pub chrf: f64,
    pub bleu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bertscore: Option<Prf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub run_id: String,
    pub model_id: String,
    pub setting: PromptSetting,
    pub per_pair: Vec<PairScores>,
    pub corpus_means: ScoreMeans,
    /// Pooled-count BLEU over all scored pairs, for reference.
    pub corpus_bleu: f64,
    pub n_scored: usize,
    /// Failed generations, excluded from the means.
    pub n_failed: usize,
}

fn mean_prf<'a>(items: impl Iterator<Item = &'a Prf>, n: f64) -> Prf {
    let (p, r, f) = items.fold((0.0, 0.0, 0.0), |(p, r, f), x| {
        (p + x.precision, r + x.recall, f + x.f1)
    });
    Prf {
        precision: p / n,
        recall: r / n,
        f1: f / n,
    }
}

impl ScoreMeans {
    /// Means over `pairs`; `None` when empty. The BERTScore column is
    /// present only if every pair carries it.
    pub fn from_pairs(pairs: &[PairScores]) -> Option<Self> {
        if pairs.is_empty() {
            return None;
        }
        let n = pairs.len() as f64;
        let avg = |f: fn(&PairScores) -> f64| pairs.iter().map(f).sum::<f64>() / n;
        let bertscore = pairs
            .iter()
            .map(|p| p.bertscore.as_ref())
            .collect::<Option<Vec<_>>>()
            .map(|all| mean_prf(all.into_iter(), n));
        Some(Self {
            rouge2: mean_prf(pairs.iter().map(|p| &p.rouge2), n),
            rouge_l: mean_prf(pairs.iter().map(|p| &p.rouge_l), n),
            meteor: avg(|p| p.meteor),
            chrf: avg(|p| p.chrf),
            bleu: avg(|p| p.bleu),
            bertscore,
        })
    }
}

/// All metrics for one candidate/reference pair of raw questions.
/// Character-level chrF runs on the normalized token text.
pub fn score_pair(
    record_id: &str,
    candidate: &str,
    reference: &str,
    embeddings: Option<&dyn EmbeddingProvider>,
) -> Result<PairScores, MetricsError> {
    let cand = tokenize(candidate);
    let refs = tokenize(reference);
    let bertscore = match embeddings {
        Some(provider) => Some(bert_score(
            &provider.embed(candidate)?,
            &provider.embed(reference)?,
        )?),
        None => None,
    };
    Ok(PairScores {
        record_id: record_id.to_string(),
        rouge2: rouge_n(&cand, &refs, 2),
        rouge_l: rouge_l(&cand, &refs),
        meteor: meteor(&cand, &refs),
        chrf: chrf_default(&cand.joined(), &refs.joined()),
        bleu: bleu(&cand, &refs, 4),
        bertscore,
    })
}

/// Scores every successful generation of `run` against its gold question.
pub fn evaluate_run(
    run: &GenerationRun,
    gold: &HashMap<String, String>,
    embeddings: Option<&dyn EmbeddingProvider>,
) -> Result<ScoreReport, MetricsError> {
    let mut per_pair = Vec::new();
    let mut token_pairs: Vec<(TokenSeq, TokenSeq)> = Vec::new();
    let mut n_failed = 0;
    for result in &run.results {
        if !result.is_ok() {
            n_failed += 1;
            continue;
        }
        let reference = gold
            .get(&result.record_id)
            .ok_or_else(|| MetricsError::MissingGold(result.record_id.clone()))?;
        per_pair.push(score_pair(
            &result.record_id,
            &result.output_question,
            reference,
            embeddings,
        )?);
        token_pairs.push((tokenize(&result.output_question), tokenize(reference)));
    }
    let corpus_means = ScoreMeans::from_pairs(&per_pair).ok_or(MetricsError::NoScorablePairs)?;
    Ok(ScoreReport {
        run_id: run.run_id.clone(),
        model_id: run.model_id.clone(),
        setting: run.setting,
        n_scored: per_pair.len(),
        n_failed,
        corpus_bleu: corpus_bleu(token_pairs.iter().map(|(c, r)| (c, r)), 4),
        per_pair,
        corpus_means,
    })
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ReportLine<'a> {
    Pair(&'a PairScores),
    Means {
        run_id: &'a str,
        model_id: &'a str,
        setting: PromptSetting,
        n_scored: usize,
        n_failed: usize,
        corpus_bleu: f64,
        means: &'a ScoreMeans,
    },
}

impl ScoreReport {
    /// One `{"kind":"pair",...}` line per scored pair, then a single
    /// `{"kind":"means",...}` footer.
    pub fn write_ndjson<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for pair in &self.per_pair {
            serde_json::to_writer(&mut w, &ReportLine::Pair(pair))?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(
            &mut w,
            &ReportLine::Means {
                run_id: &self.run_id,
                model_id: &self.model_id,
                setting: self.setting,
                n_scored: self.n_scored,
                n_failed: self.n_failed,
                corpus_bleu: self.corpus_bleu,
                means: &self.corpus_means,
            },
        )?;
        w.write_all(b"\n")?;
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::{GenParams, GenerationResult, GenerationStatus};
    use crate::metrics::OneHotEmbeddings;
    use crate::promptkit::InputStyle;
    use chrono::Utc;

    fn result(id: &str, out: &str, ok: bool) -> GenerationResult {
        GenerationResult {
            record_id: id.into(),
            setting: PromptSetting::WithLongPrompt,
            model_id: "m".into(),
            input_digest: "d".into(),
            output_question: out.into(),
            status: if ok { GenerationStatus::Ok } else { GenerationStatus::Failed("x".into()) },
            latency_ms: 0,
        }
    }

    fn run(results: Vec<GenerationResult>) -> GenerationRun {
        GenerationRun {
            run_id: "r".into(),
            model_id: "m".into(),
            setting: PromptSetting::WithLongPrompt,
            input_style: InputStyle::Instruction,
            params: GenParams::chat(),
            results,
            created_at: Utc::now(),
        }
    }

    fn gold() -> HashMap<String, String> {
        [("a", "What does purchasing power parity do?"), ("b", "Why is the sky blue?")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn one_pair_means_equal_pair() {
        let report = evaluate_run(&run(vec![result("a", "What is purchasing power parity?", true)]), &gold(), None).unwrap();
        assert_eq!(report.n_scored, 1);
        let p = &report.per_pair[0];
        let m = &report.corpus_means;
        assert_eq!((m.rouge2, m.rouge_l, m.meteor, m.chrf, m.bleu), (p.rouge2, p.rouge_l, p.meteor, p.chrf, p.bleu));
        assert!(m.bertscore.is_none());
    }

    #[test]
    fn failures_excluded_and_counted() {
        let r = run(vec![result("a", "What is PPP?", true), result("b", "", false)]);
        let report = evaluate_run(&r, &gold(), None).unwrap();
        assert_eq!((report.n_scored, report.n_failed), (1, 1));
        let none = run(vec![result("b", "", false)]);
        assert!(matches!(evaluate_run(&none, &gold(), None), Err(MetricsError::NoScorablePairs)));
        let orphan = run(vec![result("zzz", "What?", true)]);
        assert!(matches!(evaluate_run(&orphan, &gold(), None), Err(MetricsError::MissingGold(_))));
    }

    #[test]
    fn bertscore_column_with_provider() {
        let r = run(vec![result("a", "What does purchasing power parity do?", true)]);
        let provider = OneHotEmbeddings::default();
        let report = evaluate_run(&r, &gold(), Some(&provider)).unwrap();
        assert_eq!(report.corpus_means.bertscore, Some(Prf::new(1.0, 1.0)));
    }

    #[test]
    fn ndjson_has_footer() {
        let r = run(vec![result("a", "What is PPP?", true), result("b", "Why is it blue?", true)]);
        let report = evaluate_run(&r, &gold(), None).unwrap();
        let mut buf = Vec::new();
        report.write_ndjson(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with(r#"{"kind":"pair""#));
        assert!(lines[2].starts_with(r#"{"kind":"means""#));
    }
}
