//! Small built-in corpora used by tests, examples and the offline demo.

use crate::corpus::{parse_quads_str, QuadRecord, Subject};

/// Five records, the first being the purchasing power parity instance.
pub const SAMPLE5: &str = include_str!("../fixtures/sample5.ndjson");
/// Ten records; the first five are `SAMPLE5`.
pub const SAMPLE10: &str = include_str!("../fixtures/sample10.ndjson");

pub const PPP_CONTEXT: &str = "Purchasing power parity (PPP) is an economic indicator that signifies the purchasing power of the currencies of various nations of the world against each other. It helps in comparing living standards between different countries and estimating economic productivity.";

pub fn ppp_record() -> QuadRecord {
    QuadRecord {
        id: "ppp-1".into(),
        subject: Subject::Economics,
        context: PPP_CONTEXT.into(),
        long_prompt: "purchasing power parity helps".into(),
        short_prompt: "purchasing power".into(),
        question: "What does purchasing power parity do?".into(),
    }
}

pub fn sample5() -> Vec<QuadRecord> {
    parse_quads_str(SAMPLE5).expect("bundled fixture parses")
}

pub fn sample10() -> Vec<QuadRecord> {
    parse_quads_str(SAMPLE10).expect("bundled fixture parses")
}

/// `n` synthetic records with distinct ids, cycling through the ten sample
/// records for their text.
pub fn synthetic(n: usize) -> Vec<QuadRecord> {
    let base = sample10();
    (0..n)
        .map(|i| {
            let mut r = base[i % base.len()].clone();
            r.id = format!("syn-{i:05}");
            r
        })
        .collect()
}
