use qgbench_core::metrics::stem::porter_stem;

/// Word/stem pairs produced by an established Porter implementation run in
/// its original-algorithm mode.
#[test]
fn matches_reference_stems() {
    let mut mismatches = Vec::new();
    let mut n = 0;
    for line in include_str!("fixtures/porter_vocab.tsv").lines() {
        let (word, stem) = line.split_once('\t').expect("tab separated");
        n += 1;
        let got = porter_stem(word);
        if got != stem {
            mismatches.push(format!("{word}: got {got}, want {stem}"));
        }
    }
    assert!(n > 1000, "vocabulary too small: {n}");
    assert!(mismatches.is_empty(), "{} mismatches:\n{}", mismatches.len(), mismatches.join("\n"));
}
