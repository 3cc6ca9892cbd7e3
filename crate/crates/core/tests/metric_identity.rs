use qgbench_core::metrics::{bleu, chrf_default, meteor, rouge_l, rouge_n, Prf, TokenSeq};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn sequences(n: usize, seed: u64) -> Vec<TokenSeq> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=30);
            TokenSeq::from_tokens((0..len).map(|_| vocab[rng.random_range(0..vocab.len())].clone()))
        })
        .collect()
}

#[test]
fn every_metric_is_perfect_on_identical_input() {
    for x in sequences(200, 99) {
        let perfect = |p: Prf| (p.precision - 1.0).abs() <= TOL && (p.recall - 1.0).abs() <= TOL && (p.f1 - 1.0).abs() <= TOL;
        assert!(perfect(rouge_l(&x, &x)), "{x:?}");
        // A single token has no bigrams; the zero-denominator convention applies.
        if x.len() >= 2 {
            assert!(perfect(rouge_n(&x, &x, 2)), "{x:?}");
        } else {
            assert_eq!(rouge_n(&x, &x, 2), Prf::ZERO);
        }
        assert!((chrf_default(&x.joined(), &x.joined()) - 1.0).abs() <= TOL, "{x:?}");
        assert!((bleu(&x, &x, 4) - 1.0).abs() <= TOL, "{x:?}");
        let m = x.len() as f64;
        assert!((meteor(&x, &x) - (1.0 - 0.5 / (m * m * m))).abs() <= TOL, "{x:?}");
    }
}
