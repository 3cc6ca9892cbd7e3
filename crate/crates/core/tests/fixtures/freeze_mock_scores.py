"""Freeze reference scores for the mock-echo run over sample10.

Scores come from sacrebleu (BLEU, chrF) and rouge-score (ROUGE-2, ROUGE-L).
METEOR uses an exhaustive alignment search below with the nltk Porter
stemmer; nltk's own meteor_score aligns greedily and does not minimize
chunks. Run from this directory:

    python3 freeze_mock_scores.py > mock_scores.json
"""
import json
import pathlib

from nltk.stem.porter import PorterStemmer
from rouge_score import rouge_scorer
from sacrebleu.metrics import BLEU, CHRF

HERE = pathlib.Path(__file__).parent
SAMPLE = HERE.parent.parent / "fixtures" / "sample10.ndjson"


def norm(text):
    out = []
    for raw in text.split():
        i, j = 0, len(raw)
        while i < j and not raw[i].isalnum():
            i += 1
        while j > i and not raw[j - 1].isalnum():
            j -= 1
        if i < j:
            out.append(raw[i:j].lower())
    return out


class Tok:
    def tokenize(self, text):
        return text.split()


def chunks(links):
    count, prev = 0, None
    for link in links:
        if link is not None and not (prev is not None and link == prev + 1):
            count += 1
        prev = link
    return count


def best_stage(cand_keys, ref_keys, links, used):
    """Every one-to-one extension of `links` pairing equal keys; returns the
    one with most matches, then fewest chunks."""
    best = None

    def rec(i, links):
        nonlocal best
        if i == len(links):
            m = sum(l is not None for l in links)
            key = (-m, chunks(links))
            if best is None or key < best[0]:
                best = (key, list(links))
            return
        rec(i + 1, links)
        if links[i] is None:
            for j, rk in enumerate(ref_keys):
                if not used[j] and rk == cand_keys[i]:
                    used[j] = True
                    links[i] = j
                    rec(i + 1, links)
                    links[i] = None
                    used[j] = False

    rec(0, list(links))
    return best[1]


def meteor(cand, ref, stemmer):
    links = best_stage(cand, ref, [None] * len(cand), [False] * len(ref))
    used = [False] * len(ref)
    for l in links:
        if l is not None:
            used[l] = True
    stem = lambda ws: [stemmer.stem(w) for w in ws]
    links = best_stage(stem(cand), stem(ref), links, used)
    m = sum(l is not None for l in links)
    if m == 0:
        return 0.0
    p, r = m / len(cand), m / len(ref)
    fmean = p * r / (0.9 * p + 0.1 * r)
    return fmean * (1 - 0.5 * (chunks(links) / m) ** 3)


def main():
    records = [json.loads(l) for l in SAMPLE.read_text().splitlines() if l.strip()]
    rouge = rouge_scorer.RougeScorer(["rouge2", "rougeL"], tokenizer=Tok())
    bleu = BLEU(tokenize="none", smooth_method="floor", smooth_value=1e-9, effective_order=True)
    chrf = CHRF(char_order=6, word_order=0, beta=2)
    stemmer = PorterStemmer(mode=PorterStemmer.MARTIN_EXTENSIONS)
    pairs = []
    for r in records:
        output = "What is " + " ".join(r["context"].split()[:5]) + "?"
        c, g = norm(output), norm(r["question"])
        cj, gj = " ".join(c), " ".join(g)
        rs = rouge.score(gj, cj)
        pairs.append(
            {
                "record_id": r["id"],
                "output": output,
                "rouge2": [rs["rouge2"].precision, rs["rouge2"].recall, rs["rouge2"].fmeasure],
                "rouge_l": [rs["rougeL"].precision, rs["rougeL"].recall, rs["rougeL"].fmeasure],
                "meteor": meteor(c, g, stemmer),
                "chrf": chrf.sentence_score(cj, [gj]).score / 100.0,
                "bleu": bleu.sentence_score(cj, [gj]).score / 100.0,
            }
        )
    print(json.dumps(pairs, indent=1))


if __name__ == "__main__":
    main()
