"""Regenerate the lemmatizer word list and exception table shipped in
crates/core/resources/.

Requires `pip install lemminflect wordfreq`. The output is deterministic for a
given pair of package versions.
"""
import re
import sys
from pathlib import Path

import lemminflect
import wordfreq

TOP_N = 40000
ALPHA = re.compile(r"^[a-z]+$")
RULES = [("ies", "y"), ("ied", "y"), ("ing", ""), ("ing", "e"), ("ed", ""),
         ("ed", "e"), ("es", ""), ("s", "")]
POS_ORDER = ["NOUN", "VERB", "ADJ", "ADV", "AUX", "PROPN"]
MANUAL = {"flying": "fly"}


def preferred(lemmas):
    for pos in POS_ORDER:
        if pos in lemmas:
            return lemmas[pos][0]
    return next(iter(lemmas.values()))[0]


def apply_rules(word, known):
    if word in known:
        return word
    for suffix, repl in RULES:
        if word.endswith(suffix) and len(word) > len(suffix):
            cand = word[: -len(suffix)] + repl
            if cand in known:
                return cand
    return word


def main(out_dir):
    top = [w for w in wordfreq.top_n_list("en", TOP_N) if ALPHA.match(w)]
    base, inflected = set(), {}
    for w in top:
        lemmas = lemminflect.getAllLemmas(w)
        if not lemmas or preferred(lemmas) == w:
            base.add(w)
        else:
            lemma = preferred(lemmas)
            if ALPHA.match(lemma):
                inflected[w] = lemma
    known = set(base) | set(inflected.values()) | set(MANUAL.values())
    for w in list(inflected):
        known.discard(w)
    exceptions = dict(MANUAL)
    for w, lemma in inflected.items():
        if w in exceptions:
            continue
        if apply_rules(w, known) != lemma:
            exceptions[w] = lemma
    # collapse chains so every exception value is a fixed point
    for w in list(exceptions):
        seen = {w}
        v = exceptions[w]
        while v in exceptions and v not in seen:
            seen.add(v)
            v = exceptions[v]
        exceptions[w] = v
    out = Path(out_dir)
    (out / "words.txt").write_text("\n".join(sorted(known)) + "\n")
    (out / "lemma_exceptions.tsv").write_text(
        "".join(f"{k}\t{v}\n" for k, v in sorted(exceptions.items())))
    print(f"{len(known)} words, {len(exceptions)} exceptions")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/resources")
