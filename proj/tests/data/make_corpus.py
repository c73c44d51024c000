#!/usr/bin/env python3
"""Writes a deterministic synthetic Tibetan-script corpus and a marker-annotated
evaluation dataset drawn from the same word distribution.

Syllables follow the usual shape (prefix, optional superscript, root,
optional subscript, vowel, suffix) and end with a tsheg. Words are one to
four syllables; word and syllable frequencies are Zipfian.

    python3 make_corpus.py [out_dir]
"""
import os
import random
import sys
import unicodedata


def _stable(ch):
    return unicodedata.normalize("NFC", ch) == ch


# Letters whose NFC form is a decomposed pair are left out so the text is NFC-clean.
ROOTS = [chr(c) for c in range(0x0F40, 0x0F69)
         if c != 0x0F48 and _stable(chr(c)) and _stable(chr(c + 0x50))]
SUBJOIN = {"ཡ": "ྱ", "ར": "ྲ", "ལ": "ླ", "ཝ": "ྭ"}
SUPER = ["ར", "ལ", "ས"]
PREFIX = ["ག", "ད", "བ", "མ", "འ"]
SUFFIX = ["ག", "ང", "ད", "ན", "བ", "མ", "འ", "ར", "ལ", "ས"]
VOWELS = ["", "", "ི", "ུ", "ེ", "ོ"]
TSHEG = "་"
SHAD = "།"
MARKERS = ["beg", "mid", "end", "#", "*", "NUM"]


def subjoined(letter):
    cp = ord(letter)
    return chr(cp + 0x50)


def syllable(rng):
    s = ""
    if rng.random() < 0.2:
        s += rng.choice(PREFIX)
    root = rng.choice(ROOTS)
    if rng.random() < 0.15:
        s += rng.choice(SUPER) + subjoined(root)
    else:
        s += root
    if rng.random() < 0.15:
        s += rng.choice(list(SUBJOIN.values()))
    s += rng.choice(VOWELS)
    if rng.random() < 0.6:
        s += rng.choice(SUFFIX)
        if rng.random() < 0.1:
            s += "ས"
    return s + TSHEG


def zipf_weights(n, a=1.1):
    return [1.0 / (i + 1) ** a for i in range(n)]


def build(rng, n_syllables=1500, n_words=9000):
    syllables = []
    seen = set()
    while len(syllables) < n_syllables:
        s = syllable(rng)
        if s not in seen:
            seen.add(s)
            syllables.append(s)
    sw = zipf_weights(len(syllables), 0.9)
    words = []
    seen = set()
    while len(words) < n_words:
        k = rng.choices([1, 2, 3, 4], weights=[30, 45, 18, 7])[0]
        w = "".join(rng.choices(syllables, weights=sw, k=k))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words, zipf_weights(len(words))


def sentences(rng, words, weights, target_bytes):
    out = []
    size = 0
    while size < target_bytes:
        n = rng.randint(4, 14)
        line = " ".join(rng.choices(words, weights=weights, k=n)) + " " + SHAD
        out.append(line)
        size += len(line.encode("utf-8")) + 1
    return out


def annotate(rng, lines):
    out = []
    for line in lines:
        toks = line.split()[:-1]  # drop the shad
        fields = ["beg"]
        for i, t in enumerate(toks):
            if i and rng.random() < 0.1:
                fields.append("mid")
            if rng.random() < 0.05:
                fields.append(rng.choice(["NUM", "#", "*"]))
            fields.append(t)
        fields.append("end")
        out.append(" ".join(fields))
    return out


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
    rng = random.Random(20240611)
    words, weights = build(rng)
    corpus = sentences(rng, words, weights, 1_000_000)
    held_out = sentences(rng, words, weights, 120_000)
    with open(os.path.join(out_dir, "tibetan_corpus.txt"), "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(corpus) + "\n")
    with open(os.path.join(out_dir, "tibetan_dataset.txt"), "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(annotate(rng, held_out)) + "\n")


if __name__ == "__main__":
    main()
