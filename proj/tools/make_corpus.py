#!/usr/bin/env python3
"""Regenerates the fixture corpus under data/corpus/.

The corpus is a small Korean -> English dubbing scenario: one source line
(synthesized WAV with two pauses), an initial translation, an ISO paraphrase
stream, a PS candidate stream, and every provider fixture the pipeline needs.
Output is deterministic; re-running rewrites identical files.
"""

import json
import math
import random
import struct
import wave
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "corpus"
RATE = 22050

# ---------------------------------------------------------------------------
# Alphabet

ENTRIES = [("<b>", "", False), ("<null>", "", False)]
KO = {"space": " ", "vowels": ["a", "ʌ", "o", "u"], "consonants": ["k", "n", "m", "s", "l", "b", "j"]}
EN = {"space": " ", "vowels": ["æ", "ʌ", "i", "u"], "consonants": ["t", "n", "m", "s", "l", "w", "h", "k", "ð"]}
for lang, inv in (("ko", KO), ("en", EN)):
    ENTRIES.append((inv["space"], lang, False))
    for v in inv["vowels"]:
        ENTRIES.append((v, lang, True))
    for c in inv["consonants"]:
        ENTRIES.append((c, lang, False))
ID = {(lang, sym): i for i, (sym, lang, _) in enumerate(ENTRIES)}

# Toy grapheme-to-phoneme tables over romanized text.
G2P = {
    "ko": {"a": "a", "e": "ʌ", "o": "o", "u": "u", "i": "a", "y": "j", "k": "k", "g": "k",
           "n": "n", "m": "m", "s": "s", "l": "l", "r": "l", "b": "b", "h": "k", "d": "s",
           "j": "j", "c": "s", "t": "s", "p": "b", "w": "u"},
    "en": {"a": "æ", "e": "ʌ", "i": "i", "o": "ʌ", "u": "u", "y": "i", "t": "t", "d": "t",
           "n": "n", "m": "m", "s": "s", "z": "s", "c": "k", "k": "k", "q": "k", "g": "k",
           "l": "l", "r": "l", "w": "w", "h": "h", "f": "h", "v": "w", "b": "m", "p": "m",
           "j": "ð", "x": "s"},
}


def phonemize(text, lang):
    out = []
    table = G2P[lang]
    for ch in text.lower():
        if ch == " ":
            if out and out[-1] != ID[(lang, " ")]:
                out.append(ID[(lang, " ")])
            continue
        sym = table.get(ch)
        if sym is None:
            continue
        pid = ID[(lang, sym)]
        if out and out[-1] == pid:
            continue
        out.append(pid)
    while out and out[-1] == ID[(lang, " ")]:
        out.pop()
    return out


def is_vowel(pid):
    return ENTRIES[pid][2]


def natural_durations(phonemes):
    """Blank-interleaved per-token frames: blanks 1, vowels 7, consonants 4, spaces 3."""
    per = [1]
    for p in phonemes:
        sym = ENTRIES[p][0]
        per.append(3 if sym == " " else 7 if is_vowel(p) else 4)
        per.append(1)
    return per


def scaled_durations(phonemes, total):
    base = natural_durations(phonemes)
    f = total / sum(base)
    per = [max(0, round(d * f)) for d in base]
    # Fix rounding drift on the longest tokens so the sum hits `total` exactly.
    drift = total - sum(per)
    order = sorted(range(len(per)), key=lambda i: (-per[i], i))
    i = 0
    while drift != 0:
        j = order[i % len(order)]
        step = 1 if drift > 0 else -1
        if per[j] + step >= 0:
            per[j] += step
            drift -= step
        i += 1
    return per


# ---------------------------------------------------------------------------
# Sentences

SOURCE = "oneul bame uri mannayo"
SOURCE_FRAMES = 150
TARGET = "Tonight we will be meeting at the usual place over there"

# (id, text, duration ratio to the source, cosine similarity to the source)
ISO_STREAM = [
    ("iso-01", "We are meeting tonight at the usual place", 1.30, 0.90),
    ("iso-02", "Tonight then", 0.40, 0.91),
    ("iso-03", "See you at night", 0.98, 0.62),
    ("iso-04", "We will meet tonight", 0.96, 0.88),
    ("iso-05", "Let us meet tonight", 1.00, 0.93),
]
INITIAL = (TARGET, 1.55, 0.95)

# (id, text, total frames, semantic score)
PS_STREAM = [
    ("ps-00", "We will meet tonight", 144, 0.86),
    ("ps-01", "Let us meet tonight", 140, 0.91),
    ("ps-02", "Tonight we meet", 128, 0.83),
    ("ps-03", "Meet me tonight", 136, 0.88),
    ("ps-04", "We meet tonight", 150, 0.90),
    ("ps-05", "Tonight we will meet", 120, 0.55),
    ("ps-06", "Say we meet at night", 138, 0.72),
    ("ps-07", "Our meeting is tonight", 152, 0.79),
]

# ---------------------------------------------------------------------------
# Embeddings

DIM = 8
rng = random.Random(20240531)


def unit(v):
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


SRC_EMB = unit([rng.gauss(0, 1) for _ in range(DIM)])


def embedding_with_similarity(sim):
    r = [rng.gauss(0, 1) for _ in range(DIM)]
    dot = sum(a * b for a, b in zip(r, SRC_EMB))
    ortho = unit([a - dot * b for a, b in zip(r, SRC_EMB)])
    s = math.sqrt(max(0.0, 1.0 - sim * sim))
    return [round(sim * a + s * b, 9) for a, b in zip(SRC_EMB, ortho)]


# ---------------------------------------------------------------------------
# Vowel vectors: two sub-clusters per vowel around a base point.

VOWEL_BASE = {
    ("ko", "a"): [1.0, 0.2, 0.0, 0.3, 0.1, 0.0],
    ("ko", "ʌ"): [0.2, 1.0, 0.3, 0.0, 0.0, 0.2],
    ("ko", "o"): [0.0, 0.3, 1.0, 0.1, 0.4, 0.0],
    ("ko", "u"): [0.1, 0.0, 0.2, 1.0, 0.0, 0.5],
    ("en", "æ"): [0.9, 0.3, 0.1, 0.2, 0.1, 0.1],
    ("en", "ʌ"): [0.3, 0.9, 0.2, 0.1, 0.0, 0.1],
    ("en", "i"): [0.6, 0.0, 0.0, 0.2, 1.0, 0.0],
    ("en", "u"): [0.1, 0.1, 0.5, 0.9, 0.0, 0.4],
}
VECTORS_PER_VOWEL = 12


def vowel_rows():
    vrng = random.Random(7)
    rows = []
    for (lang, sym), base in VOWEL_BASE.items():
        offsets = [[vrng.gauss(0, 0.15) for _ in base] for _ in range(2)]
        for i in range(VECTORS_PER_VOWEL):
            off = offsets[i % 2]
            vec = [round(b + o + vrng.gauss(0, 0.03), 6) for b, o in zip(base, off)]
            rows.append({"language": lang, "vowel": sym, "vector": vec})
    return rows


# ---------------------------------------------------------------------------
# Audio: three voiced segments separated by two silences.

SEGMENTS = [(0.0, 0.8, True), (0.8, 1.3, False), (1.3, 2.2, True), (2.2, 2.6, False), (2.6, 3.0, True)]


def synth_audio():
    n = int(3.0 * RATE)
    arng = random.Random(11)
    samples = []
    for i in range(n):
        t = i / RATE
        voiced = next(v for a, b, v in SEGMENTS if a <= t < b or (b == 3.0 and t >= a))
        if voiced:
            env = 0.6 + 0.4 * math.sin(2 * math.pi * 3.0 * t) ** 2
            x = env * (0.22 * math.sin(2 * math.pi * 140 * t) + 0.12 * math.sin(2 * math.pi * 280 * t)
                       + 0.06 * math.sin(2 * math.pi * 420 * t))
        else:
            x = arng.uniform(-1, 1) * 0.002
        samples.append(x)
    return samples


def write_wav(path, samples):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(RATE)
        w.writeframes(b"".join(struct.pack("<h", max(-32767, min(32767, round(s * 32767)))) for s in samples))


# ---------------------------------------------------------------------------
# CTC emissions: 40 frames over {blank, a, b}; five target tokens, each its own
# word, with two blank stretches between them.

def emissions():
    plan = ["a"] * 5 + ["b"] * 5 + ["<b>"] * 12 + ["a"] * 4 + ["b"] * 3 + ["<b>"] * 6 + ["a"] * 5
    vocab = {"<b>": 0, "a": 1, "b": 2}
    rows = []
    for lab in plan:
        p = [0.06] * 3
        p[vocab[lab]] = 0.88
        rows.append([math.log(x) for x in p])
    return {"blank_index": 0, "targets": [1, 2, 1, 2, 1], "log_probs": rows}


# ---------------------------------------------------------------------------


def jsonl(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    alphabet = {
        "blank_id": 0,
        "null_id": 1,
        "entries": [{"id": i, "symbol": s, "language": l, "is_vowel": v} for i, (s, l, v) in enumerate(ENTRIES)],
    }
    (OUT / "alphabet.json").write_text(json.dumps(alphabet, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")

    phon_rows, dur_rows, emb_rows, para_rows, sem_rows = [], [], [], [], []
    seen_phon = set()

    def add_sentence(text, lang, total, label, sim=None):
        ph = phonemize(text, lang)
        if (text, lang) not in seen_phon:
            seen_phon.add((text, lang))
            phon_rows.append({"text": text, "language": lang, "phonemes": ph})
            per = scaled_durations(ph, total)
            dur_rows.append({"id": label, "language": lang, "phonemes": ph, "per_token": per, "total": sum(per)})
        if sim is not None:
            emb_rows.append({"text": text, "vector": SRC_EMB if sim == 1.0 else embedding_with_similarity(sim)})

    add_sentence(SOURCE, "ko", SOURCE_FRAMES, "src-001", 1.0)
    emb_rows[-1]["vector"] = [round(x, 9) for x in SRC_EMB]
    add_sentence(INITIAL[0], "en", round(SOURCE_FRAMES * INITIAL[1]), "tgt-000", INITIAL[2])
    for cid, text, ratio, sim in ISO_STREAM:
        add_sentence(text, "en", round(SOURCE_FRAMES * ratio), cid, sim)
        para_rows.append({"source": SOURCE, "stage": "iso", "id": cid, "text": text})
    for cid, text, frames, sem in PS_STREAM:
        add_sentence(text, "en", frames, cid)
        para_rows.append({"source": SOURCE, "stage": "ps", "id": cid, "text": text})
        sem_rows.append({"source": SOURCE, "candidate": text, "score": sem})

    jsonl(OUT / "phonemes.jsonl", phon_rows)
    jsonl(OUT / "durations.jsonl", dur_rows)
    jsonl(OUT / "embeddings.jsonl", emb_rows)
    jsonl(OUT / "paraphrases.jsonl", para_rows)
    jsonl(OUT / "semantic.jsonl", sem_rows)
    jsonl(OUT / "vowel_corpus.jsonl", vowel_rows())

    manifest = {
        "phonemes": "phonemes.jsonl",
        "durations": "durations.jsonl",
        "embeddings": "embeddings.jsonl",
        "paraphrases": "paraphrases.jsonl",
        "semantic": "semantic.jsonl",
    }
    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    manifest_ps = dict(manifest)
    del manifest_ps["semantic"]
    (OUT / "manifest_no_semantic.json").write_text(json.dumps(manifest_ps, indent=2) + "\n")

    (OUT / "emissions.json").write_text(json.dumps(emissions()) + "\n")
    write_wav(OUT / "source.wav", synth_audio())

    config = {
        "paths": {
            "audio": "source.wav",
            "alphabet": "alphabet.json",
            "fixtures": "manifest.json",
            "vowel_corpus": "vowel_corpus.jsonl",
        },
        "source": {"text": SOURCE, "language": "ko"},
        "target": {"text": TARGET, "language": "en"},
        "selection": {"mode": "ps", "candidates": 60},
        "output_dir": "out",
        "seed": 0,
    }
    (OUT / "pipeline.json").write_text(json.dumps(config, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
