#!/usr/bin/env python3
"""Builds the replay fixtures under data/fixtures.

Each prediction file is a constructed set of answers whose aggregate scores
land on a fixed reference row (word accuracy, CER, F1, latency) and, for the
test-set rows, on a fixed top-3 error distribution. The answers are derived
from the manifest truth by planting substitutions, deletions and insertions, searching
until every aggregate rounds to its target. Metrics are recomputed here with
the same definitions the toolkit uses; the C++ tests replay the files through
the real scorer.

Usage: tools/make_fixtures.py [--data DIR]
"""

import argparse
import json
import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_table(path):
    entries = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        token, cps = line.split("\t")[:2]
        glyphs = "".join(chr(int(c.strip()[2:], 16)) for c in cps.split(","))
        entries.append((token, glyphs))
    return entries


def to_manchu(word, table):
    out, i = [], 0
    while i < len(word):
        best = max((t for t in table if word.startswith(t[0], i)), key=lambda t: len(t[0]))
        out.append(best[1])
        i += len(best[0])
    return "".join(out)


def to_roman(text, table):
    out, i = [], 0
    while i < len(text):
        best = max((t for t in table if text.startswith(t[1], i)), key=lambda t: len(t[1]))
        out.append(best[0])
        i += len(best[1])
    return "".join(out)


def levenshtein(a, b):
    row = list(range(len(b) + 1))
    for i in range(1, len(a) + 1):
        diag, row[0] = row[0], i
        for j in range(1, len(b) + 1):
            up = row[j]
            row[j] = min(up + 1, row[j - 1] + 1, diag + (a[i - 1] != b[j - 1]))
            diag = up
    return row[-1]


def longest_block(p, plo, phi, t, tlo, thi):
    best = (plo, tlo, 0)
    prev = [0] * (thi - tlo + 1)
    for i in range(plo, phi):
        cur = [0] * (thi - tlo + 1)
        for j in range(tlo, thi):
            k = j - tlo + 1
            if p[i] != t[j]:
                continue
            cur[k] = prev[k - 1] + 1
            ps, ts = i + 1 - cur[k], j + 1 - cur[k]
            if cur[k] > best[2] or (cur[k] == best[2] and (ts < best[1] or (ts == best[1] and ps < best[0]))):
                best = (ps, ts, cur[k])
        prev = cur
    return best


def matched(p, t, plo=0, phi=None, tlo=0, thi=None):
    phi = len(p) if phi is None else phi
    thi = len(t) if thi is None else thi
    if plo >= phi or tlo >= thi:
        return 0
    ps, ts, n = longest_block(p, plo, phi, t, tlo, thi)
    if n == 0:
        return 0
    return n + matched(p, t, plo, ps, tlo, ts) + matched(p, t, ps + n, phi, ts + n, thi)


def char_f1(p, t):
    tp = matched(p, t)
    return 2 * tp / (len(p) + len(t))


def attribution(p, t):
    """Characters charged by the edit-script backtrace (match > sub > del > ins)."""
    n, m = len(t), len(p)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (t[i - 1] != p[j - 1]))
    out, i, j = [], n, m
    while i > 0 or j > 0:
        cur = d[i][j]
        if i and j and t[i - 1] == p[j - 1] and cur == d[i - 1][j - 1]:
            i, j = i - 1, j - 1
        elif i and j and cur == d[i - 1][j - 1] + 1:
            out.append(t[i - 1])
            i, j = i - 1, j - 1
        elif i and cur == d[i - 1][j] + 1:
            out.append(t[i - 1])
            i -= 1
        else:
            out.append(p[j - 1])
            j -= 1
    return sorted(out)


def fmt(x, places):
    return f"{x:.{places}f}"


class Row:
    def __init__(self, name, manifest, acc, cer, f1, latency, top3=None):
        self.name, self.manifest = name, manifest
        self.acc, self.cer, self.f1, self.latency = acc, cer, f1, latency
        self.top3 = top3  # [(glyph, share%), ...], concentration%

    def places(self, s):
        return len(s.split(".")[1])


def window(target, n):
    """Sum range whose mean displays as `target` (a string), shrunk for safety."""
    places = len(target.split(".")[1])
    half = 0.5 * 10 ** -places
    t = float(target)
    return (t - 0.6 * half) * n, (t + 0.6 * half) * n


def concentration_counts(top3, max_total):
    shares, conc = top3
    for total in range(1, max_total + 1):
        cands = []
        for _, share in shares:
            cands.append([x for x in range(total + 1) if fmt(100 * x / total, 1) == share])
        for a in cands[0]:
            for b in cands[1]:
                for c in cands[2]:
                    if a > b > c and fmt(100 * (a + b + c) / total, 1) == conc:
                        yield total, (a, b, c)


class Planter:
    """Edits are (coord, kind, glyph). Characters sit at odd coords 2i+1,
    insertion gaps at even coords 2k; edits keep >= 3 apart so no two
    interact."""

    def __init__(self, truth, glyph_pool):
        self.truth, self.pool = truth, glyph_pool

    def _free(self, coord, edits):
        return all(abs(coord - c) >= 3 for c, _, _ in edits)

    def char_slots(self, sample, edits, glyph):
        t = self.truth[sample]
        return [2 * i + 1 for i in range(len(t)) if t[i] == glyph and self._free(2 * i + 1, edits)]

    def gap_slots(self, sample, edits):
        return [2 * k for k in range(len(self.truth[sample]) + 1) if self._free(2 * k, edits)]

    def apply(self, sample, edits):
        t = self.truth[sample]
        absent = [g for g in self.pool if g not in t]
        by = {c: (k, g) for c, k, g in edits}
        out = []
        for k in range(len(t) + 1):
            if 2 * k in by:
                out.append(by[2 * k][1])
            if k == len(t):
                break
            e = by.get(2 * k + 1)
            if e is None:
                out.append(t[k])
            elif e[0] == "sub":
                out.append(absent[(k * 7 + len(t)) % len(absent)])
        return "".join(out)


def consistent(planter, sample, edits):
    """True when the edits cost exactly one each and charge the intended glyphs."""
    t = planter.truth[sample]
    p = planter.apply(sample, edits)
    return bool(p) and levenshtein(p, t) == len(edits) and attribution(p, t) == sorted(g for _, _, g in edits)


def place(planter, rng, sample, edits, glyph):
    """One charged edit for `glyph` in `sample`: a substitution when the word
    has that character free, otherwise an insertion. False if no room."""
    slots = [(c, "sub") for c in planter.char_slots(sample, edits, glyph)]
    rng.shuffle(slots)
    gaps = [(c, "ins") for c in planter.gap_slots(sample, edits)]
    rng.shuffle(gaps)
    for c, kind in slots + gaps:
        edits.append((c, kind, glyph))
        if consistent(planter, sample, edits):
            return True
        edits.pop()
    return False


def plant_row(row, samples, glyph_pool, seed):
    rng = random.Random(seed)
    n = len(samples)
    truth = [s["manchu"] for s in samples]
    planter = Planter(truth, glyph_pool)
    correct = round(float(row.acc) * n / 100)
    assert fmt(100 * correct / n, 1) == row.acc, row.name
    wrong_n = n - correct
    cer_lo, cer_hi = window(row.cer, n)
    f1_lo, f1_hi = window(row.f1, n)
    cer_mid = (cer_lo + cer_hi) / 2
    present = {}
    for t in truth:
        for g in t:
            present[g] = present.get(g, 0) + 1

    if row.top3:
        budgets = [b for b in concentration_counts(row.top3, 2000) if wrong_n <= b[0] <= 6 * wrong_n][:8]
    else:
        budgets = [(None, None)]

    for attempt in range(3000):
        total, top = budgets[attempt % len(budgets)]
        charges = []
        if top is not None:
            named = [g for g, _ in row.top3[0]]
            for g, k in zip(named, top):
                charges += [g] * k
            rest = total - sum(top)
            others = [g for g in glyph_pool if g not in named and present.get(g, 0) >= 10]
            cap = top[2] - 1
            if cap * len(others) < rest:
                continue
            fill = {g: 0 for g in others}
            while rest:
                g = rng.choices(others, weights=[present[o] for o in others])[0]
                if fill[g] < cap:
                    fill[g] += 1
                    rest -= 1
            for g, k in fill.items():
                charges += [g] * k
        else:
            # free budget: one edit per wrong sample to start, charged to a random character
            charges = [None] * wrong_n

        # pick wrong samples near the length that gives the right CER per edit
        edits_per = len(charges) / wrong_n
        ideal_len = edits_per * wrong_n / cer_mid
        order = list(range(n))
        rng.shuffle(order)
        order.sort(key=lambda i: abs(len(truth[i]) - ideal_len) + rng.random() * 4)
        wrong = order[:wrong_n]
        edits = {i: [] for i in wrong}
        rng.shuffle(charges)
        if charges and charges[0] is None:
            charges = [truth[i][rng.randrange(len(truth[i]))] for i in wrong]
        ok = True
        # first pass gives every wrong sample one edit, matched to a character it contains
        pending = list(charges)
        for i in wrong:
            k = next((k for k, g in enumerate(pending) if planter.char_slots(i, edits[i], g)), 0)
            if not place(planter, rng, i, edits[i], pending.pop(k)):
                ok = False
                break
        for g in pending if ok else []:
            cands = ([i for i in wrong if planter.char_slots(i, edits[i], g)]
                     or [i for i in wrong if planter.gap_slots(i, edits[i])])
            rng.shuffle(cands)
            if not any(place(planter, rng, i, edits[i], g) for i in cands):
                ok = False
                break
        if not ok:
            continue

        def cer_sum():
            return sum(len(edits[i]) / len(truth[i]) for i in wrong)

        for _ in range(30000):
            s = cer_sum()
            if cer_lo <= s <= cer_hi:
                break
            i = rng.choice(wrong)
            if top is None:
                # add or drop edits freely
                if s < cer_lo:
                    place(planter, rng, i, edits[i], truth[i][rng.randrange(len(truth[i]))])
                elif len(edits[i]) > 1:
                    edits[i].pop()
                continue
            if rng.random() < 0.5:
                # move one edit's charge to another wrong sample
                if len(edits[i]) < 2:
                    continue
                e = rng.randrange(len(edits[i]))
                g = edits[i][e][2]
                hosts = [j for j in wrong if j != i and planter.char_slots(j, edits[j], g)]
                j = rng.choice(hosts) if hosts and rng.random() < 0.9 else rng.choice(wrong)
                if j == i:
                    continue
                delta = 1 / len(truth[j]) - 1 / len(truth[i])
                if abs(s + delta - cer_mid) >= abs(s - cer_mid):
                    continue
                trial = list(edits[j])
                rest = edits[i][:e] + edits[i][e + 1:]
                if consistent(planter, i, rest) and place(planter, rng, j, trial, g):
                    edits[j] = trial
                    edits[i] = rest
            else:
                # hand a whole edit set to a currently correct sample
                j = rng.randrange(n)
                if j in edits:
                    continue
                delta = len(edits[i]) / len(truth[j]) - len(edits[i]) / len(truth[i])
                if abs(s + delta - cer_mid) >= abs(s - cer_mid):
                    continue
                trial = []
                if all(place(planter, rng, j, trial, g) for _, _, g in edits[i]):
                    del edits[i]
                    wrong[wrong.index(i)] = j
                    edits[j] = trial
        if not cer_lo <= cer_sum() <= cer_hi:
            continue

        # F1 rises when a substitution becomes a deletion; flip until inside the window
        def f1_of(i):
            p = planter.apply(i, edits[i])
            return char_f1(p, truth[i]) if p else None

        s = correct + sum(f1_of(i) for i in wrong)
        flips = [(i, k) for i in wrong for k in range(len(edits[i])) if edits[i][k][1] == "sub"]
        rng.shuffle(flips)
        for i, k in flips:
            if s >= f1_lo:
                break
            before = f1_of(i)
            c, _, g = edits[i][k]
            edits[i][k] = (c, "del", g)
            after = f1_of(i)
            if after is None or not consistent(planter, i, edits[i]):
                edits[i][k] = (c, "sub", g)
                continue
            s += after - before
        if not f1_lo <= s <= f1_hi:
            continue

        preds = verify(row, samples, edits, planter, correct, total, top)
        if preds is not None:
            return preds
    raise SystemExit(f"no fixture found for {row.name}")


def verify(row, samples, edits, planter, correct, total, top):
    n = len(samples)
    cer_acc = f1_acc = 0.0
    exact = 0
    counts = {}
    preds = []
    for idx, s in enumerate(samples):
        t = s["manchu"]
        p = planter.apply(idx, edits[idx]) if idx in edits else t
        if not p:
            return None
        exact += p == t
        cer_acc += levenshtein(p, t) / len(t)
        f1_acc += char_f1(p, t)
        for g in attribution(p, t):
            counts[g] = counts.get(g, 0) + 1
        preds.append(p)
    if exact != correct:
        return None
    if fmt(cer_acc / n, len(row.cer.split(".")[1])) != row.cer or fmt(f1_acc / n, len(row.f1.split(".")[1])) != row.f1:
        return None
    if top is not None:
        tot = sum(counts.values())
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:3]
        want = [g for g, _ in row.top3[0]]
        if [g for g, _ in ranked] != want or tot != total:
            return None
        shares = [fmt(100 * k / tot, 1) for _, k in ranked]
        if shares != [sh for _, sh in row.top3[0]] or fmt(100 * sum(k for _, k in ranked) / tot, 1) != row.top3[1]:
            return None
    return preds


def build_manifest(words, table, n, prefix, rng, short_bias):
    short = [w for w in words if len(to_manchu(w, table)) <= 4]
    rows = []
    for i in range(n):
        w = rng.choice(short) if rng.random() < short_bias else rng.choice(words)
        sid = f"{prefix}{i:04d}"
        rows.append({"id": sid, "imagePath": f"images/{sid}.png", "manchu": to_manchu(w, table), "roman": w,
                     "fontId": "fixture", "split": prefix.rstrip("-")})
    return rows


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, separators=(",", ":")) + "\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data", default=str(ROOT / "data"))
    args = ap.parse_args()
    data = Path(args.data)
    table = load_table(data / "manchu_mollendorff.tsv")
    words = [l.strip() for l in (data / "lexicon.txt").read_text(encoding="utf-8").splitlines()
             if l.strip() and not l.startswith("#")]
    glyph_pool = sorted({g for _, g in table if len(g) == 1})
    out = data / "fixtures"

    rng = random.Random(20240601)
    val = build_manifest(words, table, 1000, "val-", rng, 0.0)
    test = build_manifest(words, table, 218, "test-", rng, 0.8)
    write_jsonl(out / "validation_manifest.jsonl", val)
    write_jsonl(out / "test_manifest.jsonl", test)

    A, E, I, N, M, D = (to_manchu(x, table) for x in ["A", "E", "I", "N", "M", "D"])
    rows = [
        Row("llama-3.2-11b_validation", val, "98.3", "0.0024", "0.998", "14.7"),
        Row("qwen2.5-vl-7b_validation", val, "87.5", "0.0264", "0.978", "1.3"),
        Row("qwen2.5-vl-3b_validation", val, "84.4", "0.0329", "0.973", "1.2"),
        Row("llama-3.2-11b_test", test, "93.1", "0.0219", "0.983", "8.9",
            ([(A, "32.4"), (E, "14.7"), (M, "8.8")], "55.9")),
        Row("qwen2.5-vl-7b_test", test, "43.1", "0.254", "0.789", "0.9",
            ([(A, "23.6"), (I, "12.6"), (N, "8.7")], "44.9")),
        Row("qwen2.5-vl-3b_test", test, "23.9", "0.368", "0.709", "0.7",
            ([(A, "27.2"), (I, "11.9"), (D, "6.2")], "45.3")),
    ]
    for k, row in enumerate(rows):
        preds = plant_row(row, row.manifest, glyph_pool, 1000 + k)
        lines = []
        for s, p in zip(row.manifest, preds):
            lines.append({"id": s["id"], "manchu": p, "roman": to_roman(p, table),
                          "latencySeconds": float(row.latency), "raw": f"Manchu:{p}\nRoman:{to_roman(p, table)}"})
        write_jsonl(out / "predictions" / f"{row.name}.jsonl", lines)
        print("wrote", row.name)


if __name__ == "__main__":
    main()
