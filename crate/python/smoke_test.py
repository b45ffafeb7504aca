"""Smoke test for the thoughtprune Python bindings.

Build and install first:

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/thoughtprune-*.whl

then run `python python/smoke_test.py`.
"""

import json
import math
import random
import struct
import tempfile
from pathlib import Path

import thoughtprune as tp

ROOT = Path(__file__).resolve().parent.parent
POOL = ROOT / "crates" / "core" / "data" / "sample_pool.txt"


def check(name, cond):
    print(f"{'ok  ' if cond else 'FAIL'} {name}")
    if not cond:
        raise SystemExit(1)


def write_embm_by_hand(path, rows, meta):
    m, d = len(rows), len(rows[0])
    blob = json.dumps(meta).encode()
    with open(path, "wb") as f:
        f.write(b"EMBM" + struct.pack("<BQQ", 1, m, d))
        for r in rows:
            f.write(struct.pack(f"<{d}f", *r))
        f.write(struct.pack("<I", len(blob)) + blob)


def main():
    text = "<think>\nFirst.\n\nWait, second.\n\nThird.\n\nFourth.\n</think>\nAnswer: 4"
    trace = tp.segment(text)
    check("segment", trace.thoughts == ["First.", "Wait, second.", "Third.", "Fourth."])
    check("join round trip", tp.join(trace) == text)

    plan = tp.plan_indices(10, 0.4, "epic")
    check("epic plan", plan.omega == [1, 2, 9, 10] and plan.nominal_retained == 4)
    check("moc plan", tp.plan_indices(10, 0.4, "moc").omega == [4, 5, 6, 7])
    r1 = tp.plan_indices(10, 0.5, "random", seed=3).omega
    check("random plan seeded", r1 == tp.plan_indices(10, 0.5, "random", seed=3).omega and len(r1) == 5)
    kept = tp.apply(trace, tp.plan_indices(4, 0.5, "epic"))
    check("apply", kept.thoughts == ["First.", "Fourth."])

    lex = tp.ReflectionLexicon()
    check("lexicon count", lex.count("Wait, hmm. But actually, on second thought no.") == 5)
    check("free count", tp.count_reflection_tokens("wait wait", lex) == 2)

    check("perturb indices", tp.select_perturb_indices(10, "middle", 0.4) == [4, 5, 6, 7])
    out = tp.perturb_thought("Wait, the sum is 12. However, check it.", ["Filler one.", "Filler two."], seed=1)
    check("perturb keeps markers", lex.count(out) == 2 and "12" not in out)

    check("digamma(1)", abs(tp.digamma(1.0) + 0.5772156649015329) < 1e-14)

    rng = random.Random(0)
    a = [[rng.gauss(0, 1)] for _ in range(400)]
    b = [[0.9 * x[0] + math.sqrt(1 - 0.81) * rng.gauss(0, 1)] for x in a]
    est = tp.estimate_mi(a, b, k=5)
    check("mi near closed form", abs(est["value"] + 0.5 * math.log(1 - 0.81)) < 0.15)
    try:
        tp.estimate_mi([[0.0]] * 10, [[0.0]] * 10, k=3)
        check("degenerate raises", False)
    except ArithmeticError:
        check("degenerate raises", True)

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        path = tmp / "a.embm"
        write_embm_by_hand(path, a, {"model_id": "m", "strategy": "epic", "tau": 0.5, "dataset_hash": "x", "layer": 3})
        header = tp.validate_embm(path)
        check("embm header", header["rows"] == 400 and header["cols"] == 1 and header["meta"]["layer"] == 3)
        rows, meta = tp.read_embm(path)
        check("embm values", all(abs(r[0] - x[0]) < 1e-6 for r, x in zip(rows, a)) and meta["tau"] == 0.5)
        tp.write_embm(tmp / "b.embm", b, {"model_id": "m"})
        check("mi from files", abs(tp.estimate_mi_files(path, tmp / "b.embm")["value"] - est["value"]) < 0.05)

        data = tmp / "d.jsonl"
        with open(data, "w") as f:
            for i in range(5):
                gen = "\n\n".join(f"Step {j}. Wait, recheck." for j in range(8))
                f.write(json.dumps({"problem": f"q{i}", "generation": gen, "answer": str(i)}) + "\n")
        report = tp.condense_dataset(data, tmp / "c.jsonl", strategy="epic", tau=0.5)
        check("condense report", report["examples_written"] == 5 and report["retention"] == 0.5)
        report = tp.perturb_dataset(data, tmp / "p.jsonl", POOL, region="middle", fraction=0.5, seed=2)
        check("perturb report", report["markers_before"] == report["markers_after"])
        stats = tp.dataset_stats(tmp / "c.jsonl")
        check("stats", stats["thoughts"]["mean"] == 4.0)

    v = tp.validate_gaussian(m=1000, seed=1)
    check("gaussian validation", v["pass"])
    print("smoke test passed")


if __name__ == "__main__":
    main()
