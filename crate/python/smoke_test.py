#!/usr/bin/env python3
"""Smoke test for the signvote_py extension module.

Builds nothing itself: it locates the compiled cdylib under target/
(release preferred), exposes it as an importable module, and exercises the
main operations end to end. Exits nonzero on the first failure.

Usage:
    cargo build -p signvote-py --release
    python3 python/smoke_test.py
"""

import itertools
import json
import math
import random
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def locate_module() -> Path:
    candidates = [
        REPO / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libsignvote_py.so", "libsignvote_py.dylib", "signvote_py.dll")
    ]
    for c in candidates:
        if c.exists():
            return c
    sys.exit(
        "signvote_py library not found; run `cargo build -p signvote-py --release` first"
    )


def import_module():
    lib = locate_module()
    stage = Path(tempfile.mkdtemp(prefix="signvote_py_"))
    suffix = ".pyd" if lib.suffix == ".dll" else ".so"
    shutil.copy2(lib, stage / f"signvote_py{suffix}")
    sys.path.insert(0, str(stage))
    import signvote_py

    return signvote_py


checks = 0


def check(cond, label):
    global checks
    checks += 1
    if not cond:
        sys.exit(f"FAIL: {label}")
    print(f"ok: {label}")


def main():
    sv = import_module()
    print(f"signvote_py {sv.version()} from {locate_module()}")

    # Sign quantization and tie-break.
    check(sv.sign_of(3.7) == 1 and sv.sign_of(-0.2) == -1, "sign_of on nonzero")
    check(sv.sign_of(0.0) == 1, "sign_of(0) tie-break")

    # Decoders.
    dec, score = sv.majority_vote([1, 1, -1])
    check(dec == 1 and score == 1.0, "majority vote 2-vs-1")
    dec, _ = sv.majority_vote([1, -1])
    check(dec == 1, "majority vote tie goes to +1")
    check(abs(sv.llr_weight(0.1) - math.log(9)) < 1e-12, "llr weight ln 9")
    dec, score = sv.weighted_majority_vote([1, -1, -1], [5.0, 1.0, 1.0])
    check(dec == 1 and abs(score - 3.0) < 1e-12, "weighted vote heavy worker")

    # Weighted vote with LLR weights agrees with the ML oracle on every word.
    rng = random.Random(7)
    for m in range(1, 7):
        p = [0.01 + 0.98 * rng.random() for _ in range(m)]
        w = [sv.llr_weight(pi) for pi in p]
        for bits in itertools.product((1, -1), repeat=m):
            wmv, _ = sv.weighted_majority_vote(list(bits), w)
            ml = sv.ml_oracle(list(bits), p)
            if wmv != ml:
                sys.exit(f"FAIL: ml equivalence at M={m} p={p} word={bits}")
    check(True, "weighted vote with LLR weights == ML oracle (M <= 6, all words)")

    # Exact decode error vs the closed form p^3 + 3 p^2 (1-p) at p = 0.1.
    e = sv.exact_decode_error([0.1, 0.1, 0.1])
    check(abs(e["average"] - 0.028) < 1e-12, "exact decode error closed form")

    # Bound evaluators.
    check(abs(sv.gamma_wmv([0.1]) - 0.4394449154672439) < 1e-12, "gamma value")
    check(
        abs(sv.wmv_error_bound([0.1] * 3) - math.exp(-3 * sv.gamma_wmv([0.1] * 3)))
        < 1e-15,
        "bound = exp(-M gamma)",
    )
    check(sv.asymptotic_exponent_uniform(0.5) == 0.25, "uniform-p exponent limit at 1/2")
    check(
        abs(sv.wmv_bound_batches([64] * 8, 1.0) - 1.0 / 6.0) < 1e-12,
        "batch-form bound at B=64, M=8",
    )
    bound, vacuous = sv.mv_bound_batches([4] * 4, 1.0)
    check(vacuous and bound == 1.0, "mv batch bound flags vacuous regime")
    check(
        sv.imperfect_bound([0.1] * 3, 0.0, 0.0) == sv.wmv_error_bound([0.1] * 3),
        "imperfect bound reduces at delta = 0",
    )
    check(sv.computing_error_bound(64, 1.0) == 0.125, "computing error bound")
    lhs, rhs = sv.large_deviation_check(0.3, 2.5)
    check(lhs <= rhs * (1 + 1e-12), "large-deviation inequality point check")
    bound, step = sv.universal_rate_bound(8.0, 0.0, [1.0], 4, 0.25)
    check(abs(bound - 4.0) < 1e-12 and abs(step - 2.0) < 1e-12, "rate bound example")

    # Communication accounting.
    fv = sv.communication_cost("signsgd_fv", 15, 1000, 10)
    sgd = sv.communication_cost("sgd", 15, 1000, 10)
    check(fv == 2 * 15 * 1000 * 10 and fv / sgd == 1 / 32, "cost formulas and 1/32 ratio")
    check(sv.batch_mode_sizes(4, 15) == [904] + [4] * 14, "batch mode 4 preset")

    # A small end-to-end run, twice, must be identical.
    config = """
workers = 3
dim = 8
rounds = 40
initial_rounds = 5
learning_rate = 0.05
seed = 12
decoder = "fv"

[batch]
uniform = 4

[objective]
kind = "quadratic"
samples = 32
noise = 0.5

[channel]
mode = "synthetic"
p = [0.05, 0.2, 0.4]
"""
    out1 = sv.run_experiment(config)
    out2 = sv.run_experiment(config)
    check(len(out1["records"]) == 40, "run produces one record per round")
    check(out1["records"] == out2["records"], "identical seeds reproduce records")
    check(out1["final_x"] == out2["final_x"], "identical seeds reproduce the model")
    meta = out1["metadata"]
    check(meta["diverged"] is False, "run completed")
    check(
        meta["total_bits_up"] + meta["total_bits_down"] == 2 * 3 * 8 * 40,
        "sign-mode bit accounting 2MNT",
    )
    check(meta["weight_uncertainty"]["observed"] > 0, "uncertainty measured")
    check(json.dumps(meta["config"]) == json.dumps(out2["metadata"]["config"]),
          "config echo stable")

    # Losses should go down on the quadratic.
    check(
        out1["records"][-1]["f"] < out1["records"][0]["f"],
        "objective decreases over the run",
    )

    # Monte Carlo suites (small but real).
    wmv_checks = sv.verify_wmv_bound(trials=10000, configs=8, seed=3)
    check(
        all(c["verdict"] != "violated" for c in wmv_checks),
        "wmv bound holds on sampled configs",
    )
    imp_checks = sv.verify_imperfect_bound(0.0, 0.0, trials=10000, configs=8, seed=3)
    check(
        [c["errors"] for c in wmv_checks] == [c["errors"] for c in imp_checks],
        "delta = 0 reproduces the perfect-weight counts",
    )

    print(f"\nall {checks} smoke checks passed")


if __name__ == "__main__":
    main()
