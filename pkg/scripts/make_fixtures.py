"""Freeze oracle-computed reference values used by the test-suite.

Run from the repository root:  python scripts/make_fixtures.py
"""
import json
from pathlib import Path

from sagaqnet import oracle

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def werner(f):
    return [f, (1 - f) / 3, (1 - f) / 3, (1 - f) / 3]


def compose(q1, q2):
    return q1 + q2 - q1 * q2


def purify_line_by_hand(p_gate=0.005, p_meas=0.005, q=0.03):
    """The purify_line saga on ideal memories, composed circuit by circuit.

    Each end prepares a pair (gate noise), ships half over its channel,
    the centre swaps; node 3 swaps the two segments; the ends purify two
    such end-to-end pairs with both nodes' charges.
    """
    prep = oracle.depolarize_circuit([1.0, 0.0, 0.0, 0.0], p_gate)
    sent = oracle.depolarize_circuit(prep, q)
    seg = oracle.swap_circuit(sent, sent, p_meas)
    e2e = oracle.swap_circuit(seg, seg, p_meas)
    p, out = oracle.dejmps_circuit(e2e, e2e, compose(p_gate, p_gate), compose(p_meas, p_meas))
    return {
        "p_gate": p_gate, "p_meas": p_meas, "q": q,
        "segment": seg.tolist(), "end_to_end": e2e.tolist(),
        "p_succ": p, "out": out.tolist(),
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    purify = []
    for f in (0.6, 0.7, 0.8, 0.9):
        p, out = oracle.dejmps_circuit(werner(f), werner(f))
        purify.append({"f_in": f, "p_succ": p, "out": out.tolist()})
    swap = {
        "a": werner(0.9),
        "b": werner(0.9),
        "out": oracle.swap_circuit(werner(0.9), werner(0.9)).tolist(),
    }
    line = purify_line_by_hand()
    (OUT / "purify_line_by_hand.json").write_text(json.dumps(line, indent=2) + "\n")
    (OUT / "purify_werner.json").write_text(json.dumps(purify, indent=2) + "\n")
    (OUT / "swap_werner.json").write_text(json.dumps(swap, indent=2) + "\n")
    print(json.dumps({"purify": purify, "swap": swap, "purify_line": line}, indent=2))


if __name__ == "__main__":
    main()
