"""Time a long line carrying many sequential end-to-end requests.

    python scripts/scale_line.py [nodes] [objectives] [seed]
"""
import sys
import time

from sagaqnet.engine import run
from sagaqnet.generate import line_scenario


def main(nodes=10, objectives=1000, seed=7):
    sc = line_scenario(nodes, objectives)
    t0 = time.perf_counter()
    res = run(sc, seed)
    wall = time.perf_counter() - t0
    m = res.metrics
    print(f"{nodes} nodes, {objectives} objectives: {wall:.2f} s wall")
    print(f"completed={m['objectives.completed']} failed={m['objectives.failed']} "
          f"messages={m['messages.total']} trace_lines={len(res.trace)}")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:4]))
