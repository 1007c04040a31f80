"""Plan and run the purify_line scenario in both execution modes.

Prints the saga, its predicted fidelity and what each mode delivered.

    python scripts/run_purify_line.py [seed]
"""
import sys
from pathlib import Path

from sagaqnet.engine import bootstrap_view, run
from sagaqnet.saga import plan
from sagaqnet.scenario import load_scenario

SCN = Path(__file__).resolve().parents[1] / "scenarios" / "purify_line.scn"


def main(seed=1):
    sc = load_scenario(SCN)
    o = sc.objectives[0]
    s = plan(o, bootstrap_view(sc), sc.policy, o.arrival)
    print(f"saga {s.id}: {len(s.tasks)} tasks, f_pred={s.f_pred:.6f}, t_pred={s.t_pred * 1e3:.3f} ms")
    for t in s.tasks:
        deps = ",".join(s.deps.get(t.id, ())) or "-"
        print(f"  {t.id:<3} {t.kind.value:<9} {'-'.join(t.participants):<6} after {deps}")
    print()
    for mode in ("orchestration", "choreography"):
        m = run(sc, seed, mode).metrics
        print(f"{mode:<14} fidelity={m[f'objective.{o.id}.fidelity']:.6f} "
              f"t={m[f'objective.{o.id}.completion_time'] * 1e3:.3f} ms "
              f"sagas={m[f'objective.{o.id}.sagas']} messages={m['messages.total']}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 1)
