"""A seeded in-the-loop campaign, its replay and a diverging replay.

The same seed reproduces the trace byte for byte. Replaying the trace with a
faulty planner points at the first planned snapshot that differs.

    python3 demos/02_campaign_replay.py
"""

from rtmtest import DATA_DIR as DATA
from rtmtest.automaton import load_automaton
from rtmtest.engines import get_engine
from rtmtest.mape import serialize_trace
from rtmtest.properties import load_properties
from rtmtest.simulator import replay, run_campaign


def main():
    automaton = load_automaton(DATA / "selfhealing.automaton.json")
    props = load_properties(DATA / "heal.prop")
    result = run_campaign(automaton, get_engine("self-healing"), 30, 2, props)
    print(result.to_text())

    again = replay(result.trace)
    same = serialize_trace(again.trace) == serialize_trace(result.trace)
    print(f"replay identical: {same}, divergence: {again.divergence}")

    broken = replay(result.trace, get_engine("mutant-plan"))
    snap = broken.trace.snapshots[broken.divergence]
    print(f"mutant-plan diverges at snapshot {broken.divergence} "
          f"({snap.phase.value}, iteration {snap.iteration})")

    naive = run_campaign(automaton, get_engine("identity"), 20, 7, props)
    print(naive.to_text())


if __name__ == "__main__":
    main()
