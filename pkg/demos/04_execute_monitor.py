"""Execute and monitor co-tested against a simulated adaptable software.

An erroneous input model describes a crashed component. The harness injects
that error into the software, lets the engine's execute and monitor steps run
and classifies the difference between what was planned and what is observed.

    python3 demos/04_execute_monitor.py
"""

from rtmtest import DATA_DIR as DATA
from rtmtest.engines import get_engine
from rtmtest.harness import EMTest, run_execute_monitor
from rtmtest.model import RTM, load
from rtmtest.selfhealing.software import NoisySoftware, SimulatedAdaptableSoftware


def main():
    erroneous = load(DATA / "oneway" / "erroneous.json")
    test = EMTest("crash", erroneous)
    for name in ("self-healing", "mutant-execute", "mutant-monitor", "masking"):
        verdict = run_execute_monitor(test, get_engine(name), SimulatedAdaptableSoftware(RTM("marketplace")))
        print(f"{name:15s} {verdict.outcome.value:4s} {verdict.classification.value}")

    # an environment that sometimes loses a connector can make repeated runs disagree
    seen = set()
    for seed in range(20):
        sw = NoisySoftware(RTM("marketplace"), 0.2, seed)
        seen.add(run_execute_monitor(test, get_engine("self-healing"), sw).classification.value)
    print("noisy environment classifications:", sorted(seen))


if __name__ == "__main__":
    main()
