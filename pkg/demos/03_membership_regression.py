"""Checking an observed trace against a simulation automaton.

A trace from the full fault automaton is not explained by a calm-only
automaton. Adding it as a regression branch makes it a member, and earlier
members keep their membership.

    python3 demos/03_membership_regression.py
"""

from rtmtest import DATA_DIR as DATA
from rtmtest.automaton import NO_OP, SimAutomaton, SimState, SimTransition, load_automaton
from rtmtest.engines import get_engine
from rtmtest.membership import add_regression, membership
from rtmtest.simulator import run_campaign


def main():
    stormy = load_automaton(DATA / "selfhealing.automaton.json")
    calm = SimAutomaton((SimState("calm"),), "calm", (SimTransition("calm", "calm", NO_OP),),
                        stormy.template, stormy.metric_rule, "calm-only")

    quiet = run_campaign(calm, get_engine("self-healing"), 5, 0).trace
    observed = run_campaign(stormy, get_engine("self-healing"), 8, 11).trace

    print("quiet trace in calm-only:", membership(quiet, calm).to_dict())
    verdict = membership(observed, calm)
    print("observed trace in calm-only:", verdict.to_dict())
    print("in the fault automaton:", membership(observed, stormy).member)

    extended = add_regression(calm, observed)
    print("states after add_regression:", [s.id for s in extended.states])
    print("observed now a member:", membership(observed, extended).member)
    print("quiet still a member:", membership(quiet, extended).member)


if __name__ == "__main__":
    main()
