"""One-way tests of analyze and plan on the shipped marketplace models.

Runs the shipped suite against the reference engine and the two mutants and
prints each report. The reference passes; each mutant fails the test aimed
at its defect.

    python3 demos/01_oneway_suite.py
"""

from rtmtest import DATA_DIR as DATA
from rtmtest.engines import get_engine
from rtmtest.harness import load_suite, run_suite

SUITE = DATA / "oneway" / "suite.json"


def main():
    suite = load_suite(SUITE)
    for name in ("self-healing", "mutant-analyze", "mutant-plan"):
        report = run_suite(suite, get_engine(name), SUITE.parent)
        print(f"== {name} (exit code {report.exit_code})")
        print(report.to_text())


if __name__ == "__main__":
    main()
