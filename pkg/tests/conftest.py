import sys
from fractions import Fraction

import pytest

from hyperwalk.automaton import builtin_automaton
from hyperwalk.green import GreenEvaluator, StepDistribution, solve_tree_first_passage
from hyperwalk.group_model import builtin_model

BIASED = {"a": Fraction(2, 5), "A": Fraction(1, 10), "b": Fraction(3, 10), "B": Fraction(1, 5)}


@pytest.fixture(scope="session")
def f2():
    return builtin_model("F2")


@pytest.fixture(scope="session")
def f3():
    return builtin_model("F3")


@pytest.fixture(scope="session")
def z2z3():
    return builtin_model("Z2*Z3")


@pytest.fixture(scope="session")
def uniform_f2(f2):
    return StepDistribution.uniform(f2)


@pytest.fixture(scope="session")
def biased_m2(f2):
    return StepDistribution(f2, BIASED, name="biased_m2")


@pytest.fixture(scope="session")
def uniform_z2z3(z2z3):
    return StepDistribution.uniform(z2z3)


@pytest.fixture(scope="session")
def f2_aut(f2):
    return builtin_automaton(f2)


@pytest.fixture(scope="session")
def z2z3_aut(z2z3):
    return builtin_automaton(z2z3)


@pytest.fixture(scope="session")
def uniform_table(f2, uniform_f2):
    return solve_tree_first_passage(f2, uniform_f2)


@pytest.fixture(scope="session")
def biased_table(f2, biased_m2):
    return solve_tree_first_passage(f2, biased_m2)


@pytest.fixture(scope="session")
def uniform_green(uniform_f2):
    return GreenEvaluator(uniform_f2)


@pytest.fixture(scope="session")
def biased_green(biased_m2):
    return GreenEvaluator(biased_m2)


@pytest.fixture(scope="session")
def z2z3_green(uniform_z2z3):
    return GreenEvaluator(uniform_z2z3)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
