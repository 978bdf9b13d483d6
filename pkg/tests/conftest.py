import pytest

from prmix.bench import misspecified_scenario_suite
from prmix.diagnostics import Population, kl_oracle_fstar


@pytest.fixture(scope="session")
def scenarios():
    return {sc.name: sc for sc in misspecified_scenario_suite()}


@pytest.fixture(scope="session")
def scenario_a(scenarios):
    return scenarios["well-specified-gaussian"]


@pytest.fixture(scope="session")
def scenario_b(scenarios):
    return scenarios["misspecified-poisson"]


@pytest.fixture(scope="session")
def scenario_c(scenarios):
    return scenarios["boundary-poisson"]


@pytest.fixture(scope="session")
def pop_a(scenario_a):
    return Population(scenario_a.model, scenario_a.fit_support, scenario_a.model.kernel)


@pytest.fixture(scope="session")
def pop_b(scenario_b):
    return Population(scenario_b.model, scenario_b.fit_support, scenario_b.model.kernel)


@pytest.fixture(scope="session")
def oracle_a(scenario_a, pop_a):
    return kl_oracle_fstar(scenario_a.model, scenario_a.fit_support,
                           scenario_a.model.kernel, pop=pop_a)


@pytest.fixture(scope="session")
def oracle_b(scenario_b, pop_b):
    return kl_oracle_fstar(scenario_b.model, scenario_b.fit_support,
                           scenario_b.model.kernel, pop=pop_b)
