import random

import pytest

from ihda import models
from ihda.closedloop import simulate
from ihda.ipn import Budget, BudgetExceeded, parse_ipn, reachable_markings, restrict
from ihda.plantsim import Plant, PlantConfig, Scenario
from ihda.translate import TRANSFER_RESTRICTION, build_ihda


def random_net_text(rng: random.Random, n_places=None, n_trans=None, n_inputs=2) -> str:
    """A random small net; every transition has a non-empty preset."""
    n_places = n_places or rng.randint(1, 6)
    n_trans = n_trans or rng.randint(1, 6)
    places = [f"p{k}" for k in range(n_places)]
    ins = [f"a{k}" for k in range(n_inputs)]
    marked = rng.sample(places, rng.randint(1, n_places))
    lines = ["inputs: " + " ".join(ins), "outputs: X Y", "places:"]
    for p in places:
        extra = rng.choice(["", ' output "X"', ' output "Y"', ' output "!X"'])
        lines.append(f"  {p}{extra}" + (" tokens 1" if p in marked else ""))
    lines.append("transitions:")
    for k in range(n_trans):
        pre = rng.sample(places, rng.randint(1, min(2, n_places)))
        post = rng.sample(places, rng.randint(0, min(2, n_places)))
        cond = rng.choice(["TRUE", ins[0], "!" + ins[0], ins[-1]])
        post_s = (" post " + " ".join(post)) if post else ""
        lines.append(f'  t{k} in "{cond}" pre {" ".join(pre)}{post_s}')
    return "\n".join(lines) + "\n"


def random_component_net_text(rng: random.Random) -> str:
    """Synchronised state machines, 1-safe by construction.

    Each component holds one token that its transitions move around; a
    transition touches one or two components.
    """
    n_comp = rng.randint(1, 3)
    sizes = [2] * n_comp
    for _ in range(rng.randint(0, 6 - 2 * n_comp)):
        sizes[rng.randrange(n_comp)] += 1
    comps, k = [], 0
    for size in sizes:
        comps.append([f"p{k + j}" for j in range(size)])
        k += size
    lines = ["inputs: a0 a1", "outputs: X Y", "places:"]
    start = [rng.choice(c) for c in comps]
    reach = {id(c): {p} for c, p in zip(comps, start)}  # places the token can get to
    for c in comps:
        for p in c:
            extra = rng.choice(["", ' output "X"', ' output "Y"', ' output "!X"'])
            lines.append(f"  {p}{extra}" + (" tokens 1" if p in start else ""))
    lines.append("transitions:")
    for t in range(rng.randint(1, 6)):
        touched = rng.sample(comps, min(len(comps), rng.choice([1, 1, 2])))
        pre = [rng.choice(sorted(reach[id(c)])) for c in touched]
        post = [rng.choice(c) for c in touched]
        for c, p in zip(touched, post):
            reach[id(c)].add(p)
        cond = rng.choice(["TRUE", "a0", "!a0", "a1"])
        lines.append(f'  t{t} in "{cond}" pre {" ".join(pre)} post {" ".join(post)}')
    return "\n".join(lines) + "\n"


def random_safe_nets(seed: int, count: int):
    """``count`` random 1-safe nets with at most 6 places and 6 transitions.

    Three in four are component nets; the rest are unstructured nets kept
    only if exploration shows them 1-safe.
    """
    rng = random.Random(seed)
    nets = []
    while len(nets) < count:
        if rng.random() < 0.75:
            nets.append(parse_ipn(random_component_net_text(rng)))
            continue
        net = parse_ipn(random_net_text(rng))
        try:
            reachable_markings(net, Budget(max_tokens=1, max_markings=5000))
        except BudgetExceeded:
            continue
        nets.append(net)
    return nets


@pytest.fixture(scope="session")
def buggy():
    return models.load("transfer_buggy")


@pytest.fixture(scope="session")
def fixed():
    return models.load("transfer_fixed")


@pytest.fixture(scope="session")
def buggy_ihda(buggy):
    return build_ihda(buggy)


@pytest.fixture(scope="session")
def fixed_ihda(fixed):
    return build_ihda(fixed)


@pytest.fixture(scope="session")
def restricted_buggy_ihda(buggy):
    return build_ihda(restrict(buggy, TRANSFER_RESTRICTION))


def closed_loop(ihda, cfg=PlantConfig(), start_at=3):
    plant = Plant(cfg, Scenario.press_start(start_at))
    return simulate(ihda, plant, max_cycles=200), plant


@pytest.fixture(scope="session")
def fixed_run(fixed_ihda):
    """Closed-loop run of the fixed model under the default plant geometry."""
    return closed_loop(fixed_ihda)


def word_of(ihda, trace):
    return [
        (ihda.inputs.valuation(r["inputs"]), ihda.outputs.valuation(r["outputs"]))
        for r in trace
    ]


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
