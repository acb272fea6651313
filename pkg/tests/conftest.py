import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from egpf.core import GameSpec, TypeSet, TypeVector
from egpf.scenarios import oncology_game

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def onc():
    return oncology_game()


def simple_types(K: int) -> TypeSet:
    """K valid, well-separated types with strictly ascending alpha_E."""
    types = []
    for k in range(K):
        e = 0.1 + 0.8 * k / max(K - 1, 1)
        rest = (1.0 - e) / 3.0
        types.append(TypeVector(e, rest, rest, rest, beta=1.0, gamma=0.5, delta=0.5, kappa=1.0))
    return TypeSet(tuple(types), separation=0.0)


def random_game(rng: np.random.Generator, M: int, L: int, K: int, tau: float = 3.0) -> GameSpec:
    return GameSpec(
        type_set=simple_types(K),
        pharma_actions=tuple(f"a{i}" for i in range(M)),
        physician_responses=tuple(f"d{i}" for i in range(L)),
        u_P=rng.normal(size=(M, L, K)),
        u_D=rng.normal(size=(M, L, K)),
        prior=rng.dirichlet(np.ones(K)),
        tau=tau,
    )


# acceptance reporting: each acceptance test tags itself with a criterion number,
# and one status line per criterion is printed at the end of the run
_CRITERIA: dict[int, dict] = {}


@pytest.fixture
def criterion(request):
    def tag(number: int, title: str, detail: str = ""):
        request.node.user_properties.append(("criterion", (number, title)))
        if detail:
            request.node.user_properties.append(("detail", detail))
    return tag


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when != "call" and not (report.failed or hasattr(report, "wasxfail")):
        return
    number, title = props["criterion"]
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "notes": []})
    if report.failed or hasattr(report, "wasxfail"):
        entry["ok"] = False
        entry["notes"].append(f"{report.head_line}: " + (getattr(report, "wasxfail", "") or "failed"))
    elif report.when == "call" and "detail" in props:
        entry["notes"].append(props["detail"])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["ok"] else "FAIL"
        line = f"criterion {number:>2} {status}  {entry['title']}"
        if entry["notes"]:
            line += "  [" + "; ".join(entry["notes"]) + "]"
        terminalreporter.write_line(line)
