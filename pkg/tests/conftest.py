import numpy as np
import pytest

from d2c.dag import Dag, simulate


def explicit_dag(n, edges, coef=0.9, sigma=0.5, form="linear", order=None):
    """Dag with fixed coefficients; ``order`` defaults to the identity."""
    edges = tuple(edges)
    coeffs = {e: (0.0, coef) if form != "quadratic" else (0.0, coef, 0.5) for e in edges}
    return Dag(
        n_nodes=n,
        edges=edges,
        func_form={e: form for e in edges},
        coeffs=coeffs,
        noise_sigma=tuple([sigma] * n),
        order=tuple(order) if order is not None else tuple(range(n)),
    )


def chain(n=3, **kw):
    return explicit_dag(n, [(k, k + 1) for k in range(n - 1)], **kw)


@pytest.fixture
def chain_data():
    dag = chain(3)
    return dag, simulate(dag, 2000, seed=11)


@pytest.fixture
def collider_data():
    # 0 -> 1 <- 2
    dag = explicit_dag(3, [(0, 1), (2, 1)], order=(0, 2, 1))
    return dag, simulate(dag, 2000, seed=5)


def is_acyclic(n, edges):
    """Kahn's algorithm, independent of the generator's own ordering."""
    indeg = [0] * n
    out = [[] for _ in range(n)]
    for p, c in edges:
        indeg[c] += 1
        out[p].append(c)
    queue = [v for v in range(n) if indeg[v] == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for c in out[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return seen == n


def bivariate(rho, n, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    y = rho * x + np.sqrt(1 - rho**2) * rng.normal(size=n)
    return x, y


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
