import numpy as np
import pytest

from gridplan.vre import BinResource, RegionalResource, CAPACITY_DENSITY_MW_PER_KM2

# Per-bin potentials in GW: (avg CF %, shared land, agricultural land), plus solar on <10 % CF land.
TABLE2 = {
    "BA": ([(15.6, 2.7, 4.2), (25.0, 3.8, 2.9), (34.8, 3.8, 0.9), (45.3, 2.3, 0.4)], 2.1),
    "ME": ([(15.2, 2.1, 0.8), (24.8, 2.2, 0.6), (34.5, 1.5, 0.4), (45.0, 0.7, 0.2)], 1.8),
    "RS": ([(15.9, 2.5, 5.2), (24.9, 3.9, 15.4), (34.8, 3.4, 26.7), (43.8, 0.7, 1.6)], 1.6),
}
BIN_LABELS = ("10-20", "20-30", "30-40", "40-100")


def make_table2_resources():
    out = []
    for region, (rows, solar_gw) in TABLE2.items():
        bins = tuple(
            BinResource(
                label,
                share=0.0,
                agri_share=0.0,
                avg_cf=cf / 100.0,
                land_km2=shared * 1000.0 / CAPACITY_DENSITY_MW_PER_KM2,
                agri_land_km2=agri * 1000.0 / CAPACITY_DENSITY_MW_PER_KM2,
            )
            for label, (cf, shared, agri) in zip(BIN_LABELS, rows)
        )
        out.append(RegionalResource(region, bins, excluded_share=0.0,
                                    excluded_land_km2=solar_gw * 1000.0 / CAPACITY_DENSITY_MW_PER_KM2))
    return out


@pytest.fixture
def table2_resources():
    return make_table2_resources()


def random_feasible_lp(rng, max_rows=6, max_cols=6):
    """Bounded LP with a known interior-ish feasible point, mixed senses and a few free lower bounds."""
    from gridplan.lpsolve import LinearProgram

    m, n = int(rng.integers(1, max_rows + 1)), int(rng.integers(1, max_cols + 1))
    A = rng.integers(-5, 6, (m, n)).astype(float)
    x0 = rng.uniform(0.0, 5.0, n)
    senses = rng.choice(list("LEG"), m)
    act = A @ x0
    slack = rng.uniform(0.0, 3.0, m)
    b = np.where(senses == "L", act + slack, np.where(senses == "G", act - slack, act))
    lb = np.where(rng.random(n) < 0.2, -10.0, 0.0)
    ub = rng.uniform(5.0, 10.0, n)
    return LinearProgram.from_dense(rng.normal(size=n), A, senses, b, lb, ub)


DESK_CFG = """\
[scenario]
name = {name}
trade_cost = {trade}

[inputs]
dir = data

[model]
rep_days = 4
points_per_cell = 2000
seed = 42

[output]
dir = runs/{run_id}
"""


def desk_config(root, name="REF", trade="high", extra=""):
    from gridplan.runner import load_config

    path = root / f"{name.lower()}_{trade}.cfg"
    path.write_text(DESK_CFG.format(name=name, trade=trade, run_id=f"{name.lower()}_{trade}") + extra)
    return load_config(path)


@pytest.fixture(scope="session")
def desk_root(tmp_path_factory):
    """Three regions, five technologies each, no cascade."""
    from gridplan.synthetic import write_dataset

    root = tmp_path_factory.mktemp("desk")
    write_dataset(root / "data", preset="desk")
    return root


@pytest.fixture(scope="session")
def desk_inputs(desk_root):
    from gridplan.runner import load_inputs

    return load_inputs(desk_config(desk_root))


@pytest.fixture(scope="session")
def desk_runs(desk_root, desk_inputs):
    from gridplan.runner import run

    return {name: run(desk_config(desk_root, name), inputs=desk_inputs) for name in ("REF", "EL")}
