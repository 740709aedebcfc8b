import os

import numpy as np
import pytest

import flowrom
from flowrom.fem import TaylorHoodSpace


def pytest_collection_modifyitems(config, items):
    if os.environ.get("FLOWROM_EXTENDED"):
        return
    skip = pytest.mark.skip(reason="extended suite disabled (set FLOWROM_EXTENDED=1)")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def square8():
    mesh = flowrom.uniform_rect_mesh(8, 8)
    return mesh, TaylorHoodSpace(mesh)


@pytest.fixture(scope="session")
def kh_run():
    """Short shear-layer run shared by the POD/ROM/diagnostics tests."""
    from flowrom.fom import FomConfig, build_initial_condition, kelvin_helmholtz_boundary, run_fom

    mesh = flowrom.identify_periodic(flowrom.uniform_rect_mesh(16, 16), "x")
    space = TaylorHoodSpace(mesh)
    u0 = build_initial_condition("kelvin-helmholtz", space)
    cfg = FomConfig(nu=1 / 2800, dt=0.02, t_end=0.5, form="skew", scheme="backward_euler",
                    boundary=kelvin_helmholtz_boundary(), snapshot_window=(0.0, 0.5),
                    project_initial=True)
    _, snaps, series = run_fom(cfg, mesh, space, u0)
    return mesh, space, snaps, series, cfg


@pytest.fixture(scope="session")
def kh_basis_session(kh_run):
    from flowrom.pod import build_pod_basis

    _, space, snaps, _, _ = kh_run
    return build_pod_basis(snaps, space.mass(), space.stiffness(), centering="none")


@pytest.fixture(scope="session")
def homogeneous_field_pairs(square8):
    """Seeded random velocity pairs vanishing on the whole boundary."""
    _, space = square8
    labels = ["left", "right", "top", "bottom"]
    mask, _ = space.dirichlet_data({lab: ("noslip",) for lab in labels})
    rng = np.random.default_rng(2024)
    pairs = []
    for _ in range(20):
        u = rng.standard_normal(space.n_vel)
        v = rng.standard_normal(space.n_vel)
        u[mask] = 0.0
        v[mask] = 0.0
        pairs.append((u, v))
    return pairs


def oracle_quadrature():
    """Degree-6 12-point rule, independent of the package's degree-5 rule."""
    a1, a2 = 0.063089014491502, 0.249286745170910
    b1, b2 = 0.310352451033785, 0.053145049844816
    w1, w2, w3 = 0.025422453185103, 0.058393137863189, 0.041425537809187
    pts = []
    wts = []
    for a, w in ((a1, w1), (a2, w2)):
        pts += [(1 - 2 * a, a, a), (a, 1 - 2 * a, a), (a, a, 1 - 2 * a)]
        wts += [w, w, w]
    for (b, c) in ((b1, b2),):
        for perm in ((b, c, 1 - b - c), (c, b, 1 - b - c), (b, 1 - b - c, c),
                     (c, 1 - b - c, b), (1 - b - c, b, c), (1 - b - c, c, b)):
            pts.append(perm)
            wts.append(w3)
    return np.array(pts), np.array(wts)
