import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orliczlab.catalog import function_entry
from orliczlab.errors import DomainError, EmptyBallError, InputError
from orliczlab.geometry import Box, Disk, Interval, Union, shape_from_json
from orliczlab.grid import (
    GridDomain,
    GridField,
    admissible_radius,
    ball_average,
    build_domain,
    gradient_fd,
    interior_set,
    mollify,
    sharp_average,
    sharp_averages,
)


def test_interval_nodes_exclude_boundary():
    dom = build_domain(Interval(0, 1), 0.25)
    assert np.allclose(dom.points[:, 0], [0.25, 0.5, 0.75])
    assert dom.distance[1] == pytest.approx(0.5)


def test_unit_square_single_node():
    dom = GridDomain(Box((0, 0), (1, 1)), 0.5)
    assert dom.size == 1
    assert np.allclose(dom.points[0], [0.5, 0.5])
    assert dom.distance[0] == pytest.approx(0.5)


def test_l_shape_distances():
    shape = Union((Box((0, 0), (2, 1)), Box((0, 0), (1, 2))))
    dom = GridDomain(shape, 0.25)
    # hand-computed: near the reentrant corner, inside the vertical arm, inside the horizontal arm
    for point, d in (((1.25, 1.25), None), ((1.5, 0.5), 0.5), ((0.5, 1.5), 0.5), ((1.25, 0.75), 0.25)):
        if d is None:
            assert not shape.contains(np.array([point]))[0]
            continue
        k = dom.node_of(point)
        assert dom.distance[k] == pytest.approx(d)
    # the reentrant corner (1, 1) is a boundary point for nodes in the corner region
    k = dom.node_of((0.75, 0.75))
    assert dom.distance[k] == pytest.approx(math.hypot(0.25, 0.25))


def test_shape_json_roundtrip():
    for shape in (Interval(0, 1), Disk((0, 0), 1.0), Union((Box((0, 0), (2, 1)), Box((0, 0), (1, 2))))):
        assert shape_from_json(shape.to_json()) == shape


def test_three_dimensional_domain_rejected():
    with pytest.raises(InputError):
        shape_from_json({"type": "box", "lo": [0, 0, 0], "hi": [1, 1, 1]})


def test_interior_set_examples():
    dom = GridDomain(Interval(0, 1), 0.01)
    assert len(interior_set(dom, 0.0)) == dom.size
    x = dom.points[interior_set(dom, 0.25), 0]
    assert x.min() > 0.25 and x.max() < 0.75
    assert len(interior_set(dom, 0.6)) == 0


@given(st.floats(0, 0.5), st.floats(0, 0.5))
def test_interior_set_nesting(r1, r2):
    dom = GridDomain(Disk((0, 0), 1.0), 1 / 16)
    lo, hi = sorted((r1, r2))
    assert set(interior_set(dom, hi)) <= set(interior_set(dom, lo))


def test_ball_average_examples():
    dom = GridDomain(Interval(-1, 1), 1e-3)
    const = GridField(dom, np.full(dom.size, 3.0))
    assert ball_average(const, (0.1,), 0.05) == pytest.approx(3.0)
    lin = GridField.from_function(dom, lambda p: p[:, 0])
    assert ball_average(lin, (0.3,), 0.1) == pytest.approx(0.3, abs=1e-6)
    sq = GridField.from_function(dom, lambda p: p[:, 0] ** 2)
    r = 0.2
    assert ball_average(sq, (0.0,), r) == pytest.approx(r * r / 3, abs=1e-5)


def test_sharp_average_examples():
    dom = GridDomain(Interval(-1, 1), 1e-3)
    const = GridField(dom, np.full(dom.size, 3.0))
    assert sharp_average(const, (0.2,), 0.1) == pytest.approx(0.0, abs=1e-12)
    lin = GridField.from_function(dom, lambda p: p[:, 0])
    r = 0.1
    assert sharp_average(lin, (0.2,), r) / r == pytest.approx(0.5, rel=1e-4)
    absx = GridField.from_function(dom, lambda p: np.abs(p[:, 0]))
    assert sharp_average(absx, (0.0,), r) == pytest.approx(r / 4, rel=1e-3)


def test_ball_errors():
    dom = GridDomain(Interval(0, 1), 0.01)
    f = GridField(dom, dom.points[:, 0])
    with pytest.raises(EmptyBallError):
        sharp_average(f, (0.5,), 0.02)
    with pytest.raises(DomainError):
        sharp_average(f, (0.05,), 0.1)


def test_admissible_radius_holds_min_nodes():
    for n in (1, 2):
        h = 0.01
        r = admissible_radius(n, h)
        assert math.pi ** (n / 2) / math.gamma(n / 2 + 1) * r ** n == pytest.approx(8 * 2 ** (n - 1) * h ** n)


def test_gradient_fd_examples():
    dom = GridDomain(Interval(0, 3), 0.01)
    lin = GridField.from_function(dom, lambda p: 2 * p[:, 0] + 1)
    assert np.allclose(gradient_fd(lin).values[:, 0], 2.0)
    assert np.allclose(gradient_fd(GridField(dom, np.ones(dom.size))).values, 0.0)
    s = GridField.from_function(dom, lambda p: np.sin(p[:, 0]))
    g = gradient_fd(s).values[:, 0]
    inner = interior_set(dom, 1.5 * dom.h)
    assert np.max(np.abs(g[inner] - np.cos(dom.points[inner, 0]))) <= 2 * dom.h ** 2


def test_gradient_fd_second_order_2d():
    entry = function_entry("wave")
    errs = []
    for h in (1 / 32, 1 / 64):
        dom = GridDomain(Disk((0, 0), 1.0), h)
        g = gradient_fd(GridField(dom, entry(dom.points))).values
        inner = interior_set(dom, 1.5 * h)
        errs.append(np.max(np.abs(g[inner] - entry.gradient(dom.points[inner]))))
    assert errs[0] / errs[1] > 3.5


def test_mollify_constant_and_linear():
    dom = GridDomain(Box((0, 0), (1, 1)), 1 / 64)
    c = mollify(GridField(dom, np.full(dom.size, 2.5)), 0.1)
    assert np.allclose(c.values, 2.5)
    assert np.all(dom.shape.distance(c.domain.points) > 0.1)
    lin = GridField.from_function(dom, lambda p: p[:, 0] - 2 * p[:, 1])
    m = mollify(lin, 0.1)
    assert np.allclose(m.values, m.domain.points[:, 0] - 2 * m.domain.points[:, 1], atol=1e-12)
    with pytest.raises(InputError):
        mollify(lin, dom.h)


def test_mollify_contraction(rng):
    dom = GridDomain(Interval(0, 1), 1e-3)
    f = GridField(dom, rng.normal(size=dom.size))
    assert np.max(np.abs(mollify(f, 0.02).values)) <= np.max(np.abs(f.values))


def test_sharp_quotient_converges_to_gradient():
    entry = function_entry("gaussian", center=[0.1, -0.2], width=0.6)
    dom = GridDomain(Disk((0, 0), 1.0), 1 / 128)
    f = GridField(dom, entry(dom.points))
    cn = 4 / (3 * math.pi)
    prev = None
    for r in (0.2, 0.1, 0.05):
        nodes, _, sharp = sharp_averages(f, r, interior_set(dom, 0.5)[::40])
        grad = np.linalg.norm(entry.gradient(dom.points[nodes]), axis=1)
        err = np.max(np.abs(sharp / r - cn * grad))
        # C_f r from the Hessian bound plus quadrature error
        assert err <= entry.hessian_bound * r + 5 * dom.h / r
        if prev is not None:
            assert err < prev
        prev = err


def test_field_csv_export(tmp_path):
    dom = GridDomain(Interval(0, 1), 0.25)
    GridField(dom, [1.0, 2.0, 3.0]).to_csv(tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x0,value" and lines[2] == "0.5,2.0"


def test_field_rejects_nonfinite():
    dom = GridDomain(Interval(0, 1), 0.25)
    with pytest.raises(InputError):
        GridField(dom, [1.0, np.nan, 3.0])
