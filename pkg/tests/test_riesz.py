import math

import numpy as np
import pytest

from oracles import riesz_direct
from unirect.config import ProbeConfig
from unirect.errors import ParameterError
from unirect.generators import GeneratorSpec, generate
from unirect.measure import DiscreteMeasure
from unirect.riesz import (pairing_sup, riesz_bound_scan, riesz_pairing,
                           riesz_truncated, scan_csv)


def wedge(angle, h=1e-4, length=1.0):
    t = np.arange(h / 2, length, h)
    e1 = np.array([1.0, 0.0])
    e2 = np.array([math.cos(angle), math.sin(angle)])
    P = np.concatenate([np.outer(t, e1), np.outer(t, e2)])
    return DiscreteMeasure(P, np.full(P.shape[0], h), 1), e1, e2


def test_wedge_vertex_transform():
    # each ray contributes -e log(s/r) at the vertex
    mu, e1, e2 = wedge(math.pi / 3)
    r, s = 0.01, 0.5
    got = riesz_truncated(mu, np.zeros(2), r, s).vector
    want = -(e1 + e2) * math.log(s / r)
    np.testing.assert_allclose(got, want, atol=5e-3)
    # pairing with the ray point at distance ~r: -(1 + cos angle) log(s/r)
    x = e1 * (r - 1e-4 / 2)
    assert riesz_pairing(mu, x, np.zeros(2), r, s) == pytest.approx(
        -(1 + math.cos(math.pi / 3)) * math.log(s / r), rel=2e-2)


def test_straight_line_cancels():
    mu, _, _ = wedge(math.pi)
    assert riesz_truncated(mu, np.zeros(2), 0.01, 0.5).norm < 1e-9


def test_matches_direct_sum():
    rng = np.random.default_rng(0)
    P = rng.normal(size=(300, 3))
    w = rng.uniform(0.5, 1.5, 300)
    mu = DiscreteMeasure(P, w, 2)
    z0 = np.array([0.2, 0.1, -0.3])
    got = riesz_truncated(mu, z0, 0.4, 2.0).vector
    np.testing.assert_allclose(got, riesz_direct(P, w, z0, 0.4, 2.0, 2),
                               rtol=1e-12, atol=1e-13)


def test_radius_and_distance_checks():
    mu, _, _ = wedge(1.0, h=0.01)
    with pytest.raises(ParameterError):
        riesz_truncated(mu, np.zeros(2), 0.5, 0.5)
    with pytest.raises(ParameterError):
        riesz_pairing(mu, [1.0, 0.0], np.zeros(2), 0.1, 0.5)
    assert pairing_sup(mu, np.array([5.0, 5.0]), 0.1, np.ones(2)) == (0.0, None)


def test_flat_scan_is_small_and_reproducible():
    mu = generate(GeneratorSpec("flat-plane", 3, 2, count=10 ** 4))
    h = mu.spacing
    cfg = ProbeConfig(samples=10, seed=3)
    a = riesz_bound_scan(mu, cfg, r_range=(8 * h, 8 * h), ratios=(2, 3))
    b = riesz_bound_scan(mu, cfg, r_range=(8 * h, 8 * h), ratios=(2, 3), jobs=4)
    assert scan_csv(a) == scan_csv(b) and a["argmax"] == b["argmax"]
    assert not a["warnings"]
    assert a["sup_pairing"] <= 10 * h / (8 * h)
    assert len(a["table"]) == 20 and len(a["growth"]) == 1
    assert scan_csv(a).startswith("r,s,ratio,pairing\n")
    # the scan's cumulative shell sums agree with the direct transform
    arg = a["argmax"]
    vec = riesz_truncated(mu, np.asarray(arg["z0"]), arg["r"], arg["s"]).vector
    direct = abs((np.asarray(arg["x"]) - arg["z0"]) @ vec) / arg["r"]
    assert direct == pytest.approx(a["sup_pairing"], rel=1e-9, abs=1e-12)
    with pytest.raises(ParameterError):
        riesz_bound_scan(mu, cfg, ratios=(1,))


def test_nonuniform_measure_warns():
    rng = np.random.default_rng(1)
    P = np.c_[rng.uniform(-1, 1, 4000) ** 3, np.zeros(4000)]
    mu = DiscreteMeasure(P, np.full(4000, 1e-3), 1)
    with pytest.warns(RuntimeWarning):
        rep = riesz_bound_scan(mu, ProbeConfig(samples=20), r_range=(0.01, 0.02),
                               ratios=(2, 5))
    assert rep["warnings"]
