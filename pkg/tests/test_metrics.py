import numpy as np
import pytest

from traitevo.errors import ContractViolation
from traitevo.grid import Grid1D, gaussian_density
from traitevo.metrics import (MomentRecord, central_moment, central_moments, gaussian_ansatz,
                              quantile_function, w1_to_gaussian, wasserstein)


@pytest.fixture
def fine():
    return Grid1D.symmetric(3.0, 0.002)


def test_central_moments_of_gaussian(fine):
    q = gaussian_density(fine, 0.2, 0.3)
    m = central_moments(q, 4)
    assert m[0] == 1 and m[1] == 0
    assert m[2] == pytest.approx(0.09, rel=1e-6)
    assert m[3] == pytest.approx(0.0, abs=1e-10)
    assert m[4] == pytest.approx(3 * 0.3 ** 4, rel=1e-5)
    assert central_moment(q, 1) == pytest.approx(0.2)
    with pytest.raises(ContractViolation):
        central_moment(q, 0)


def test_wasserstein_of_gaussians_matches_closed_form(fine):
    a = gaussian_density(fine, 0.0, 0.2)
    b = gaussian_density(fine, 0.3, 0.25)
    # W2 between Gaussians: sqrt(dmu^2 + dsigma^2)
    assert wasserstein(2, a, b, n_levels=20000) == pytest.approx(np.hypot(0.3, 0.05), rel=2e-3)
    # W1 between translates is the shift
    c = gaussian_density(fine, 0.3, 0.2)
    assert wasserstein(1, a, c) == pytest.approx(0.3, rel=1e-6)


def test_wasserstein_is_a_metric(fine, rng):
    qs = [gaussian_density(fine, rng.uniform(-1, 1), rng.uniform(0.1, 0.4)) for _ in range(3)]
    for p in (1, 2):
        assert wasserstein(p, qs[0], qs[0]) == pytest.approx(0.0, abs=1e-9)
        assert wasserstein(p, qs[0], qs[1]) == pytest.approx(wasserstein(p, qs[1], qs[0]))
        assert wasserstein(p, qs[0], qs[2]) <= (wasserstein(p, qs[0], qs[1])
                                                + wasserstein(p, qs[1], qs[2]) + 1e-9)
    with pytest.raises(ContractViolation):
        wasserstein(0.5, qs[0], qs[1])


def test_pair_must_share_grid(fine):
    other = Grid1D.symmetric(3.0, 0.01)
    with pytest.raises(ContractViolation):
        wasserstein(1, gaussian_density(fine, 0, 0.2), gaussian_density(other, 0, 0.2))


def test_quantile_function_of_gaussian(fine):
    qf = quantile_function(gaussian_density(fine, 0.0, 0.2), n_levels=4)
    from scipy.stats import norm
    assert np.allclose(qf.values, norm.ppf(qf.levels, scale=0.2), atol=2e-4)


def test_w1_to_own_gaussian_is_small(fine):
    q = gaussian_ansatz(0.1, 0.2, fine)
    assert w1_to_gaussian(q, 0.2) < 1e-8


def test_moment_record_row_order():
    names = MomentRecord.field_names()
    assert names[:3] == ["time", "rho", "m1"]
    r = MomentRecord(*range(10))
    assert r.as_row()[:10] == list(range(10))
