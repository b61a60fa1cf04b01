import cmath
import math

import numpy as np
import pytest

from sembeam.channel import (
    ArrayGeometry,
    NoPathsError,
    PathComponent,
    channel_from_paths,
    relative_powers,
    steering_vector,
)


def make_path(gain, aoa_el, aoa_az, aod_el, aod_az, **kw):
    defaults = dict(path_length=10.0, bounce_count=0, last_hop_point=np.zeros(3), is_los=True)
    defaults.update(kw)
    return PathComponent(gain, aoa_el, aoa_az, aod_el, aod_az, **defaults)


def scalar_steering(n_a, n_b, el, az):
    # independent scalar re-derivation of the element phases
    out = []
    for a in range(n_a):
        for b in range(n_b):
            phase = math.pi * (a * math.cos(el) + b * math.sin(el) * math.sin(az))
            out.append(cmath.exp(1j * phase) / math.sqrt(n_a * n_b))
    return np.array(out)


class TestSteeringVector:
    def test_two_element_vertical_broadside(self):
        # elevation pi/2 zeroes the vertical phase ramp
        v = steering_vector(ArrayGeometry(2, 1), math.pi / 2, 0.0)
        np.testing.assert_allclose(v, np.array([1.0, 1.0]) / math.sqrt(2), atol=1e-12)

    def test_two_element_horizontal_endfire(self):
        v = steering_vector(ArrayGeometry(1, 2), math.pi / 2, math.pi / 2)
        np.testing.assert_allclose(v, np.array([1.0, -1.0]) / math.sqrt(2), atol=1e-12)

    def test_matches_scalar_rederivation(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n_a, n_b = int(rng.integers(1, 5)), int(rng.integers(1, 9))
            el = float(rng.uniform(0, math.pi))
            az = float(rng.uniform(-math.pi, math.pi))
            v = steering_vector(ArrayGeometry(n_a, n_b), el, az)
            np.testing.assert_allclose(v, scalar_steering(n_a, n_b, el, az), atol=1e-12)

    def test_unit_norm(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            geom = ArrayGeometry(int(rng.integers(1, 9)), int(rng.integers(1, 65)))
            el = float(rng.uniform(0, math.pi))
            az = float(rng.uniform(-math.pi, math.pi))
            v = steering_vector(geom, el, az)
            assert abs(np.linalg.norm(v) - 1.0) < 1e-12

    def test_flat_ordering_is_vertical_major(self):
        # with elevation 0 the phase depends only on the vertical index a
        geom = ArrayGeometry(2, 3)
        v = steering_vector(geom, 0.0, 0.3)
        first_row = v[:3]
        second_row = v[3:]
        np.testing.assert_allclose(first_row, first_row[0] * np.ones(3), atol=1e-12)
        np.testing.assert_allclose(second_row / first_row, -np.ones(3), atol=1e-12)

    def test_rejects_bad_geometry(self):
        with pytest.raises(ValueError):
            ArrayGeometry(0, 4)


class TestChannelFromPaths:
    def test_single_path_scalar_arrays(self):
        p = make_path(2.0 + 0.0j, math.pi / 2, 0.0, math.pi / 2, 0.0)
        h = channel_from_paths([p], ArrayGeometry(1, 1), ArrayGeometry(1, 1))
        np.testing.assert_allclose(h, np.array([[2.0 + 0.0j]]), atol=1e-15)

    def test_shape(self):
        p = make_path(1.0, 1.5, 0.2, 1.6, -0.1)
        h = channel_from_paths([p], ArrayGeometry(2, 4), ArrayGeometry(3, 5))
        assert h.shape == (8, 15)

    def test_additivity_is_exact(self):
        rng = np.random.default_rng(2)
        rx, tx = ArrayGeometry(2, 3), ArrayGeometry(2, 2)
        for _ in range(20):
            p1 = make_path(complex(rng.normal(), rng.normal()), *rng.uniform(0.1, 3.0, 4))
            p2 = make_path(complex(rng.normal(), rng.normal()), *rng.uniform(0.1, 3.0, 4))
            h12 = channel_from_paths([p1, p2], rx, tx)
            h1 = channel_from_paths([p1], rx, tx)
            h2 = channel_from_paths([p2], rx, tx)
            assert np.array_equal(h12, h1 + h2)  # fixed-order float sums, exact

    def test_single_path_frobenius_norm_is_gain_magnitude(self):
        rng = np.random.default_rng(3)
        rx, tx = ArrayGeometry(2, 2), ArrayGeometry(2, 2)
        for _ in range(30):
            g = complex(rng.normal(), rng.normal())
            p = make_path(g, *rng.uniform(0.1, 3.0, 4))
            h = channel_from_paths([p], rx, tx)
            # |g| * |a_rx| * |a_tx| with unit-norm steering vectors
            assert abs(np.linalg.norm(h) - abs(g)) < 1e-12

    def test_empty_paths_raise(self):
        with pytest.raises(NoPathsError):
            channel_from_paths([], ArrayGeometry(1, 1), ArrayGeometry(1, 1))


class TestRelativePowers:
    def test_examples(self):
        paths = [
            make_path(1.0, 1, 0, 1, 0),
            make_path(0.5j, 1, 0, 1, 0),
            make_path(-0.25, 1, 0, 1, 0),
        ]
        np.testing.assert_allclose(relative_powers(paths), [1.0, 0.25, 0.0625], atol=1e-15)

    def test_max_is_exactly_one(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            paths = [
                make_path(complex(rng.normal(), rng.normal()), 1, 0, 1, 0)
                for _ in range(int(rng.integers(1, 10)))
            ]
            rp = relative_powers(paths)
            assert rp.max() == 1.0
            assert np.all(rp > 0) or np.any(rp == 0)  # nonnegative by construction
            assert np.all(rp <= 1.0)

    def test_errors(self):
        with pytest.raises(NoPathsError):
            relative_powers([])
        with pytest.raises(ValueError):
            relative_powers([make_path(0.0, 1, 0, 1, 0)])
