import numpy as np
import pytest

import crossdiff as cd

from conftest import random_params


class TestParams:
    def test_valid(self):
        p = cd.Params(2.0, 1.0, 1.0, 1.0)
        assert p.det == 1.0
        assert p.as_tuple() == (2.0, 1.0, 1.0, 1.0)

    @pytest.mark.parametrize("bad", [
        (0.0, 1, 1, 1), (-1, 1, 1, 1), (2, 0, 1, 1), (2, 1, -3, 1), (2, 1, 1, 0),
    ])
    def test_rejects_nonpositive(self, bad):
        with pytest.raises(ValueError, match="positive"):
            cd.Params(*bad)

    def test_rejects_degenerate_determinant(self):
        with pytest.raises(ValueError, match="ad > bc"):
            cd.Params(1.0, 2.0, 2.0, 1.0)
        with pytest.raises(ValueError, match="ad > bc"):
            cd.Params(1.0, 1.0, 1.0, 1.0)  # equality is not allowed


class TestMuskatPreset:
    def test_mapping(self):
        p = cd.muskat_params(3.0, 0.5)
        assert p.as_tuple() == (4.0, 3.0, 1.5, 1.5)

    def test_determinant_is_mu_R(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            R, mu = rng.uniform(0.05, 10.0, size=2)
            p = cd.muskat_params(R, mu)
            assert p.det == pytest.approx(mu * R, rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            cd.muskat_params(0.0, 1.0)
        with pytest.raises(ValueError):
            cd.muskat_params(1.0, -2.0)


class TestThetaConstants:
    def test_reference_values(self):
        th = cd.theta_constants(cd.Params(2.0, 1.0, 1.0, 1.0))
        assert th.theta1 == pytest.approx(0.75, abs=0.0)
        assert th.theta2 == pytest.approx(0.4375, abs=0.0)

    def test_muskat_unit_case_matches(self):
        th = cd.theta_constants(cd.muskat_params(1.0, 1.0))
        assert (th.theta1, th.theta2) == (0.75, 0.4375)

    def test_positive_for_all_admissible(self):
        rng = np.random.default_rng(11)
        for p in random_params(rng, 200, margin=1.0 + 1e-9):
            th = cd.theta_constants(p)
            assert th.theta1 > 0.0
            assert th.theta2 > 0.0
