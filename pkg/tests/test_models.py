"""Builtin family, its closed-form oracles, and the system loader."""

import json

import numpy as np
import pytest

from fshil.geometry import lie_derivatives
from fshil.models import (
    ShilnikovModelParams,
    SystemSpecError,
    build_model,
    load_system,
    oracle_known_points,
    oracle_x_flow,
    system_from_spec,
)


class TestBuildModel:
    def test_field_values_at_origin(self):
        sysm = build_model(ShilnikovModelParams(1.0, 1.0))
        assert np.allclose(sysm.X((0.0, 0.0, 0.0)), [-1.0, -1.0, -0.375])
        assert np.allclose(sysm.Y((0.0, 0.0, 0.0)), [1.0, 1.0, 0.375])

    def test_fold_level(self):
        assert ShilnikovModelParams(2.0, 3.0).fold_level == pytest.approx(
            27 / 16, abs=1e-15
        )

    def test_rejects_nonpositive_parameters(self):
        with pytest.raises(ValueError):
            ShilnikovModelParams(0.0, 1.0)
        with pytest.raises(ValueError):
            ShilnikovModelParams(1.0, -2.0)

    def test_scalar_fast_path_agrees_with_vector_form(self):
        sysm = build_model(ShilnikovModelParams(0.7, 1.3))
        rng = np.random.default_rng(3)
        for p in rng.uniform(-2, 2, size=(20, 3)):
            assert np.allclose(sysm.sx(*p), sysm.X(p))
            assert np.allclose(sysm.sy(*p), sysm.Y(p))
            assert sysm.sh(*p) == sysm.h(p)

    def test_no_escaping_region(self):
        # the lower field pushes up through the surface everywhere
        sysm = build_model(ShilnikovModelParams(1.0, 1.0))
        for x in np.linspace(-3, 3, 40):
            for y in np.linspace(-3, 3, 40):
                xh, yh = lie_derivatives(sysm, (float(x), float(y), 0.0))
                assert not (xh > 0 and yh < 0)
                assert yh > 0


class TestKnownPoints:
    def test_unit_parameters(self):
        kp = oracle_known_points(ShilnikovModelParams(1.0, 1.0))
        assert np.allclose(kp.fold_point, [1.5, 0.375, 0.0])
        assert kp.flight_time == pytest.approx(1.5, abs=1e-15)
        assert np.allclose(kp.pseudo_equilibrium, [0.0, 0.0, 0.0])

    def test_general_parameters(self):
        kp = oracle_known_points(ShilnikovModelParams(2.0, 3.0))
        assert np.allclose(kp.fold_point, [4.5, 1.6875, 0.0])
        assert kp.flight_time == pytest.approx(2.25, abs=1e-15)


class TestXFlowOracle:
    def test_flight_lands_on_pseudo_equilibrium(self):
        p = ShilnikovModelParams(1.0, 1.0)
        kp = oracle_known_points(p)
        land = oracle_x_flow(p, kp.fold_point, kp.flight_time)
        assert np.allclose(land, [0.0, 0.0, 0.0], atol=1e-15)

    def test_zero_time_is_identity(self):
        p = ShilnikovModelParams(1.0, 1.0)
        q = np.array([0.3, -1.2, 0.0])
        assert np.allclose(oracle_x_flow(p, q, 0.0), q)

    def test_general_parameter_flight(self):
        p = ShilnikovModelParams(2.0, 3.0)
        kp = oracle_known_points(p)
        land = oracle_x_flow(p, kp.fold_point, 9 / 4)
        assert np.allclose(land, [0.0, 0.0, 0.0], atol=1e-14)

    def test_satisfies_the_field_equation(self):
        p = ShilnikovModelParams(0.5, 2.0)
        sysm = build_model(p)
        q0 = np.array([1.1, 0.4, 0.0])
        d = 1e-6
        for t in np.linspace(0.1, 2.0, 7):
            vel = (oracle_x_flow(p, q0, t + d) - oracle_x_flow(p, q0, t - d)) / (
                2 * d
            )
            assert np.allclose(vel, sysm.X(oracle_x_flow(p, q0, t)), atol=1e-6)

    def test_vectorized_times(self):
        p = ShilnikovModelParams(1.0, 1.0)
        ts = np.linspace(0.0, 1.5, 5)
        out = oracle_x_flow(p, (1.5, 0.375, 0.0), ts)
        assert out.shape == (5, 3)
        assert np.allclose(out[0], [1.5, 0.375, 0.0])


BUILTIN_SPEC = {"model": "builtin:shilnikov", "alpha": 1.0, "beta": 1.0}

CUSTOM_SPEC = {
    "model": "custom",
    "X": [
        [{"coeff": -1.0, "powers": [0, 0, 0]}],
        [{"coeff": 1.0, "powers": [1, 0, 0]}, {"coeff": -1.0, "powers": [0, 0, 0]}],
        [{"coeff": 1.0, "powers": [0, 1, 0]}, {"coeff": -0.375, "powers": [0, 0, 0]}],
    ],
    "Y": [
        [{"coeff": 1.0, "powers": [0, 0, 0]}],
        [{"coeff": 3.0, "powers": [0, 1, 0]}, {"coeff": 1.0, "powers": [0, 0, 0]}],
        [{"coeff": 0.375, "powers": [0, 0, 0]}],
    ],
    "h": [{"coeff": 1.0, "powers": [0, 0, 1]}],
}


class TestLoader:
    def test_builtin_roundtrip(self):
        sysm, echo = system_from_spec(BUILTIN_SPEC)
        assert echo == {"model": "builtin:shilnikov", "alpha": 1.0, "beta": 1.0}
        assert np.allclose(sysm.X((0, 0, 0)), [-1, -1, -0.375])

    def test_custom_polynomial_matches_builtin(self):
        ref = build_model(ShilnikovModelParams(1.0, 1.0))
        sysm, _ = system_from_spec(CUSTOM_SPEC)
        rng = np.random.default_rng(11)
        for p in rng.uniform(-2, 2, size=(25, 3)):
            assert np.allclose(sysm.X(p), ref.X(p), atol=1e-14)
            assert np.allclose(sysm.Y(p), ref.Y(p), atol=1e-14)
            assert sysm.h(p) == pytest.approx(ref.h(p), abs=1e-15)
            assert np.allclose(sysm.grad_h(p), [0, 0, 1])

    def test_custom_jacobian_is_exact(self):
        sysm, _ = system_from_spec(CUSTOM_SPEC)
        jac = sysm.jac_X((0.2, -0.4, 0.1))
        assert np.allclose(jac, [[0, 0, 0], [1, 0, 0], [0, 1, 0]])

    def test_load_from_file(self, tmp_path):
        f = tmp_path / "system.json"
        f.write_text(json.dumps({"model": "builtin:shilnikov", "alpha": 2.0, "beta": 3.0}))
        sysm, echo = load_system(f)
        assert echo["alpha"] == 2.0
        assert np.allclose(sysm.Y((0, 0, 0)), [2.0, 3.0, 27 / 16])

    def test_unknown_model_rejected(self):
        with pytest.raises(SystemSpecError):
            system_from_spec({"model": "lorenz"})

    def test_excess_degree_rejected(self):
        bad = dict(CUSTOM_SPEC)
        bad["h"] = [{"coeff": 1.0, "powers": [4, 3, 0]}]
        with pytest.raises(SystemSpecError):
            system_from_spec(bad)

    def test_malformed_monomial_rejected(self):
        bad = dict(CUSTOM_SPEC)
        bad["h"] = [{"coeff": 1.0, "powers": [0, 0]}]
        with pytest.raises(SystemSpecError):
            system_from_spec(bad)
        bad["h"] = [{"coeff": "one", "powers": [0, 0, 1]}]
        with pytest.raises(SystemSpecError):
            system_from_spec(bad)

    def test_missing_field_rejected(self):
        bad = {k: v for k, v in CUSTOM_SPEC.items() if k != "Y"}
        with pytest.raises(SystemSpecError):
            system_from_spec(bad)

    def test_unreadable_path_rejected(self, tmp_path):
        with pytest.raises(SystemSpecError):
            load_system(tmp_path / "missing.json")

    def test_invalid_json_rejected(self, tmp_path):
        f = tmp_path / "broken.json"
        f.write_text("{not json")
        with pytest.raises(SystemSpecError):
            load_system(f)

    def test_builtin_rejects_unknown_keys(self):
        with pytest.raises(SystemSpecError):
            system_from_spec({"model": "builtin:shilnikov", "gamma": 1.0})
