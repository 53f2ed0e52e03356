"""Tests for the model data layer: closure maps, front path, parameters."""

import numpy as np
import pytest

from fracstefan.domain import (
    FrontState,
    InterfacePath,
    ModelParams,
    enthalpy_from_temperature,
    interface_inverse,
    temperature_from_enthalpy,
)


class TestModelParams:
    def test_valid_construction(self):
        p = ModelParams(beta=0.5, length=1.0, x0=0.0, t_star=1.0, nx=10, nt=20,
                        bc_kind="dirichlet", bc_value=1.0)
        assert p.dx == 0.1
        assert p.x_faces()[0] == 0.0 and p.x_faces()[-1] == 1.0

    @pytest.mark.parametrize(
        "kw",
        [
            dict(beta=1.2),
            dict(beta=0.0),
            dict(length=-1.0),
            dict(x0=1.0),
            dict(t_star=0.0),
            dict(bc_kind="robin"),
            dict(bc_kind="dirichlet", bc_value=-0.5),
            dict(bc_kind="neumann", bc_value=0.5),
            dict(t0_kind="step"),
            dict(t0_value=-1.0),
        ],
    )
    def test_invariant_violations(self, kw):
        base = dict(beta=0.5, length=1.0, x0=0.2, t_star=1.0, nx=10, nt=20,
                    bc_kind="dirichlet", bc_value=1.0)
        base.update(kw)
        with pytest.raises(ValueError):
            ModelParams(**base)

    def test_initial_profile_zero_right_of_front(self):
        p = ModelParams(beta=0.5, length=1.0, x0=0.4, t_star=1.0, nx=10, nt=20,
                        bc_kind="dirichlet", bc_value=1.0,
                        t0_kind="linear", t0_value=2.0)
        x = np.array([0.0, 0.2, 0.39, 0.4, 0.8])
        prof = p.initial_profile(x)
        assert prof[0] == 2.0
        assert prof[3] == 0.0 and prof[4] == 0.0
        assert np.all(prof >= 0.0)


class TestInterfaceInverse:
    def test_identity_path(self):
        t = np.linspace(0.0, 1.0, 33)
        path = InterfacePath(t, t.copy())
        assert interface_inverse(path, 0.5) == pytest.approx(0.5, abs=1e-15)

    def test_sqrt_path_sampled(self):
        t = np.linspace(0.0, 1.0, 1025)
        path = InterfacePath(t, np.sqrt(t))
        assert interface_inverse(path, 0.5) == pytest.approx(0.25, abs=1e-6)

    def test_left_endpoint_rejected(self):
        t = np.linspace(0.0, 1.0, 9)
        path = InterfacePath(t, 0.3 + 0.5 * t)
        with pytest.raises(ValueError):
            interface_inverse(path, 0.3)
        with pytest.raises(ValueError):
            interface_inverse(path, 0.81)

    def test_right_inverse_and_monotone(self):
        t = np.linspace(0.0, 1.0, 257)
        path = InterfacePath(t, 0.1 + t**0.7)
        xs = np.linspace(0.2, 1.05, 40)
        inv = [interface_inverse(path, x) for x in xs]
        assert np.all(np.diff(inv) > 0.0)
        for x, ti in zip(xs, inv):
            assert path.at(ti) == pytest.approx(x, abs=1e-12)

    def test_plateau_returns_first_time(self):
        t = np.array([0.0, 1.0, 2.0, 3.0])
        s = np.array([0.0, 0.5, 0.5, 1.0])
        path = InterfacePath(t, s)
        assert interface_inverse(path, 0.5) == 1.0

    def test_nonmonotone_rejected(self):
        with pytest.raises(ValueError):
            InterfacePath(np.array([0.0, 1.0]), np.array([0.5, 0.4]))


class TestClosure:
    def path(self, s, n=0):
        t = np.linspace(0.0, 1.0, 2)
        return InterfacePath(t, np.array([s, s]))

    def test_all_solid(self):
        T = np.zeros(5)
        E = enthalpy_from_temperature(T, self.path(0.0), 0, dx=0.2)
        assert np.array_equal(E, np.zeros(5))

    def test_all_liquid_at_melt_temperature(self):
        T = np.zeros(5)
        E = enthalpy_from_temperature(T, self.path(1.0), 0, dx=0.2)
        assert np.array_equal(E, np.array([1.0, 1.0, 1.0, 1.0, 1.0]))

    def test_warm_liquid(self):
        T = np.array([0.2, 0.2, 0.0, 0.0, 0.0])
        E = enthalpy_from_temperature(T, self.path(0.5), 0, dx=0.2)
        assert np.allclose(E, [1.2, 1.2, 0.5, 0.0, 0.0])

    def test_inconsistent_solid_temperature_rejected(self):
        T = np.array([0.2, 0.0, 0.1, 0.0, 0.0])
        with pytest.raises(ValueError):
            enthalpy_from_temperature(T, self.path(0.3), 0, dx=0.2)

    def test_inverse_examples(self):
        T, front = temperature_from_enthalpy(np.array([1.5]))
        assert T[0] == 0.5
        T, front = temperature_from_enthalpy(np.array([2.0, 0.7, 0.0]))
        assert T[0] == 1.0 and T[1] == 0.0
        assert front == FrontState(1, 0.7, 1.7)

    def test_nonmonotone_layout_rejected(self):
        with pytest.raises(ValueError):
            temperature_from_enthalpy(np.array([2.0, 0.0, 2.0]))
        with pytest.raises(ValueError):
            temperature_from_enthalpy(np.array([2.0, 0.5, 0.1]))
        with pytest.raises(ValueError):
            temperature_from_enthalpy(np.array([1.5, -0.1, 0.0]))

    def test_round_trip_exact(self):
        dx = 0.25
        T = np.array([0.75, 0.125, 0.0, 0.0])
        path = self.path(0.5 + 0.5 * dx)
        E = enthalpy_from_temperature(T, path, 0, dx)
        T2, front = temperature_from_enthalpy(E)
        assert np.array_equal(T, T2)
        assert front.cell == 2 and front.fraction == 0.5
        assert front.position_cells * dx == pytest.approx(0.625, rel=1e-15)
