import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopdelay.functions import ProductionFunction
from coopdelay.kernels import (
    GeneralMixtureKernel,
    KernelCertificate,
    KernelViolation,
    PointMassKernel,
    TriangularDensityKernel,
    UniformDensityKernel,
    as_component,
    stieltjes_integrate,
    support_floor,
    validate_kernel,
)


def pf(text):
    return ProductionFunction.from_expression(text)


IDENTITY = pf("x")


def riemann_midpoint(density_fn, integrand_fn, a, b, n=1_000_000):
    """Independent oracle: midpoint Riemann sum on n panels."""
    edges = np.linspace(a, b, n + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    h = (b - a) / n
    return float(np.sum(density_fn(mids) * integrand_fn(mids)) * h)


class TestSupportFloor:
    def test_point_mass(self):
        assert support_floor(PointMassKernel("t-1"), 5.0) == 4.0

    def test_uniform_at_zero(self):
        assert support_floor(UniformDensityKernel("t-0.7"), 0.0) == -0.7

    def test_triangular(self):
        assert support_floor(TriangularDensityKernel("t-2"), 3.0) == 1.0

    def test_mixture_min_over_parts(self):
        k = GeneralMixtureKernel(
            atoms=[("t-1", 0.5)], density="0.5/2", density_lag="t-2"
        )
        assert support_floor(k, 10.0) == 8.0


class TestIntegrate:
    def test_point_mass_reduces_to_evaluation(self):
        k = PointMassKernel("t-1.5")
        f = pf("x^2+x")
        u = as_component(lambda s: np.asarray(s) * 0 + 3.0)
        assert stieltjes_integrate(k, f, u, 4.0) == f(3.0)

    def test_uniform_constant_history_is_f_of_constant(self):
        k = UniformDensityKernel("t-1")
        f = pf("1+x/2")
        u = as_component(lambda s: np.asarray(s) * 0 + 2.0)
        assert stieltjes_integrate(k, f, u, 7.0, n_quad=16) == pytest.approx(2.0, abs=1e-12)

    def test_triangular_linear_history_closed_form(self):
        # identity production, u(s) = s: the integral is t - span/3
        for h, t in ((2.0, 3.0), (0.5, 10.0), (1.0, 0.0)):
            k = TriangularDensityKernel(f"t-{h}")
            u = as_component(lambda s: np.asarray(s, dtype=float))
            got = stieltjes_integrate(k, IDENTITY, u, t, n_quad=64)
            assert got == pytest.approx(t - h / 3.0, abs=1e-10)

    def test_triangular_matches_riemann_oracle(self):
        h, t = 2.0, 3.0
        k = TriangularDensityKernel(f"t-{h}")
        u = as_component(lambda s: np.asarray(s, dtype=float))
        got = stieltjes_integrate(k, IDENTITY, u, t, n_quad=64)
        oracle = riemann_midpoint(
            lambda s: (2.0 / h**2) * (s - (t - h)), lambda s: s, t - h, t
        )
        assert got == pytest.approx(oracle, abs=1e-9)

    def test_simpson_convergence_order(self):
        # smooth non-polynomial integrand: f = exp(x)-1 over u(s) = s/2
        h, t = 1.0, 2.0
        k = UniformDensityKernel(f"t-{h}")
        f = pf("exp(x)-1")
        u = as_component(lambda s: np.asarray(s, dtype=float) / 2.0)
        oracle = riemann_midpoint(
            lambda s: np.full_like(s, 1.0 / h), lambda s: np.exp(s / 2.0) - 1.0, t - h, t
        )
        errs = [
            abs(stieltjes_integrate(k, f, u, t, n_quad=n) - oracle) for n in (2, 4, 8, 16)
        ]
        for coarse, fine in zip(errs, errs[1:]):
            assert coarse / fine >= 8.0

    def test_mixture_atoms_plus_density(self):
        # half the mass at lag 1, half uniformly spread over the last 2
        k = GeneralMixtureKernel(
            atoms=[("t-1", 0.5)], density="0.5/2", density_lag="t-2"
        )
        u = as_component(lambda s: np.asarray(s, dtype=float))
        t = 5.0
        got = stieltjes_integrate(k, IDENTITY, u, t, n_quad=32)
        assert got == pytest.approx(0.5 * 4.0 + 0.5 * 4.0, abs=1e-10)

    def test_zero_lag_atom_reads_current_time(self):
        k = PointMassKernel("t")
        u = as_component(lambda s: np.asarray(s, dtype=float) * 2.0)
        assert stieltjes_integrate(k, IDENTITY, u, 3.0) == 6.0

    def test_linearity_in_production(self):
        k = TriangularDensityKernel("t-1")
        u = as_component(lambda s: np.abs(np.asarray(s, dtype=float)) + 0.5)
        fa, fb = pf("x^2+x"), pf("1+x/2")
        combo = pf("0.5*(x^2+x) + 2*(1+x/2)")
        t = 4.0
        ia = stieltjes_integrate(k, fa, u, t)
        ib = stieltjes_integrate(k, fb, u, t)
        ic = stieltjes_integrate(k, combo, u, t)
        assert ic == pytest.approx(0.5 * ia + 2.0 * ib, rel=1e-12)

    @given(
        st.floats(min_value=0.2, max_value=3.0),
        st.floats(min_value=1.2, max_value=4.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_bound_preservation(self, m, spread):
        M = m * spread
        k = UniformDensityKernel("t-1")
        f = pf("x^2+x")
        rng = np.random.default_rng(7)
        wiggle = rng.uniform(0.0, 1.0)

        def traj(s):
            s = np.asarray(s, dtype=float)
            frac = 0.5 * (1.0 + np.sin(3.0 * s + wiggle))
            return m + (M - m) * frac

        got = stieltjes_integrate(k, f, as_component(traj), 2.0, n_quad=32)
        assert f(m) - 1e-9 <= got <= f(M) + 1e-9

    def test_density_needs_two_panels(self):
        k = UniformDensityKernel("t-1")
        with pytest.raises(ValueError):
            stieltjes_integrate(k, IDENTITY, as_component(lambda s: s), 2.0, n_quad=1)


class TestValidate:
    def test_uniform_certifies(self):
        res = validate_kernel(UniformDensityKernel("t-1"), [float(i) for i in range(11)])
        assert isinstance(res, KernelCertificate)
        assert res.max_mass_residual <= 1e-10

    def test_overweight_mixture(self):
        k = GeneralMixtureKernel(atoms=[("t-1", 0.5), ("t-2", 0.6)])
        res = validate_kernel(k, [0.0, 1.0])
        assert isinstance(res, KernelViolation)
        assert res.kind == "mass"
        assert "1.1" in res.detail

    def test_advanced_lag(self):
        res = validate_kernel(PointMassKernel("t+1"), [0.0, 1.0])
        assert isinstance(res, KernelViolation)
        assert res.kind == "advanced-lag"

    def test_mixture_with_density_certifies(self):
        k = GeneralMixtureKernel(
            atoms=[("t-0.5", 0.25)], density="0.75*2*(1-u)", density_lag="t-1"
        )
        # density 1.5*(1-u) on ages [0,1] integrates to 0.75
        res = validate_kernel(k, [0.0, 2.5, 7.0])
        assert isinstance(res, KernelCertificate)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            validate_kernel(PointMassKernel("t"), [])
