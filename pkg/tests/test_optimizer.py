import numpy as np
import pytest

from dmsp.denoisers import GaussianOracleDenoiser
from dmsp.errors import DivergenceError, InvalidKernelError
from dmsp.ops import DegradationOp, degrade
from dmsp.oracle import GaussianSmoothedDensity, gaussian_map_oracle
from dmsp.optimizer import (
    OptimizerState,
    RestorationProblem,
    Schedule,
    bilinear_demosaic,
    bilinear_upsample,
    default_blind_kernel,
    project_kernel,
    run,
    step_image,
    step_kernel,
)
from dmsp.prior import PriorConfig

from conftest import gaussian_psf, radial_spectrum


def scalar_state(x0):
    return OptimizerState(x=np.full((1, 1, 1), x0), k=np.array([[1.0]]))


class TestStepImage:
    def test_momentum_free_reduction(self):
        sched = Schedule(iterations=1, alpha=0.2, mu=0.0)
        st = scalar_state(1.0)
        step_image(st, np.full((1, 1, 1), 3.0), np.zeros((1, 1, 1)), sched)
        assert st.x[0, 0, 0] == pytest.approx(1.0 - 0.2 * 3.0)
        assert st.t == 1

    def test_zero_gradients_decay_momentum(self):
        sched = Schedule(iterations=1, alpha=0.1, mu=0.9)
        st = scalar_state(0.5)
        st.u_bar = np.full((1, 1, 1), 0.2)
        step_image(st, np.zeros((1, 1, 1)), np.zeros((1, 1, 1)), sched)
        assert st.u_bar[0, 0, 0] == pytest.approx(0.18)
        assert st.x[0, 0, 0] == pytest.approx(0.5 + 0.18)

    def test_scalar_quadratic_converges_within_300(self):
        # f(x) = (x - c)^2 / 2, descent gradient u = x - c
        c = 0.3
        sched = Schedule(iterations=300, alpha=0.1, mu=0.9)
        st = scalar_state(c + 1.0)
        best = np.inf
        for _ in range(300):
            g = st.x - c
            step_image(st, g, np.zeros_like(g), sched)
            best = min(best, abs(st.x[0, 0, 0] - c))
        assert best < 1e-8

    def test_nonfinite_gradient_raises_with_iteration(self):
        sched = Schedule(iterations=1)
        st = scalar_state(0.0)
        with pytest.raises(DivergenceError) as exc:
            step_image(st, np.full((1, 1, 1), np.nan), np.zeros((1, 1, 1)), sched)
        assert exc.value.t == 1

    def test_clip_applied(self):
        sched = Schedule(iterations=1, alpha=1.0, mu=0.0, clip=(-0.25, 1.25))
        st = scalar_state(0.0)
        step_image(st, np.full((1, 1, 1), -9.0), np.zeros((1, 1, 1)), sched)
        assert st.x[0, 0, 0] == 1.25


class TestProjectKernel:
    def test_clip_then_normalize(self):
        k = np.array([[-0.5, 1.5, 0.5]])
        np.testing.assert_allclose(project_kernel(k), [[0.0, 0.75, 0.25]])

    def test_valid_kernel_unchanged(self):
        k = np.array([[0.25, 0.5, 0.25]])
        np.testing.assert_allclose(project_kernel(k), k, atol=1e-15)

    def test_random_kernels_projected(self, rng):
        for _ in range(100):
            k = project_kernel(rng.standard_normal((5, 5)))
            assert np.all(k >= 0)
            assert abs(k.sum() - 1.0) <= 1e-12

    def test_all_nonpositive_raises(self):
        with pytest.raises(InvalidKernelError):
            project_kernel(-np.ones((3, 3)))


class TestStepKernel:
    def test_zero_gradient_keeps_kernel(self):
        sched = Schedule(iterations=1)
        st = OptimizerState(x=np.zeros((1, 2, 2)), k=default_blind_kernel(3, 3))
        k_before = st.k.copy()
        step_kernel(st, np.zeros((3, 3)), sched)
        np.testing.assert_allclose(st.k, k_before, atol=1e-15)

    def test_paper_defaults_accepted(self):
        sched = Schedule(iterations=1, alpha=0.3, mu=0.7, alpha_k=0.005, mu_k=0.995)
        assert sched.alpha_k == 0.005 and sched.mu_k == 0.995

    def test_kernel_valid_after_any_step(self, rng):
        sched = Schedule(iterations=1, alpha_k=0.05, mu_k=0.5)
        st = OptimizerState(x=np.zeros((1, 2, 2)), k=default_blind_kernel(5, 5))
        for _ in range(50):
            step_kernel(st, rng.standard_normal((5, 5)), sched)
            assert np.all(st.k >= 0)
            assert abs(st.k.sum() - 1.0) <= 1e-12


def oracle_problem(rng, n=32, sigma=0.2, sigma_n=0.25, mode="deterministic"):
    spec = radial_spectrum((n, n), amplitude=0.95, corner=4.0, floor=0.05)
    mu = np.full((1, n, n), 0.5)
    density = GaussianSmoothedDensity(mu, spec, 0.0)
    truth = density.sample(np.random.default_rng(91))
    k = gaussian_psf(7, 1.2)
    op = DegradationOp(kernel=k)
    y = degrade(truth, op, sigma_n, rng)
    if mode == "deterministic":
        den = GaussianOracleDenoiser(mu, spec, sigma)
        prior = PriorConfig(sigma=sigma, mode="deterministic")
    else:
        prior = PriorConfig(sigma=sigma, mode="stochastic")
        den = GaussianOracleDenoiser(mu, spec, prior.sigma1)
    problem = RestorationProblem(
        y=y, op=op, denoiser=den, prior=prior, data_kind="nb", sigma_n=sigma_n, x0=y
    )
    return problem, truth, spec, mu


class TestRun:
    def test_zero_iterations_returns_init(self, rng):
        problem, _, _, _ = oracle_problem(rng)
        x, k, trace = run(problem, Schedule(iterations=0), np.random.default_rng(0))
        np.testing.assert_array_equal(x, problem.y)
        np.testing.assert_array_equal(k, problem.op.kernel)
        assert trace == []

    def test_fixed_seed_bit_identical(self, rng):
        problem, _, _, _ = oracle_problem(rng, n=16, mode="stochastic")
        sched = Schedule(iterations=20, alpha=0.05, mu=0.9)
        x1, k1, t1 = run(problem, sched, np.random.default_rng(33))
        x2, k2, t2 = run(problem, sched, np.random.default_rng(33))
        np.testing.assert_array_equal(x1, x2)
        np.testing.assert_array_equal(k1, k2)
        assert t1 == t2

    def test_trace_schema(self, rng):
        problem, _, _, _ = oracle_problem(rng, n=16)
        _, _, trace = run(problem, Schedule(iterations=3), np.random.default_rng(0))
        assert [e["t"] for e in trace] == [1, 2, 3]
        for e in trace:
            assert set(e) == {
                "t",
                "lambda",
                "data_grad_norm",
                "prior_grad_norm",
                "step_norm",
                "sigma_n_estimate",
            }

    def test_converges_to_map_oracle(self, rng):
        problem, truth, spec, mu = oracle_problem(rng, n=64)
        target = gaussian_map_oracle(problem.y, problem.op, problem.sigma_n, problem.denoiser)
        sched = Schedule(iterations=800, alpha=0.1, mu=0.9)
        x, _, _ = run(problem, sched, np.random.default_rng(0))
        rel = np.linalg.norm((x - target).ravel()) / np.linalg.norm(target.ravel())
        assert rel <= 1e-3

    def test_oracle_solution_is_fixed_point(self, rng):
        problem, _, _, _ = oracle_problem(rng, n=32)
        target = gaussian_map_oracle(problem.y, problem.op, problem.sigma_n, problem.denoiser)
        from dmsp.data_terms import DataTermConfig, grad_nb
        from dmsp.prior import prior_grad_deterministic

        cfg = DataTermConfig(
            kind="nb", op=problem.op, sigma=problem.prior.sigma, sigma_n=problem.sigma_n
        )
        g = grad_nb(target, problem.y, cfg) - prior_grad_deterministic(
            target, problem.denoiser, problem.prior
        )
        assert np.linalg.norm(g.ravel()) <= 1e-8

    def test_objective_monotone_after_burn_in(self, rng):
        # mu = 0.9 heavy-ball has complex characteristic roots here and the
        # objective visibly oscillates; the monotonicity property holds for
        # moderate momentum, tested at the strongest level that satisfies it
        problem, _, spec, mu = oracle_problem(rng, n=32)
        density = GaussianSmoothedDensity(mu, spec, problem.prior.sigma)
        sched = Schedule(iterations=300, alpha=0.1, mu=0.7)

        from dmsp.data_terms import DataTermConfig, grad_nb
        from dmsp.prior import prior_grad_deterministic

        cfg = DataTermConfig(
            kind="nb", op=problem.op, sigma=problem.prior.sigma, sigma_n=problem.sigma_n
        )

        def objective(x):
            resid = problem.op.apply(x) - problem.y
            return float(
                -np.sum(resid**2) / (2 * problem.sigma_n**2) + density.log_p(x)
            )

        st = OptimizerState(x=problem.initial_x(), k=problem.op.kernel)
        values = []
        for _ in range(300):
            dg = grad_nb(st.x, problem.y, cfg)
            pg = prior_grad_deterministic(st.x, problem.denoiser, problem.prior)
            step_image(st, dg, pg, sched)
            values.append(objective(st.x))
        diffs = np.diff(np.array(values[20:]))
        assert np.all(diffs >= -1e-9 * np.abs(np.array(values[20:-1])))

    def test_blind_mode_keeps_kernel_valid(self, rng):
        problem, _, spec, mu = oracle_problem(rng, n=16)
        den = problem.denoiser
        blind = RestorationProblem(
            y=problem.y,
            op=problem.op,
            denoiser=den,
            prior=problem.prior,
            data_kind="na",
            blind=True,
            x0=problem.y,
            k0=default_blind_kernel(7, 7),
        )
        sched = Schedule(iterations=25, alpha=0.05, mu=0.7, alpha_k=1e-7, mu_k=0.9)
        _, k, trace = run(blind, sched, np.random.default_rng(0))
        assert np.all(k >= 0)
        assert abs(k.sum() - 1.0) <= 1e-12
        assert len(trace) == 25


class TestInits:
    def test_default_blind_kernel_valid(self):
        k = default_blind_kernel(7, 7)
        assert k.shape == (7, 7)
        assert abs(k.sum() - 1.0) < 1e-12
        assert k[3, 3] == k.max()

    def test_bilinear_upsample_interpolates(self):
        y = np.zeros((1, 2, 2))
        y[0, 0, 0] = 1.0
        up = bilinear_upsample(y, 2)
        assert up.shape == (1, 4, 4)
        assert up[0, 0, 0] == 1.0
        assert up[0, 0, 1] == pytest.approx(0.5)
        assert up[0, 1, 1] == pytest.approx(0.25)

    def test_bilinear_upsample_consistent_with_downsample(self, rng):
        from dmsp.ops import downsample

        y = rng.random((1, 4, 4))
        up = bilinear_upsample(y, 3)
        np.testing.assert_allclose(downsample(up, 3), y, atol=1e-12)

    def test_bilinear_demosaic_exact_on_constant(self):
        from dmsp.ops import bayer_mask

        mask = bayer_mask(4, 4)
        const = np.full((3, 4, 4), 0.42)
        mosaic = const * mask
        out = bilinear_demosaic(mosaic, mask)
        np.testing.assert_allclose(out, const, atol=1e-12)

    def test_bilinear_demosaic_keeps_observed(self, rng):
        from dmsp.ops import bayer_mask

        mask = bayer_mask(4, 4)
        truth = rng.random((3, 4, 4))
        out = bilinear_demosaic(truth * mask, mask)
        np.testing.assert_allclose(out * mask, truth * mask, atol=1e-12)
