import math

import numpy as np
import pytest

from curriculum_sched import _pykernels, kernels
from conftest import COMPILED

needs_compiled = pytest.mark.skipif(COMPILED is None, reason="compiled extension not built")


def _random_p(rng, n, zeros=0.0):
    p = rng.random(n) ** 3
    p[rng.random(n) < zeros] = 0.0
    if not p.any():
        p[rng.integers(n)] = 1.0
    return p / p.sum()


class TestCategoricalDraws:
    def test_point_mass(self, backend):
        idx = backend.categorical_draws(np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.5, 0.999999]))
        assert list(idx) == [1, 1, 1]

    def test_never_picks_zero_mass(self, backend, rng):
        p = np.array([0.0, 0.3, 0.0, 0.7, 0.0])
        idx = np.asarray(backend.categorical_draws(p, rng.random(5000)))
        assert set(idx.tolist()) <= {1, 3}

    def test_u_near_one_clamps_to_last_live(self, backend):
        p = np.array([0.5, 0.5, 0.0])
        idx = backend.categorical_draws(p, np.array([np.nextafter(1.0, 0.0)]))
        assert idx[0] == 1

    def test_inverse_cdf_boundaries(self, backend):
        p = np.array([0.25, 0.25, 0.5])
        idx = backend.categorical_draws(p, np.array([0.0, 0.2499, 0.25, 0.5, 0.75]))
        assert list(idx) == [0, 0, 1, 2, 2]


class TestWeightedPermutation:
    def test_is_permutation(self, backend, rng):
        for n in (1, 2, 7, 100):
            p = _random_p(rng, n, zeros=0.3)
            perm = np.asarray(backend.weighted_permutation(p, rng.random(n)))
            assert sorted(perm.tolist()) == list(range(n))

    def test_zero_mass_items_come_last(self, backend, rng):
        p = np.array([0.0, 0.5, 0.0, 0.5])
        perm = list(backend.weighted_permutation(p, rng.random(4)))
        assert set(perm[:2]) == {1, 3}
        assert set(perm[2:]) == {0, 2}

    def test_first_position_frequency(self, backend):
        rng = np.random.default_rng(7)
        p = np.array([0.1, 0.2, 0.7])
        firsts = np.zeros(3)
        trials = 20000
        for _ in range(trials):
            firsts[backend.weighted_permutation(p, rng.random(3))[0]] += 1
        # first pick is a plain categorical draw; 5-sigma band
        sd = np.sqrt(p * (1 - p) / trials)
        assert np.all(np.abs(firsts / trials - p) < 5 * sd)


class TestDecayProbabilities:
    def test_worked_value(self, backend):
        q, total = backend.decay_probabilities(
            np.array([0.5, 0.5]), np.array([1.0, 0.0]), 10.0, 700.0
        )
        assert np.allclose(q, [0.4750208125, 0.5249791875], atol=1e-9)
        assert total > 0

    def test_large_counters_do_not_underflow(self, backend):
        q, _ = backend.decay_probabilities(
            np.array([0.5, 0.5]), np.array([1000.0, 1000.0]), 10.0, 700.0
        )
        assert np.allclose(q, [0.5, 0.5])

    def test_zeros_stay_zero(self, backend):
        q, _ = backend.decay_probabilities(np.array([1.0, 0.0]), np.array([5.0, 0.0]), 10.0, 700.0)
        assert list(q) == [1.0, 0.0]

    def test_sums_to_one(self, backend, rng):
        for _ in range(200):
            n = int(rng.integers(1, 50))
            p = _random_p(rng, n, zeros=0.2)
            c = rng.integers(0, 200, n).astype(float)
            q, _ = backend.decay_probabilities(p, c, float(rng.uniform(0.5, 50)), 700.0)
            assert abs(math.fsum(q) - 1.0) < 1e-12


@needs_compiled
class TestBackendsAgree:
    """The two backends execute the same arithmetic and must match bit for bit."""

    def test_categorical(self, rng):
        for n in (1, 3, 64, 1000):
            p = _random_p(rng, n, zeros=0.2)
            u = rng.random(n)
            assert np.array_equal(
                np.asarray(COMPILED.categorical_draws(p, u)),
                np.asarray(_pykernels.categorical_draws(p, u)),
            )

    def test_permutation(self, rng):
        for n in (1, 3, 64, 1000):
            p = _random_p(rng, n, zeros=0.2)
            u = rng.random(n)
            assert np.array_equal(
                np.asarray(COMPILED.weighted_permutation(p, u)),
                np.asarray(_pykernels.weighted_permutation(p, u)),
            )

    def test_decay(self, rng):
        for n in (1, 3, 64, 1000):
            p = _random_p(rng, n, zeros=0.2)
            c = rng.integers(0, 100, n).astype(float)
            qc, tc = COMPILED.decay_probabilities(p, c, 10.0, 700.0)
            qp, tp = _pykernels.decay_probabilities(p, c, 10.0, 700.0)
            assert np.array_equal(np.asarray(qc), np.asarray(qp))
            assert tc == tp


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    if COMPILED is not None:
        assert kernels.BACKEND == "cython" or kernels.os.environ.get("CURRICULUM_SCHED_PURE_PYTHON")


_SUITE_SCRIPT = """
from curriculum_sched import kernels
from curriculum_sched.datagen import SynthSpec
from curriculum_sched.experiments import RunConfig, named_strategy, run_suite, runs_csv
from curriculum_sched.model import Hyperparams
spec = SynthSpec(class_counts=(20, 20, 20, 20, 20, 20, 30))
hp = Hyperparams(learning_rate=0.05, hidden_size=4, max_epochs=4, batch_size=16)
modes = ("with_replacement", "without_replacement")
out = [kernels.BACKEND]
for mode in modes:
    cfgs = [RunConfig(named_strategy(n), spec, hp, seeds=(0, 1), sampling_mode=mode) for n in ("rank", "anti-frequency")]
    out.append(runs_csv(run_suite(cfgs)))
print("\\n".join(out))
"""


def _run_suite_with(env_value):
    import os
    import subprocess
    import sys

    env = dict(os.environ)
    env.pop("CURRICULUM_SCHED_PURE_PYTHON", None)
    if env_value is not None:
        env["CURRICULUM_SCHED_PURE_PYTHON"] = env_value
    done = subprocess.run([sys.executable, "-c", _SUITE_SCRIPT], env=env, capture_output=True,
                          text=True, check=True)
    backend, _, body = done.stdout.partition("\n")
    return backend, body


@needs_compiled
def test_full_runs_identical_across_backends():
    fast, fast_csv = _run_suite_with(None)
    slow, slow_csv = _run_suite_with("1")
    assert (fast, slow) == ("cython", "python")
    assert fast_csv == slow_csv
