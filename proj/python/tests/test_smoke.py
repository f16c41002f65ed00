import numpy as np
import pytest

import spdesync

SMALL = """
[solver]
points = 16
length = 6.283185307179586
[besov]
s_points = 32
"""


def test_experiment_names():
    assert spdesync.experiments() == [
        "sync_rate", "coming_down", "order", "pullback", "phi_contraction", "lemma_suite",
    ]
    assert "p = 41" in spdesync.default_config("sync_rate")


def test_lemma_suite_small():
    result = spdesync.run_experiment(SMALL + "[experiment]\nensemble = 5\n", kind="lemma_suite")
    assert result["passed"]
    assert {c["name"] for c in result["checks"]} == {"lemma_a2_constant", "lemma_a1", "lemma_a2"}
    assert result["summary"]["kind"] == "lemma_suite"
    assert len(result["seeds"]) == 5
    rows = spdesync.rows(result)
    assert rows and all(r["experiment"] == "lemma_suite" for r in rows)


def test_order_is_deterministic():
    cfg = SMALL + "[experiment]\nensemble = 4\nhorizon = 0.05\noutput_step = 0.05\n"
    a = spdesync.run_experiment(cfg, kind="order")
    b = spdesync.run_experiment(cfg, kind="order", threads=2)
    assert a["passed"]
    assert a["csv"] == b["csv"]


def test_zero_stays_zero_without_noise():
    u0 = np.zeros((16, 16))
    cfg = SMALL + "[noise]\namplitude = 0\n"
    u = spdesync.evolve(u0, 0.1, cfg)
    assert u.shape == (16, 16)
    assert np.all(u == 0.0)


def test_constant_stays_constant_without_noise():
    u0 = np.full((16, 16), 3.0)
    u = spdesync.evolve(u0, 0.5, SMALL + "[noise]\namplitude = 0\n")
    assert np.all(np.isfinite(u))
    assert np.allclose(u, u[0, 0], rtol=0.0, atol=1e-12)
    assert u[0, 0] != 3.0


def test_norms():
    x = np.linspace(0.0, 2 * np.pi, 16, endpoint=False)
    u = np.add.outer(np.sin(x), np.cos(x))
    sup = spdesync.besov_norm_sup(u, 2 * np.pi, 0.1)
    assert sup > 0.0
    assert spdesync.besov_norm_sup(2 * u, 2 * np.pi, 0.1) == pytest.approx(2 * sup)
    assert spdesync.besov_norm_p(u, 2 * np.pi, 0.1, 4) > 0.0
    assert spdesync.phi_besov(np.zeros((16, 16)), 2 * np.pi, 0.6, 4) == 0.0


def test_errors():
    with pytest.raises(spdesync.ConfigError, match="line 2"):
        spdesync.run_experiment("[solver]\nbogus = 1\n")
    with pytest.raises(spdesync.ConfigError):
        spdesync.besov_norm_sup(np.zeros((3, 4)), 1.0, 0.1)
    assert issubclass(spdesync.DegenerateFit, spdesync.SpdeSyncError)


def test_member_seeds_match_runs():
    result = spdesync.run_experiment(SMALL + "[experiment]\nensemble = 3\n", kind="lemma_suite")
    assert result["seeds"] == [spdesync.member_seed(1, i) for i in range(3)]
