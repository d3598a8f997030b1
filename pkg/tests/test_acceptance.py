"""Acceptance criteria 1-10. Each test records one PASS/FAIL line, printed in
the terminal summary; the heavy training runs are shared module fixtures.

Expect roughly 20 minutes on one CPU core.
"""
import numpy as np
import pytest

from invml import autograd as ag
from invml.cli import main, resolve_config
from invml.datasets import gen_spheres, gen_swiss_roll, knn_graph
from invml.errors import ConfigError
from invml.interpolation import interpolation_mse_curve
from invml.linalg import random_orthogonal, svd_rank
from invml.losses import ScheduleConfig, eval_schedules
from invml.metrics import (
    bi_lipschitz,
    continuity,
    evaluate_encoder,
    latent_mse,
    mne,
    rmse,
    trustworthiness,
)
from invml.model import InvMLEncoder, forward, inverse_body, inverse_layers, invert_head_sparse, loss_terms
from invml.trainer import TrainConfig, train
from oracles import bilip_oracle, central_diff, lmse_oracle, mne_oracle, rel_err, rmse_oracle, trust_avg

RESULTS = []

# Swiss-roll run shared by criteria 1, 2, 5 and 7
ROLL_N, ROLL_T, ROLL_LR, ROLL_K = 800, 2000, 1e-2, 15
# Half Spheres S^10 run for criterion 6
SPH_N, SPH_T, SPH_LR = 2000, 400, 1e-2


def record(number, ok, detail):
    RESULTS.append(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def _max_orth(enc):
    mats = enc.body + [enc.head]
    return max(float(np.linalg.norm(w.T @ w - np.eye(w.shape[1]), 2)) if w.shape[0] == w.shape[1]
               else float(np.linalg.norm(w @ w.T - np.eye(w.shape[0]), 2)) for w in mats)


def _roll_run(use_orth):
    ds = gen_swiss_roll(ROLL_N, seed=0)
    enc = InvMLEncoder.init(3, 2, L=8, seed=0)
    cfg = TrainConfig(epochs=ROLL_T, k=ROLL_K, lr=ROLL_LR, schedule=ScheduleConfig(use_orth=use_orth))
    enc, _, _ = train(enc, ds, cfg)
    return ds, enc


@pytest.fixture(scope="module")
def roll():
    return _roll_run(True)


@pytest.fixture(scope="module")
def roll_no_orth():
    return _roll_run(False)


def test_c1_swiss_roll_end_to_end(roll):
    ds, enc = roll
    top, _ = evaluate_encoder(enc, ds.x, k=ROLL_K)
    checks = {"RMSE<=0.05": top.rmse <= 0.05, "Trust>=0.99": top.trust >= 0.99,
              "Cont>=0.99": top.cont >= 0.99, "Kmin<=1.2": top.k_min <= 1.2}
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    record(1, ok, f"RMSE {top.rmse:.2e} Trust {top.trust:.4f} Cont {top.cont:.4f} Kmin {top.k_min:.3f}"
                  + (f"  failing: {', '.join(failed)}" if failed else ""))
    assert ok, checks


def test_c2_exact_invertibility(roll):
    worst_rt, worst_mne = 0.0, 0.0
    for m in (3, 32, 101):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            enc = InvMLEncoder.init(m, min(2, m), L=8, seed=seed)
            x = rng.standard_normal((64, m))
            tr = forward(enc, x)
            worst_rt = max(worst_rt, float(np.max(np.abs(inverse_body(enc, tr.latent) - x))))
            worst_mne = max(worst_mne, mne(zip(tr.activations, inverse_layers(enc, tr.latent))))
    ds, trained = roll
    trained_rt = float(np.max(np.abs(inverse_body(trained, forward(trained, ds.x).latent) - ds.x)))
    ok = worst_rt <= 1e-9 and trained_rt <= 1e-6 and worst_mne <= 1e-6
    record(2, ok, f"orthogonal round trip {worst_rt:.1e}, trained {trained_rt:.1e}, MNE {worst_mne:.1e}")
    assert ok


def test_c3_gradients_match_finite_differences():
    worst = {}
    n, m, L, k = 8, 5, 4, 3
    cfg = ScheduleConfig(power_iters=200)
    for seed in range(20):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((n, m))
        g = knn_graph(x, k)
        enc = InvMLEncoder.init(m, 2, L=L, seed=seed)
        # move off the orthogonal point, where the spectral-norm term has a kink
        params = {name: v + 0.3 * rng.standard_normal(v.shape) for name, v in enc.parameters().items()}
        enc.set_parameters(params)
        sched = eval_schedules(50, cfg, m, 2, L, 100, 2.0)
        terms, nodes = loss_terms(enc, x, g, sched, cfg)
        for name, term in terms.items():
            for node in nodes.values():
                node.grad = None
            ag.backward(term)
            analytic, numeric = [], []
            for pname, v in params.items():
                def f(w, pname=pname, name=name):
                    trial = dict(params)
                    trial[pname] = w
                    t, _ = loss_terms(enc, x, g, sched, cfg, params={a: ag.Node(b) for a, b in trial.items()})
                    return t[name].item()

                grad = nodes[pname].grad
                analytic.append(np.zeros_like(v) if grad is None else grad)
                numeric.append(central_diff(f, v))
            err = rel_err(np.concatenate([a.ravel() for a in analytic]),
                          np.concatenate([b.ravel() for b in numeric]))
            worst[name] = max(worst.get(name, 0.0), err)
    ok = all(v <= 1e-5 for v in worst.values())
    record(3, ok, "max relative error " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok, worst


def test_c4_metrics_match_oracles():
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        x = rng.standard_normal((50, 4))
        z = x[:, :2] + 0.3 * rng.standard_normal((50, 2))
        xh = x + 1e-3 * rng.standard_normal(x.shape)
        kmin, kmax, _ = bi_lipschitz(x, z, knn_graph(x, 5))
        okmin, okmax = bilip_oracle(x, z, 5)
        layers = [(x, xh), (z, z + 1e-4 * rng.standard_normal(z.shape))]
        diffs = [
            trustworthiness(x, z) - trust_avg(x, z, 5, 10),
            continuity(x, z) - trust_avg(z, x, 5, 10),
            kmin - okmin, kmax - okmax,
            latent_mse(x, z) - lmse_oracle(x, z),
            rmse(x, xh) - rmse_oracle(x, xh),
            mne(layers) - mne_oracle(layers),
        ]
        worst = max(worst, max(abs(d) for d in diffs))
    ok = worst <= 1e-12
    record(4, ok, f"max deviation from brute-force oracles {worst:.1e} over 10 seeds")
    assert ok


def test_c5_orthogonality(roll, roll_no_orth):
    with_orth, without = _max_orth(roll[1]), _max_orth(roll_no_orth[1])
    ok = with_orth <= 0.1 and with_orth < without
    record(5, ok, f"max rho(W'W - I) {with_orth:.3f} with L_orth, {without:.3f} without")
    assert ok


def _sphere_rank(use_pad):
    ds = gen_spheres(SPH_N, ambient_dim=101, seed=0, half=True, intrinsic_dim=10)
    enc = InvMLEncoder.init(101, 10, L=8, seed=0)
    cfg = TrainConfig(epochs=SPH_T, k=15, lr=SPH_LR, schedule=ScheduleConfig(use_pad=use_pad))
    enc, _, _ = train(enc, ds, cfg)
    return svd_rank(forward(enc, ds.x).latent, 1e-3).rank


def test_c6_padding_sparsity():
    with_pad, without = _sphere_rank(True), _sphere_rank(False)
    ok = with_pad <= 0.6 * without
    record(6, ok, f"rank(Z^(L-1)) {with_pad} with Ex+Orth+Pad, {without} with Ex+Orth (bound {0.6 * without:.1f})")
    assert ok


def test_c7_interpolation_trend(roll):
    ds, enc = roll
    curve = interpolation_mse_curve(enc, ds.x, knn_graph(ds.x, 10), range(1, 11), seed=0)
    x = ds.x - ds.x.min(axis=0)
    null = interpolation_mse_curve(InvMLEncoder.identity(3, 2, L=8), x, knn_graph(x, 10), range(1, 11))
    ok = curve[9] >= curve[0] and np.all(null == 0.0)
    record(7, ok, f"MSE k=1 {curve[0]:.3g}, k=10 {curve[9]:.3g}; identity null max {null.max():.1e}")
    assert ok


def test_c8_sparse_head_inversion():
    m, s_prime, s = 20, 10, 3
    wins = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        enc = InvMLEncoder.init(m, s_prime, L=3, seed=seed, extra_heads=False)
        enc.head = random_orthogonal(m, rng)[:s_prime]
        z = np.zeros(m)
        support = rng.choice(m, s, replace=False)
        z[support] = rng.choice([-1, 1], s) * rng.uniform(0.5, 2.0, s)
        try:
            got = invert_head_sparse(enc, (enc.head @ z)[None, :], s)[0]
        except ArithmeticError:
            continue
        same_support = set(np.flatnonzero(got)) == set(support)
        wins += same_support and float(np.max(np.abs(got - z))) <= 1e-6
    ok = wins >= 95
    record(8, ok, f"{wins}/100 planted 3-sparse vectors recovered exactly")
    assert ok


def test_c9_full_scale_mnist_is_informative():
    try:
        cfg = resolve_config("mnist784")
        detail = "profile resolved"
    except ConfigError as exc:
        cfg = None
        detail = f"profile present, data absent ({exc})"
    record(9, True, f"informative only, not run: {detail}")
    if cfg is None:
        pytest.skip("MNIST full-scale run is informative and needs local IDX files")


def test_c10_determinism(tmp_path):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = main(["train", "--profile", "swissroll", "--set", "dataset.n=200", "--set", "trainer.epochs=100",
                     "--seed", "3", "--out", str(out)])
        assert code == 0
        runs.append(((out / "history.csv").read_bytes(), (out / "model.ckpt").read_bytes()))
    ok = runs[0] == runs[1]
    record(10, ok, "history.csv and model.ckpt byte-identical across two runs" if ok else "outputs differ")
    assert ok
