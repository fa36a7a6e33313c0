"""Offline generator for the golden fixtures in this directory.

Run from the crate root:

    python3 data/golden/generate.py

Needs numpy, mpmath and cvxpy (Clarabel). The simulator never depends on
these packages; the outputs are committed and reviewed as plain diffs.
"""

import json
import os

import cvxpy as cp
import mpmath
import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
SCENARIOS = os.path.join(HERE, "..", "scenarios")


def cvec(v):
    return [[float(z.real), float(z.imag)] for z in v]


def cgauss(rng, shape, variance):
    s = np.sqrt(variance / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def write(name, case):
    with open(os.path.join(HERE, name), "w") as f:
        json.dump(case, f, indent=1)
        f.write("\n")


def single_user_mrt():
    rng = np.random.default_rng(11)
    h = cgauss(rng, 12, 1e-10)
    c, p = 1e-11, 100.0
    rate = mpmath.log(1 + mpmath.mpf(p) * mpmath.fsum(abs(mpmath.mpc(z)) ** 2 for z in h) / c, 2)
    write(
        "single_user_mrt.json",
        {
            "name": "single_user_mrt",
            "provenance": "closed form log2(1 + P|h|^2/c) for one user, evaluated with mpmath at 50 digits",
            "inputs": {
                "kind": "cell",
                "in_cell": [cvec(h)],
                "weights": [1.0],
                "victims": [],
                "victim_caps": [],
                "noise_plus_incoming": c,
                "p_max": p,
            },
            "reference": {"rates": [float(rate)], "precoder_norms": [float(np.sqrt(p))]},
        },
    )


def wmmse_qcqp(h, alpha, victims, caps, c, p, iters=400, tol=1e-11):
    """WMMSE where every transmit update is an exact convex QCQP solve."""
    hn = [x / np.sqrt(c) for x in h]
    ln = [l / np.sqrt(q) for l, q in zip(victims, caps)]
    dim, k_users = len(h[0]), len(h)
    w = np.zeros((dim, k_users), dtype=complex)
    for k, x in enumerate(hn):
        w[:, k] = x / np.linalg.norm(x) * np.sqrt(p / k_users)

    def rates(w):
        out = []
        for k, x in enumerate(hn):
            g = np.abs(x.conj() @ w) ** 2
            out.append(np.log2(1 + g[k] / (1 + g.sum() - g[k])))
        return np.array(out)

    prev = None
    for _ in range(iters):
        u, v = [], []
        for k, x in enumerate(hn):
            g = x.conj() @ w
            total = 1 + np.sum(np.abs(g) ** 2)
            u.append(g[k] / total)
            v.append(total / (total - abs(g[k]) ** 2))
        W = cp.Variable((dim, k_users), complex=True)
        terms = []
        for k, x in enumerate(hn):
            row = x.conj() @ W
            terms.append(
                alpha[k] * v[k] * (abs(u[k]) ** 2 * cp.sum_squares(row) - 2 * cp.real(np.conj(u[k]) * row[k]))
            )
        cons = [cp.sum_squares(W) <= p] + [cp.sum_squares(l.conj() @ W) <= 1 for l in ln]
        scale = float(np.dot(alpha, v))
        prob = cp.Problem(cp.Minimize(cp.sum(terms) / scale), cons)
        try:
            prob.solve(solver=cp.CLARABEL)
        except cp.error.SolverError:
            prob.solve(solver=cp.CVXOPT)
        w = W.value
        obj = float(np.dot(alpha, rates(w)))
        if prev is not None and abs(obj - prev) <= tol * abs(obj):
            break
        prev = obj
    return w, rates(w)


def convex_p4():
    rng = np.random.default_rng(13)
    h = [cgauss(rng, 2, 1e-9) for _ in range(2)]
    victims = [cgauss(rng, 2, 1e-9)]
    caps = [1e-8]
    alpha = np.array([1.0, 1.0])
    c, p = 2e-11, 100.0
    w, r = wmmse_qcqp(h, alpha, victims, caps, c, p)
    write(
        "convex_p4.json",
        {
            "name": "convex_p4",
            "provenance": "WMMSE with each transmit update solved as a convex QCQP by cvxpy/Clarabel, "
            "same MRT start, run to a relative objective change of 1e-11",
            "inputs": {
                "kind": "cell",
                "in_cell": [cvec(x) for x in h],
                "weights": alpha.tolist(),
                "victims": [cvec(l) for l in victims],
                "victim_caps": caps,
                "noise_plus_incoming": c,
                "p_max": p,
            },
            "reference": {
                "rates": r.tolist(),
                "precoder_norms": [float(np.linalg.norm(w[:, k])) for k in range(w.shape[1])],
            },
        },
    )


def sinr_network():
    with open(os.path.join(SCENARIOS, "high_ici.json")) as f:
        sc = json.load(f)
    serving, weights = [], []
    for m, cell in enumerate(sc["cells"]):
        for e in cell["edge_users"]:
            serving.append(m)
            weights.append(e["weight"])
        for _ in range(cell["regular_users"]["count"]):
            serving.append(m)
            weights.append(cell["regular_users"]["weight"])
    cells = len(sc["cells"])
    dim = sc["num_surfaces"] * len(sc["array"]["geometry"]["antenna_offsets_m"])
    noise, p = sc["noise_power_w"], sc["p_max_w"]
    rng = np.random.default_rng(3)
    # A few cross links are left out to exercise the absent-channel path.
    channels = [
        [None if (m != serving[k] and (m + k) % 5 == 0) else cgauss(rng, dim, 1e-9) for k in range(len(serving))]
        for m in range(cells)
    ]
    precoders = []
    for m in range(cells):
        users = sum(1 for s in serving if s == m)
        w = cgauss(rng, (dim, users), 1.0)
        precoders.append(w * np.sqrt(p) / np.linalg.norm(w))
    local = [sum(1 for j in range(k) if serving[j] == serving[k]) for k in range(len(serving))]
    rates = []
    for k, m0 in enumerate(serving):
        desired, rest = 0.0, noise
        for m in range(cells):
            hk = channels[m][k]
            if hk is None:
                continue
            for j in range(precoders[m].shape[1]):
                a = abs(np.vdot(hk, precoders[m][:, j])) ** 2
                if m == m0 and j == local[k]:
                    desired = a
                else:
                    rest += a
        rates.append(float(np.log2(1 + desired / rest)))
    write(
        "sinr_high_ici.json",
        {
            "name": "sinr_high_ici",
            "provenance": "numpy straight-line SINR with every relevant station's full transmission as interference",
            "inputs": {
                "kind": "network",
                "scenario": "high_ici",
                "serving": serving,
                "weights": weights,
                "noise_power_w": noise,
                "channels": [[None if h is None else cvec(h) for h in row] for row in channels],
                "precoders": [[cvec(w[:, j]) for j in range(w.shape[1])] for w in precoders],
            },
            "reference": {
                "rates": rates,
                "precoder_norms": [float(np.linalg.norm(w)) for w in precoders],
            },
        },
    )


if __name__ == "__main__":
    single_user_mrt()
    convex_p4()
    sinr_network()
