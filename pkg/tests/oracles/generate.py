"""Regenerate the frozen reference values used by the unit tests.

Everything here is computed independently of the package: GP posteriors by
explicit high-precision matrix inversion (mpmath, 50 digits), expected
improvement by Monte Carlo, closed forms by direct evaluation. Run with
``python tests/oracles/generate.py`` and paste the output into
``tests/frozen.py``.
"""

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def k(a, b, sd, ls):
    s = mp.mpf(0)
    for ai, bi, li in zip(a, b, ls):
        s += ((mp.mpf(ai) - mp.mpf(bi)) / mp.mpf(li)) ** 2
    return mp.mpf(sd) ** 2 * mp.e ** (-s / 2)


def posterior(X, y, nv, sd, ls, mu0, xq):
    n = len(X)
    K = mp.matrix(n, n)
    for i in range(n):
        for j in range(n):
            K[i, j] = k(X[i], X[j], sd, ls) + (mp.mpf(nv[i]) if i == j else 0)
    Ki = K ** -1
    kq = mp.matrix([k(xq, X[i], sd, ls) for i in range(n)])
    r = mp.matrix([mp.mpf(v) - mp.mpf(mu0) for v in y])
    mean = mp.mpf(mu0) + (kq.T * Ki * r)[0]
    var = k(xq, xq, sd, ls) - (kq.T * Ki * kq)[0]
    # gradient of the mean
    w = Ki * r
    grad = []
    for d in range(len(xq)):
        g = mp.mpf(0)
        for i in range(n):
            g += -w[i] * kq[i] * (mp.mpf(xq[d]) - mp.mpf(X[i][d])) / mp.mpf(ls[d]) ** 2
        grad.append(g)
    nl = (r.T * Ki * r)[0] / 2 + mp.log(mp.det(K)) / 2 + n * mp.log(2 * mp.pi) / 2
    return mean, var, grad, nl


CASES = {
    "gp3": dict(X=[[0.1], [0.5], [0.9]], y=[1.0, -0.5, 0.3], nv=[0.01, 0.02, 0.05],
                sd=1.3, ls=[0.4], mu0=0.2, xq=[0.37]),
    "gp4": dict(X=[[0.0, 0.0], [1.0, 0.2], [0.3, 0.8], [0.9, 0.9]], y=[0.5, -1.0, 2.0, 0.0],
                nv=[0.1, 0.001, 0.05, 0.2], sd=2.0, ls=[0.7, 1.1], mu0=-0.3, xq=[0.45, 0.55]),
    "gp5": dict(X=[[0.2, 1.0], [1.5, -0.3], [-0.7, 0.4], [0.9, 0.9], [0.0, -1.0]],
                y=[1.2, -0.4, 0.7, 2.1, -1.5], nv=[0.02, 0.03, 0.01, 0.05, 0.04],
                sd=1.5, ls=[0.8, 1.3], mu0=0.5, xq=[0.3, 0.1]),
}


def main():
    for name, c in CASES.items():
        mean, var, grad, nl = posterior(c["X"], c["y"], c["nv"], c["sd"], c["ls"], c["mu0"], c["xq"])
        print(f"{name.upper()} = dict(mean={float(mean)!r}, var={float(var)!r}, "
              f"grad={[float(g) for g in grad]!r}, nlml={float(nl)!r})")
    print(f"RBF_50 = {float(4 * mp.e ** mp.mpf(-0.5))!r}")
    # expected improvement at z = 1 (mu = incumbent - sigma), Monte Carlo
    rng = np.random.default_rng(12345)
    draws = rng.standard_normal(10**6)
    ei_mc = float(np.mean(np.maximum(1.0 - draws, 0.0)))
    print(f"EI_Z1_MC = {ei_mc!r}  # per unit sigma, 1e6 samples")
    print(f"SYN_RHO2_15 = {float(mp.mpf('0.01') + mp.mpf('0.19') / (1 + mp.e ** mp.mpf(4.5)))!r}")
    print(f"SYN_RHO2_45 = {float(mp.mpf('0.01') + mp.mpf('0.19') / (1 + mp.e ** mp.mpf(-4.5)))!r}")
    print(f"SYN_Q_05 = {float(6 / (1 + mp.e ** 12))!r}")
    print(f"SYN_Q_75 = {float(6 / (1 + mp.e ** -2))!r}")
    print(f"DX_LS1 = {float(mp.sqrt(-2 * mp.log(mp.mpf('0.95'))))!r}")


if __name__ == "__main__":
    main()
