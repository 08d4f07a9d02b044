"""Independent reference implementations used by the tests."""

from __future__ import annotations

import math

import numpy as np
import torch


@torch.no_grad()
def central_diff(f, x: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """Gradient of scalar ``f`` at ``x`` by central differences, one coordinate at a time."""
    x = x.detach().clone().contiguous()
    g = torch.zeros_like(x)
    flat, gf = x.view(-1), g.view(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + eps
        hi = float(f(x))
        flat[i] = orig - eps
        lo = float(f(x))
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * eps)
    return g


def rel_error(a: torch.Tensor, b: torch.Tensor) -> float:
    return float((a - b).norm() / max(float(b.norm()), 1e-12))


def _standardize_cols(e, eps):
    n, d = len(e), len(e[0])
    out = [[0.0] * d for _ in range(n)]
    for j in range(d):
        m = sum(e[i][j] for i in range(n)) / n
        v = sum((e[i][j] - m) ** 2 for i in range(n)) / n
        for i in range(n):
            out[i][j] = (e[i][j] - m) / math.sqrt(v + eps)
    return out


def barlow_loop(e_a, e_b, lambd=0.005, eps=1e-5) -> float:
    a, b = _standardize_cols(e_a, eps), _standardize_cols(e_b, eps)
    n, d = len(a), len(a[0])
    loss = 0.0
    for i in range(d):
        for j in range(d):
            c = sum(a[k][i] * b[k][j] for k in range(n)) / n
            loss += (1 - c) ** 2 if i == j else lambd * c**2
    return loss


def vibcreg_loop(e_a, e_b, sim=25.0, var=25.0, cov=100.0, mode="normalized") -> float:
    n, d = len(e_a), len(e_a[0])
    s = sum((e_a[k][j] - e_b[k][j]) ** 2 for k in range(n) for j in range(d)) / (n * d)
    v_term, c_term = 0.0, 0.0
    for e in (e_a, e_b):
        means = [sum(e[k][j] for k in range(n)) / n for j in range(d)]
        c = [[e[k][j] - means[j] for j in range(d)] for k in range(n)]
        for j in range(d):
            sd = math.sqrt(sum(c[k][j] ** 2 for k in range(n)) / (n - 1) + 1e-4)
            v_term += max(0.0, 1 - sd) / d
        acc = 0.0
        for i in range(d):
            for j in range(d):
                if i == j:
                    continue
                dot = sum(c[k][i] * c[k][j] for k in range(n))
                if mode == "normalized":
                    ni = math.sqrt(sum(c[k][i] ** 2 for k in range(n)))
                    nj = math.sqrt(sum(c[k][j] ** 2 for k in range(n)))
                    acc += (dot / (ni * nj)) ** 2
                else:
                    acc += (dot / (n - 1)) ** 2
        c_term += acc / (d * d) if mode == "normalized" else acc / d
    return sim * s + var * v_term + cov * c_term


def inception_loop(p) -> float:
    n, c = len(p), len(p[0])
    marg = [sum(p[i][j] for i in range(n)) / n for j in range(c)]
    kl = 0.0
    for i in range(n):
        for j in range(c):
            if p[i][j] > 0:
                kl += p[i][j] * (math.log(p[i][j]) - math.log(marg[j]))
    return math.exp(kl / n)


def fid_eig(a: np.ndarray, b: np.ndarray) -> float:
    """Frechet distance with tr sqrt(S_a S_b) from the eigenvalues of S_a S_b."""
    mu_a, mu_b = a.mean(0), b.mean(0)
    s_a = np.atleast_2d(np.cov(a, rowvar=False))
    s_b = np.atleast_2d(np.cov(b, rowvar=False))
    ev = np.linalg.eigvals(s_a @ s_b)
    tr_sqrt = np.sqrt(np.clip(ev.real, 0, None)).sum()
    return float(((mu_a - mu_b) ** 2).sum() + np.trace(s_a) + np.trace(s_b) - 2 * tr_sqrt)
