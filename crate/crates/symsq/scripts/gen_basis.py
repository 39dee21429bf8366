#!/usr/bin/env python3
"""Eigenform coefficient records for S_8(Gamma_0(5)) and S_4(Gamma_0(11)).

Both spaces have no oldforms. Each is spanned by explicit products of eta
quotients and Eisenstein series; the T_2 matrix is found exactly over the
rationals and its eigenvectors are evaluated with mpmath.

    python3 gen_basis.py [out_dir]
"""

import json
import sys
from fractions import Fraction
from pathlib import Path

import mpmath

mpmath.mp.dps = 60


def kronecker_mul(a, b, n):
    """First n coefficients of a*b for integer lists (signed)."""
    a, b = a[:n], b[:n]
    bound = max(map(abs, a)) * max(map(abs, b)) * min(len(a), len(b)) + 1
    bits = bound.bit_length() + 2

    def pack(p):
        x = 0
        for c in reversed(p):
            x = (x << bits) + c
        return x

    x = pack(a) * pack(b)
    out = []
    mask = (1 << bits) - 1
    half = 1 << (bits - 1)
    for _ in range(n):
        c = x & mask
        x >>= bits
        if c >= half:
            c -= 1 << bits
            x += 1
        out.append(c)
    return out


def euler_product(n):
    """prod_{j>=1} (1 - q^j) to n terms (pentagonal numbers)."""
    out = [0] * n
    k = 0
    while True:
        done = True
        for g, s in ((k * (3 * k - 1) // 2, k), (k * (3 * k + 1) // 2, k)):
            if g < n:
                out[g] = (-1) ** (s % 2)
                done = False
            if k == 0:
                break
        if done:
            break
        k += 1
    return out


def rescale(p, m, n):
    out = [0] * n
    for i, c in enumerate(p):
        if i * m >= n:
            break
        out[i * m] = c
    return out


def power(p, e, n):
    out = [1] + [0] * (n - 1)
    for _ in range(e):
        out = kronecker_mul(out, p, n)
    return out


def shift(p, s, n):
    return ([0] * s + p)[:n]


def sigma(n, r):
    out = [0] * n
    for d in range(1, n):
        dr = d**r
        for m in range(d, n, d):
            out[m] += dr
    return out


def eta_pair(q, e, n):
    """eta(z)^e eta(q z)^e for e (q + 1) = 24."""
    s = e * (q + 1) // 24
    base = kronecker_mul(power(euler_product(n), e, n), power(rescale(euler_product(n), q, n), e, n), n)
    return shift(base, s, n)


def space(q, n):
    if q == 5:
        f = eta_pair(5, 4, n)
        s3 = sigma(n, 3)
        e4 = [1] + [240 * s3[i] for i in range(1, n)]
        return 8, [kronecker_mul(f, e4, n), kronecker_mul(f, rescale(e4, 5, n), n), kronecker_mul(f, f, n)]
    if q == 11:
        f = eta_pair(11, 2, n)
        s1 = sigma(n, 1)
        # 11 E2(11z) - E2(z) with E2 = 1 - 24 sum sigma(n) q^n.
        e = [0] * n
        e[0] = 10
        for i in range(1, n):
            e[i] += 24 * s1[i]
            if i % 11 == 0:
                e[i] -= 11 * 24 * s1[i // 11]
        return 4, [kronecker_mul(f, e, n), kronecker_mul(f, f, n)]
    raise ValueError(q)


def solve(rows, rhs):
    """Exact solution of a square rational system."""
    m = [list(map(Fraction, r)) + [Fraction(b)] for r, b in zip(rows, rhs)]
    d = len(m)
    for c in range(d):
        p = next(r for r in range(c, d) if m[r][c] != 0)
        m[c], m[p] = m[p], m[c]
        for r in range(d):
            if r != c and m[r][c] != 0:
                t = m[r][c] / m[c][c]
                m[r] = [x - t * y for x, y in zip(m[r], m[c])]
    return [m[i][d] / m[i][i] for i in range(d)]


def coordinates(basis, g, idx):
    """Coordinates of g in the basis, fitted on the indices idx and
    checked on every other available index."""
    rows = [[b[i] for b in basis] for i in idx]
    x = solve(rows, [g[i] for i in idx])
    for i in range(len(g)):
        assert sum(c * b[i] for c, b in zip(x, basis)) == g[i], f"not in span at {i}"
    return x


def hecke_t2(basis, k, check):
    out = []
    for b in basis:
        t = [b[2 * i] + (2 ** (k - 1) * b[i // 2] if i % 2 == 0 else 0) for i in range(check)]
        out.append(t)
    return out


def records(q, n):
    k, basis = space(q, 2 * n + 2)
    d = len(basis)
    # Indices where the basis is independent.
    idx = []
    for i in range(1, 64):
        trial = idx + [i]
        rows = [[b[j] for b in basis] for j in trial]
        if len(trial) <= d and rank(rows) == len(trial):
            idx = trial
        if len(idx) == d:
            break
    check = min(len(basis[0]) // 2, 400)
    trunc = [b[:check] for b in basis]
    t2 = [coordinates(trunc, t, idx) for t in hecke_t2(basis, k, check)]
    mat = mpmath.matrix([[mpmath.mpf(t2[j][i].numerator) / t2[j][i].denominator for j in range(d)] for i in range(d)])
    vals, vecs = mpmath.eig(mat)
    out = []
    forms = []
    for j in range(d):
        assert abs(mpmath.im(vals[j])) < mpmath.mpf(10) ** -40
        v = [mpmath.re(vecs[i, j]) for i in range(d)]
        coeffs = [sum(v[i] * basis[i][m] for i in range(d)) for m in range(n + 1)]
        a1 = coeffs[1]
        coeffs = [c / a1 for c in coeffs]
        forms.append((float(coeffs[2]), coeffs))
    forms.sort(key=lambda t: t[0])
    for j, (_, coeffs) in enumerate(forms):
        exact = all(abs(c - mpmath.nint(c)) < mpmath.mpf(10) ** -30 for c in coeffs[1:40])
        if exact:
            an = [int(mpmath.nint(c)) for c in coeffs[1:]]
        else:
            an = [mpmath.nstr(c, 25, strip_zeros=False, min_fixed=-1, max_fixed=1) for c in coeffs[1:]]
        label = f"{q}.{k}.{chr(ord('a') + j)}"
        out.append({"level": q, "weight": k, "label": label, "an": an, "precision": 15})
    return out


def rank(rows):
    m = [list(map(Fraction, r)) for r in rows]
    r = 0
    for c in range(len(m[0])):
        p = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                t = m[i][c] / m[r][c]
                m[i] = [x - t * y for x, y in zip(m[i], m[r])]
        r += 1
    return r


def main():
    out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent.parent / "data")
    for q, n in ((5, 8000), (11, 12500)):
        recs = records(q, n)
        path = out_dir / f"basis_{q}_{recs[0]['weight']}.jsonl"
        with open(path, "w") as fh:
            for r in recs:
                fh.write(json.dumps(r, separators=(",", ":")) + "\n")
        print(path, [r["label"] for r in recs])


if __name__ == "__main__":
    main()
