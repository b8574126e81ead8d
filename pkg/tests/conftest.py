"""Shared test helpers."""

import functools


def edit_oracle(ref, hyp):
    """Brute-force recursive-memo alignment, independent of the package DP.

    Same left-to-right tie preference: substitution, then deletion, then
    insertion. Returns (cost, sub, dele, ins).
    """
    ref = tuple(ref)
    hyp = tuple(hyp)

    @functools.lru_cache(maxsize=None)
    def go(i, j):
        if i == len(ref) and j == len(hyp):
            return (0, 0, 0, 0)
        options = []
        if i < len(ref) and j < len(hyp):
            c, s, d, n = go(i + 1, j + 1)
            if ref[i] == hyp[j]:
                options.append((c, 0, (c, s, d, n)))
            else:
                options.append((c + 1, 0, (c + 1, s + 1, d, n)))
        if i < len(ref):
            c, s, d, n = go(i + 1, j)
            options.append((c + 1, 1, (c + 1, s, d + 1, n)))
        if j < len(hyp):
            c, s, d, n = go(i, j + 1)
            options.append((c + 1, 2, (c + 1, s, d, n + 1)))
        options.sort(key=lambda o: (o[0], o[1]))
        return options[0][2]

    return go(0, 0)
