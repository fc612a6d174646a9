"""Brute-force reference for the triplet matcher.

Neighbourhoods are recomputed from scratch by scanning every retained
predecessor, triplets are found by exhaustive pairing, and weights come
from ``scipy.stats.norm``. Nothing here shares code with the incremental
search path; use it on small batches only.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import norm

from .events import EventBatch
from .matcher import RADIUS_TOL, FlowRecord, FlowResult, MatcherParams, Triplet


def _neighbors(k: int, t, x, y, params: MatcherParams) -> np.ndarray:
    lo = max(0, k - params.retention)
    cand = np.arange(lo, k)
    if len(cand) == 0:
        return cand
    ddx = x[cand] - x[k]
    ddy = y[cand] - y[k]
    ok = (
        (t[cand] >= t[k] - params.tau - params.d_t)
        & (t[cand] <= t[k] - params.tau)
        & (ddx * ddx + ddy * ddy <= (params.d_x + RADIUS_TOL) ** 2)
    )
    if params.exclude_center:
        ok &= (ddx != 0) | (ddy != 0)
    return cand[ok]


def _stream_triplets(t, x, y, params: MatcherParams):
    cache: dict[int, np.ndarray] = {}

    def hood(n):
        if n not in cache:
            cache[n] = _neighbors(n, t, x, y, params)
        return cache[n]

    ks, is_, js = [], [], []
    for k in range(len(t)):
        for i in hood(k):
            hi = hood(i)
            if len(hi) == 0:
                continue
            match = hi[(x[hi] == 2 * x[i] - x[k]) & (y[hi] == 2 * y[i] - y[k])]
            ks.extend([k] * len(match))
            is_.extend([int(i)] * len(match))
            js.extend(match.tolist())
    return np.array(ks, dtype=np.int64), np.array(is_, dtype=np.int64), np.array(js, dtype=np.int64)


def brute_force_flow(batch: EventBatch, params: MatcherParams | None = None) -> FlowResult:
    """Per-event flows and the full triplet list by exhaustive search."""
    params = params or MatcherParams()
    n = len(batch)
    flows = np.zeros((n, 2))
    wsum = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)
    triplets: list[Triplet] = []

    for sign in (1, -1):
        gidx = np.flatnonzero(batch.p == sign)
        if len(gidx) == 0:
            continue
        t = batch.t[gidx].astype(np.int64)
        x = batch.x[gidx].astype(np.int64)
        y = batch.y[gidx].astype(np.int64)
        k, i, j = _stream_triplets(t, x, y, params)
        if len(k) == 0:
            continue

        seconds = (t[j] - t[k]) / 1e6
        v = np.stack([(x[j] - x[k]) / seconds, (y[j] - y[k]) / seconds], axis=1)
        if params.weighting == "gaussian":
            u = params.weight_unit_us
            delta = (t[k] - t[i]) / u
            w = norm.pdf(t[j] / u, loc=t[i] / u - delta, scale=delta)
        else:
            w = np.ones(len(k))

        gk = gidx[k]
        np.add.at(wsum, gk, w)
        np.add.at(flows, gk, w[:, None] * v)
        np.add.at(counts, gk, 1)
        triplets.extend(
            Triplet(int(a), int(b), int(c), (float(vx), float(vy)), float(ww))
            for a, b, c, vx, vy, ww in zip(gk, gidx[i], gidx[j], v[:, 0], v[:, 1], w)
        )

    records = []
    for n_ in range(n):
        if counts[n_] and wsum[n_] > 0:
            records.append(FlowRecord(n_, (flows[n_, 0] / wsum[n_], flows[n_, 1] / wsum[n_]), int(counts[n_])))
        else:
            records.append(FlowRecord(n_, None, int(counts[n_])))
    triplets.sort(key=lambda tr: (tr.k, tr.i, tr.j))
    return FlowResult(records, triplets)
