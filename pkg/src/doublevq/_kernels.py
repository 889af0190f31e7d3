"""Hot numeric kernels with two interchangeable backends.

``numba``  loop kernels compiled with ``@njit`` (default when numba imports).
``numpy``  vectorized pure-numpy versions of the same computations.

The backend is picked at import time from the ``DOUBLEVQ_BACKEND`` environment
variable (``numba`` or ``numpy``); setting ``DOUBLEVQ_DISABLE_NUMBA=1`` forces
``numpy``.  :func:`use_backend` switches it temporarily (tests, benchmarks).

Both backends consume the same pre-drawn uniforms, so they produce the same
draws; the floating point sums may differ in the last bits.
"""

from __future__ import annotations

import contextlib
import os

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

BACKENDS = ("numba", "numpy")


def _initial_backend() -> str:
    if os.environ.get("DOUBLEVQ_DISABLE_NUMBA", "").strip() not in ("", "0"):
        return "numpy"
    name = os.environ.get("DOUBLEVQ_BACKEND", "").strip().lower()
    if name == "numpy":
        return "numpy"
    if name not in ("", "numba"):
        raise ValueError(f"DOUBLEVQ_BACKEND must be one of {BACKENDS}, got {name!r}")
    return "numba" if HAVE_NUMBA else "numpy"


_backend = _initial_backend()


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; expected one of {BACKENDS}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    _backend = name


@contextlib.contextmanager
def use_backend(name: str):
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


# ---------------------------------------------------------------------------
# numpy implementations

_CHUNK_ELEMS = 4_000_000


def _bmu_numpy(prototypes, data):
    n, p = data.shape
    k = prototypes.shape[0]
    out = np.empty(n, dtype=np.int64)
    step = max(1, _CHUNK_ELEMS // max(1, k * p))
    for start in range(0, n, step):
        block = data[start:start + step]
        diff = block[:, None, :] - prototypes[None, :, :]
        dist = np.einsum("nkp,nkp->nk", diff, diff)
        # argmin returns the first minimum: ties go to the lowest index
        out[start:start + step] = np.argmin(dist, axis=1)
    return out


def _sq_dist_to_bmu_numpy(prototypes, data, labels):
    diff = data - prototypes[labels]
    return np.einsum("np,np->n", diff, diff)


def _cluster_sums_numpy(data, labels, k):
    sums = np.zeros((k, data.shape[1]))
    np.add.at(sums, labels, data)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    return sums, counts


def _simulate_numpy(reg_protos, def_protos, cdf, buffer0, lag_back, d, uniforms,
                    record_regs, record_clusters):
    n_paths, horizon = uniforms.shape
    base = buffer0.shape[0]
    buf = np.empty((n_paths, base + horizon * d))
    buf[:, :base] = buffer0
    out = np.empty((n_paths, horizon * d))
    status = np.full(n_paths, -1, dtype=np.int64)
    for s in range(horizon):
        end = base + s * d
        regs = buf[:, end - 1 - lag_back]
        if record_regs.shape[0]:
            record_regs[:, s, :] = regs
        k = _bmu_numpy(reg_protos, regs)
        if record_clusters.shape[0]:
            record_clusters[:, s] = k
        j = np.argmax(cdf[k] > uniforms[:, s:s + 1], axis=1)
        with np.errstate(over="ignore", invalid="ignore"):   # reported through status
            nxt = regs + def_protos[j]
        # leading block is newest-first; store chronologically
        block = nxt[:, d - 1::-1] if d > 1 else nxt[:, :1]
        bad = ~np.isfinite(block).all(axis=1) & (status < 0)
        status[bad] = s
        buf[:, end:end + d] = block
        out[:, s * d:(s + 1) * d] = block
    return out, status


def _mackey_glass_numpy(history, n_steps, substeps, dt, beta, gamma, power, lag_steps):
    # a true recursion: no vectorized form exists, so this is the plain loop
    total = history.shape[0] + n_steps * substeps
    x = np.empty(total)
    x[:history.shape[0]] = history
    out = np.empty(n_steps)
    i = history.shape[0] - 1
    for s in range(n_steps):
        for _ in range(substeps):
            lagged = x[i - lag_steps]
            x[i + 1] = x[i] + dt * (beta * lagged / (1.0 + lagged ** power) - gamma * x[i])
            i += 1
        out[s] = x[i]
    return out


# ---------------------------------------------------------------------------
# numba implementations

if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _bmu_one(prototypes, v):
        k, p = prototypes.shape
        best = 0
        best_d = np.inf
        for i in range(k):
            acc = 0.0
            for c in range(p):
                t = v[c] - prototypes[i, c]
                acc += t * t
            if acc < best_d:
                best_d = acc
                best = i
        return best

    @njit(cache=True, nogil=True)
    def _bmu_numba(prototypes, data):
        n = data.shape[0]
        out = np.empty(n, dtype=np.int64)
        for r in range(n):
            out[r] = _bmu_one(prototypes, data[r])
        return out

    @njit(cache=True, nogil=True)
    def _sq_dist_to_bmu_numba(prototypes, data, labels):
        n, p = data.shape
        out = np.empty(n)
        for r in range(n):
            acc = 0.0
            for c in range(p):
                t = data[r, c] - prototypes[labels[r], c]
                acc += t * t
            out[r] = acc
        return out

    @njit(cache=True, nogil=True)
    def _cluster_sums_numba(data, labels, k):
        n, p = data.shape
        sums = np.zeros((k, p))
        counts = np.zeros(k)
        for r in range(n):
            lab = labels[r]
            counts[lab] += 1.0
            for c in range(p):
                sums[lab, c] += data[r, c]
        return sums, counts

    @njit(cache=True, nogil=True)
    def _simulate_numba(reg_protos, def_protos, cdf, buffer0, lag_back, d, uniforms,
                        record_regs, record_clusters):
        n_paths, horizon = uniforms.shape
        p = reg_protos.shape[1]
        n2 = cdf.shape[1]
        base = buffer0.shape[0]
        out = np.empty((n_paths, horizon * d))
        status = np.full(n_paths, -1, dtype=np.int64)
        buf = np.empty(base + horizon * d)
        reg = np.empty(p)
        rec_r = record_regs.shape[0] > 0
        rec_c = record_clusters.shape[0] > 0
        for path in range(n_paths):
            buf[:base] = buffer0
            for s in range(horizon):
                end = base + s * d
                for c in range(p):
                    reg[c] = buf[end - 1 - lag_back[c]]
                if rec_r:
                    record_regs[path, s, :] = reg
                k = _bmu_one(reg_protos, reg)
                if rec_c:
                    record_clusters[path, s] = k
                u = uniforms[path, s]
                j = 0
                while j < n2 - 1 and not cdf[k, j] > u:
                    j += 1
                for c in range(d):
                    val = reg[d - 1 - c] + def_protos[j, d - 1 - c]
                    if status[path] < 0 and not np.isfinite(val):
                        status[path] = s
                    buf[end + c] = val
                    out[path, s * d + c] = val
        return out, status

    @njit(cache=True, nogil=True)
    def _mackey_glass_numba(history, n_steps, substeps, dt, beta, gamma, power, lag_steps):
        total = history.shape[0] + n_steps * substeps
        x = np.empty(total)
        x[:history.shape[0]] = history
        out = np.empty(n_steps)
        i = history.shape[0] - 1
        for s in range(n_steps):
            for _ in range(substeps):
                lagged = x[i - lag_steps]
                x[i + 1] = x[i] + dt * (beta * lagged / (1.0 + lagged ** power) - gamma * x[i])
                i += 1
            out[s] = x[i]
        return out


# ---------------------------------------------------------------------------
# dispatch

def _pick(numba_fn_name, numpy_fn):
    if _backend == "numba":
        return globals()[numba_fn_name]
    return numpy_fn


def bmu(prototypes: np.ndarray, data: np.ndarray) -> np.ndarray:
    """Index of the nearest prototype for every row of ``data`` (ties: lowest index)."""
    return _pick("_bmu_numba", _bmu_numpy)(prototypes, data)


def sq_dist_to_bmu(prototypes, data, labels):
    return _pick("_sq_dist_to_bmu_numba", _sq_dist_to_bmu_numpy)(prototypes, data, labels)


def cluster_sums(data, labels, k):
    """Per-cluster vector sums and member counts."""
    return _pick("_cluster_sums_numba", _cluster_sums_numpy)(data, labels, k)


_EMPTY_REGS = np.empty((0, 0, 0))
_EMPTY_CLUSTERS = np.empty((0, 0), dtype=np.int64)


def simulate(reg_protos, def_protos, cdf, buffer0, lag_back, d, uniforms,
             record_regs=None, record_clusters=None):
    """Run ``uniforms.shape[0]`` simulation paths of ``uniforms.shape[1]`` steps.

    Returns ``(values, status)``: values is ``(n_paths, horizon * d)`` in
    chronological order; status holds the first step that produced a
    non-finite value for each path, or -1.
    """
    fn = _pick("_simulate_numba", _simulate_numpy)
    regs = _EMPTY_REGS if record_regs is None else record_regs
    clusters = _EMPTY_CLUSTERS if record_clusters is None else record_clusters
    return fn(
        np.ascontiguousarray(reg_protos, dtype=np.float64),
        np.ascontiguousarray(def_protos, dtype=np.float64),
        np.ascontiguousarray(cdf, dtype=np.float64),
        np.ascontiguousarray(buffer0, dtype=np.float64),
        np.ascontiguousarray(lag_back, dtype=np.int64),
        int(d),
        np.ascontiguousarray(uniforms, dtype=np.float64),
        regs,
        clusters,
    )


def mackey_glass(history, n_steps, substeps, dt, beta, gamma, power, lag_steps):
    fn = _pick("_mackey_glass_numba", _mackey_glass_numpy)
    return fn(np.ascontiguousarray(history, dtype=np.float64), int(n_steps), int(substeps),
              float(dt), float(beta), float(gamma), float(power), int(lag_steps))
