"""Numeric hot kernels with a numba backend and a pure-numpy fallback.

The backend is selected once at import via the ``NFMIMO_BACKEND`` env var
("numba", "numpy", or "auto"; default auto = numba when importable).
``NFMIMO_THREADS`` caps the numba thread pool. Both implementations are
always importable so tests and benchmarks can compare them directly.

Conventions: all positions passed to kernels are relative to the
transmitter center; ``block_centers`` are sub-array centers in the same
frame. Phases are accumulated in double precision and reduced only by the
final sin/cos evaluation.
"""

from __future__ import annotations

import math
import os

import numpy as np

MODEL_EXACT = 0
MODEL_QUARTIC_SUBARRAY = 1

_FOUR_PI = 4.0 * math.pi


def _requested_backend() -> str:
    value = os.environ.get("NFMIMO_BACKEND", "auto").strip().lower()
    if value in ("", "auto"):
        return "auto"
    if value in ("numba", "numpy"):
        return value
    raise RuntimeError(f"NFMIMO_BACKEND must be 'numba' or 'numpy', got {value!r}")


def _requested_threads() -> int | None:
    value = os.environ.get("NFMIMO_THREADS", "").strip()
    if not value:
        return None
    try:
        threads = int(value)
    except ValueError as exc:
        raise RuntimeError(f"NFMIMO_THREADS must be an integer, got {value!r}") from exc
    if threads < 1:
        raise RuntimeError("NFMIMO_THREADS must be a positive integer")
    return threads


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def neff_from_eigenvalues_numpy(eigenvalues: np.ndarray) -> np.ndarray:
    """Effective rank per spectrum; accepts (..., L) stacked eigenvalues."""
    ev = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    sigma = np.sqrt(ev)
    total = sigma.sum(axis=-1, keepdims=True)
    safe_total = np.where(total > 0.0, total, 1.0)
    p = sigma / safe_total
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0.0, p * np.log(p), 0.0)
    neff = np.exp(-plogp.sum(axis=-1))
    return np.where(total[..., 0] > 0.0, neff, 1.0)


def exact_channel_numpy(rx_pos: np.ndarray, tx_pos: np.ndarray, k0: float) -> np.ndarray:
    """Spherical-wave channel entries exp(j*k0*d)/(4*pi*d), d pairwise distance."""
    diff = rx_pos[:, None, :] - tx_pos[None, :, :]
    d = np.sqrt((diff * diff).sum(axis=-1))
    return np.exp(1j * k0 * d) / (_FOUR_PI * d)


def _quartic_block_phase_numpy(rx_local, tx_pos, k0, c_vec):
    cn2 = float(c_vec @ c_vec)
    cn = math.sqrt(cn2)
    cxz = np.array([c_vec[0], 0.0, c_vec[2]])
    ct = tx_pos @ c_vec
    cr = rx_local @ c_vec
    tx_sq = (tx_pos * tx_pos).sum(axis=1)
    rx_sq = (rx_local * rx_local).sum(axis=1)
    ftx = (k0 / (2.0 * cn)) * (tx_sq - 2.0 * ct - (tx_pos @ cxz) ** 2 / cn2)
    frx = (k0 / (2.0 * cn)) * (rx_sq + 2.0 * cr - (rx_local @ cxz) ** 2 / cn2)
    p = (-k0 / cn) * (rx_local @ tx_pos.T - np.outer(cr, ct) / cn2)
    return k0 * cn + frx[:, None] + p + ftx[None, :], cn


def quartic_stack_numpy(rx_pos: np.ndarray, tx_pos: np.ndarray, k0: float,
                        block_starts: np.ndarray, block_centers: np.ndarray) -> np.ndarray:
    """Stacked per-block quartic channel; each block uses its own center distance."""
    m, l = rx_pos.shape[0], tx_pos.shape[0]
    h = np.empty((m, l), dtype=np.complex128)
    for b in range(block_centers.shape[0]):
        lo, hi = int(block_starts[b]), int(block_starts[b + 1])
        c_vec = block_centers[b]
        phase, cn = _quartic_block_phase_numpy(rx_pos[lo:hi] - c_vec, tx_pos, k0, c_vec)
        h[lo:hi] = np.exp(1j * phase) / (_FOUR_PI * cn)
    return h


def grid_neff_numpy(points: np.ndarray, base_pos: np.ndarray, dirs: np.ndarray,
                    tx_pos: np.ndarray, k0: float, model: int,
                    block_starts: np.ndarray, block_centers: np.ndarray,
                    chunk: int = 512) -> np.ndarray:
    """Effective rank of the selected channel model at every grid point.

    ``points`` is (N, K); receiver positions are affine in the grid
    parameters: pos = base_pos + sum_k s_k * dirs[k].
    """
    n = points.shape[0]
    out = np.empty(n)
    for lo in range(0, n, chunk):
        pts = points[lo:lo + chunk]
        rx = base_pos[None, :, :] + np.tensordot(pts, dirs, axes=(1, 0))
        if model == MODEL_EXACT:
            diff = rx[:, :, None, :] - tx_pos[None, None, :, :]
            d = np.sqrt((diff * diff).sum(axis=-1))
            hh = np.exp(1j * k0 * d) / (_FOUR_PI * d)
        else:
            hh = np.empty((rx.shape[0], rx.shape[1], tx_pos.shape[0]), dtype=np.complex128)
            for ib in range(rx.shape[0]):
                hh[ib] = quartic_stack_numpy(rx[ib], tx_pos, k0, block_starts, block_centers)
        g = np.einsum("pmu,pmv->puv", hh.conj(), hh)
        ev = np.linalg.eigvalsh(g)
        out[lo:lo + pts.shape[0]] = neff_from_eigenvalues_numpy(ev)
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

try:
    import numba
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via NFMIMO_BACKEND=numpy
    _HAVE_NUMBA = False

if _HAVE_NUMBA:

    @njit(cache=True)
    def _neff_nb(ev):
        n = ev.shape[0]
        total = 0.0
        for i in range(n):
            v = ev[i]
            if v > 0.0:
                total += math.sqrt(v)
        if total <= 0.0:
            return 1.0
        entropy = 0.0
        for i in range(n):
            v = ev[i]
            if v > 0.0:
                p = math.sqrt(v) / total
                entropy -= p * math.log(p)
        return math.exp(entropy)

    @njit(cache=True)
    def _exact_channel_nb(rx, tx, k0):
        m = rx.shape[0]
        l = tx.shape[0]
        h = np.empty((m, l), dtype=np.complex128)
        for i in range(m):
            for j in range(l):
                dx = rx[i, 0] - tx[j, 0]
                dy = rx[i, 1] - tx[j, 1]
                dz = rx[i, 2] - tx[j, 2]
                d = math.sqrt(dx * dx + dy * dy + dz * dz)
                amp = 1.0 / (_FOUR_PI * d)
                ph = k0 * d
                h[i, j] = complex(amp * math.cos(ph), amp * math.sin(ph))
        return h

    @njit(cache=True)
    def _quartic_stack_nb(rx, tx, k0, bstart, bcenter):
        m = rx.shape[0]
        l = tx.shape[0]
        h = np.empty((m, l), dtype=np.complex128)
        ftx = np.empty(l)
        ct = np.empty(l)
        for b in range(bcenter.shape[0]):
            cx = bcenter[b, 0]
            cy = bcenter[b, 1]
            cz = bcenter[b, 2]
            cn2 = cx * cx + cy * cy + cz * cz
            cn = math.sqrt(cn2)
            amp = 1.0 / (_FOUR_PI * cn)
            for j in range(l):
                x = tx[j, 0]
                y = tx[j, 1]
                z = tx[j, 2]
                ct[j] = cx * x + cy * y + cz * z
                sxz = cx * x + cz * z
                ftx[j] = (k0 / (2.0 * cn)) * (x * x + y * y + z * z
                                              - 2.0 * ct[j] - sxz * sxz / cn2)
            for i in range(bstart[b], bstart[b + 1]):
                x = rx[i, 0] - cx
                y = rx[i, 1] - cy
                z = rx[i, 2] - cz
                cr = cx * x + cy * y + cz * z
                sxz = cx * x + cz * z
                frx = (k0 / (2.0 * cn)) * (x * x + y * y + z * z
                                           + 2.0 * cr - sxz * sxz / cn2)
                base = k0 * cn + frx
                for j in range(l):
                    dot = x * tx[j, 0] + y * tx[j, 1] + z * tx[j, 2]
                    ph = base + ftx[j] - (k0 / cn) * (dot - cr * ct[j] / cn2)
                    h[i, j] = complex(amp * math.cos(ph), amp * math.sin(ph))
        return h

    @njit(cache=True)
    def _gram_nb(h):
        m, l = h.shape
        g = np.zeros((l, l), dtype=np.complex128)
        for i in range(m):
            for u in range(l):
                hu = h[i, u].conjugate()
                for v in range(l):
                    g[u, v] += hu * h[i, v]
        return g

    @njit(cache=True, parallel=True)
    def _grid_neff_nb(points, base, dirs, tx, k0, model, bstart, bcenter):
        n = points.shape[0]
        ndim = points.shape[1]
        m = base.shape[0]
        out = np.empty(n)
        for ip in prange(n):
            rx = np.empty((m, 3))
            for e in range(m):
                px = base[e, 0]
                py = base[e, 1]
                pz = base[e, 2]
                for kd in range(ndim):
                    s = points[ip, kd]
                    px += s * dirs[kd, e, 0]
                    py += s * dirs[kd, e, 1]
                    pz += s * dirs[kd, e, 2]
                rx[e, 0] = px
                rx[e, 1] = py
                rx[e, 2] = pz
            if model == MODEL_EXACT:
                h = _exact_channel_nb(rx, tx, k0)
            else:
                h = _quartic_stack_nb(rx, tx, k0, bstart, bcenter)
            ev = np.linalg.eigvalsh(_gram_nb(h))
            out[ip] = _neff_nb(ev)
        return out

    def exact_channel_numba(rx_pos, tx_pos, k0):
        return _exact_channel_nb(np.ascontiguousarray(rx_pos, dtype=float),
                                 np.ascontiguousarray(tx_pos, dtype=float), float(k0))

    def quartic_stack_numba(rx_pos, tx_pos, k0, block_starts, block_centers):
        return _quartic_stack_nb(np.ascontiguousarray(rx_pos, dtype=float),
                                 np.ascontiguousarray(tx_pos, dtype=float), float(k0),
                                 np.ascontiguousarray(block_starts, dtype=np.int64),
                                 np.ascontiguousarray(block_centers, dtype=float))

    def grid_neff_numba(points, base_pos, dirs, tx_pos, k0, model,
                        block_starts, block_centers):
        return _grid_neff_nb(np.ascontiguousarray(points, dtype=float),
                             np.ascontiguousarray(base_pos, dtype=float),
                             np.ascontiguousarray(dirs, dtype=float),
                             np.ascontiguousarray(tx_pos, dtype=float),
                             float(k0), int(model),
                             np.ascontiguousarray(block_starts, dtype=np.int64),
                             np.ascontiguousarray(block_centers, dtype=float))

else:
    exact_channel_numba = None
    quartic_stack_numba = None
    grid_neff_numba = None


def _resolve_backend() -> str:
    requested = _requested_backend()
    if requested == "numpy":
        return "numpy"
    if requested == "numba" and not _HAVE_NUMBA:
        raise RuntimeError("NFMIMO_BACKEND=numba but numba is not importable")
    return "numba" if _HAVE_NUMBA else "numpy"


BACKEND = _resolve_backend()

if BACKEND == "numba":
    threads = _requested_threads()
    if threads is not None:
        numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))
    exact_channel_entries = exact_channel_numba
    quartic_stack_entries = quartic_stack_numba
    _grid_neff = grid_neff_numba
else:
    exact_channel_entries = exact_channel_numpy
    quartic_stack_entries = quartic_stack_numpy
    _grid_neff = grid_neff_numpy


def active_backend() -> str:
    return BACKEND


def grid_effective_rank(points, base_pos, dirs, tx_pos, k0, model=MODEL_EXACT,
                        block_starts=None, block_centers=None) -> np.ndarray:
    """Backend-dispatched grid evaluation (see :func:`grid_neff_numpy`)."""
    if block_starts is None:
        block_starts = np.array([0, base_pos.shape[0]], dtype=np.int64)
        block_centers = np.zeros((1, 3))
    return _grid_neff(np.asarray(points, dtype=float),
                      np.asarray(base_pos, dtype=float),
                      np.asarray(dirs, dtype=float),
                      np.asarray(tx_pos, dtype=float),
                      float(k0), int(model),
                      np.asarray(block_starts, dtype=np.int64),
                      np.asarray(block_centers, dtype=float))
