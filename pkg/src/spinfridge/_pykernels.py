"""NumPy implementations of the hot loops (fallback when the extension is absent)."""
import numpy as np


def closed_form_denominator(w, g, linewidth, r, delta):
    w = np.asarray(w, dtype=float)
    y = w - delta
    g2 = g * g
    return (0.25 * r * r + w * w) * (0.25 * linewidth**2 + y * y) + g2 * (
        0.5 * r * linewidth - 2.0 * w * y
    ) + g2 * g2


def resolvent_row(drift, w, port):
    """Row ``port`` of ``(-i w I - drift)^-1`` for every ``w``.

    Returns ``(rows, bad)`` where ``bad`` is the index of the first singular
    frequency, or -1.
    """
    drift = np.asarray(drift, dtype=complex)
    w = np.asarray(w, dtype=float)
    d = drift.shape[0]
    mt = np.broadcast_to(-drift.T, (w.size, d, d)).copy()
    idx = np.arange(d)
    mt[:, idx, idx] -= 1j * w[:, None]
    rhs = np.zeros((w.size, d, 1), dtype=complex)
    rhs[:, port, 0] = 1.0
    try:
        rows = np.linalg.solve(mt, rhs)[:, :, 0]
    except np.linalg.LinAlgError:
        rows = np.empty((w.size, d), dtype=complex)
        for i in range(w.size):
            try:
                rows[i] = np.linalg.solve(mt[i], rhs[i, :, 0])
            except np.linalg.LinAlgError:
                return rows, i
    return rows, -1


def resolvent_rows_stack(drifts, w, port):
    """:func:`resolvent_row` over a stack of drifts; returns ``(rows[k, i, :], bad)``.

    ``bad`` is the flat index ``k * len(w) + i`` of the first singular point, or -1.
    """
    drifts = np.asarray(drifts, dtype=complex)
    w = np.asarray(w, dtype=float)
    nd, d, _ = drifts.shape
    mt = np.broadcast_to(-np.transpose(drifts, (0, 2, 1))[:, None], (nd, w.size, d, d)).copy()
    idx = np.arange(d)
    mt[:, :, idx, idx] -= 1j * w[None, :, None]
    rhs = np.zeros((nd, w.size, d, 1), dtype=complex)
    rhs[..., port, 0] = 1.0
    try:
        return np.linalg.solve(mt, rhs)[..., 0], -1
    except np.linalg.LinAlgError:
        rows = np.empty((nd, w.size, d), dtype=complex)
        for k in range(nd):
            rows[k], bad = resolvent_row(drifts[k], w, port)
            if bad >= 0:
                return rows, k * w.size + bad
        return rows, -1
