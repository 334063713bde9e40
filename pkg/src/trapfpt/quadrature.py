"""Adaptive Gauss-Kronrod panel quadrature with batched refinement.

Panels are (G7, K15) pairs; the per-panel error estimate is |K15 - G7|.
Integrands are vector-valued (m rows evaluated on shared nodes), so one
adaptive mesh serves a whole family of integrals (all normalization and
amplitude integrals of an eigensystem at once), and refinement rounds
evaluate every pending panel in a single batched call, which is what makes
the double-double special-function evaluations affordable.
"""

from __future__ import annotations

import numpy as np

from .specfun import NoConvergence

# Canonical (G7, K15) nodes and weights; Gauss weights are zero on the
# Kronrod-only nodes.
_GK = np.array([
    # node                 weight G7           weight K15
    (+0.949107912342759, 0.129484966168870, 0.063092092629979),
    (-0.949107912342759, 0.129484966168870, 0.063092092629979),
    (+0.741531185599394, 0.279705391489277, 0.140653259715525),
    (-0.741531185599394, 0.279705391489277, 0.140653259715525),
    (+0.405845151377397, 0.381830050505119, 0.190350578064785),
    (-0.405845151377397, 0.381830050505119, 0.190350578064785),
    (0.000000000000000, 0.417959183673469, 0.209482141084728),
    (+0.991455371120813, 0.000000000000000, 0.022935322010529),
    (-0.991455371120813, 0.000000000000000, 0.022935322010529),
    (+0.864864423359769, 0.000000000000000, 0.104790010322250),
    (-0.864864423359769, 0.000000000000000, 0.104790010322250),
    (+0.586087235467691, 0.000000000000000, 0.169004726639267),
    (-0.586087235467691, 0.000000000000000, 0.169004726639267),
    (+0.207784955007898, 0.000000000000000, 0.204432940075298),
    (-0.207784955007898, 0.000000000000000, 0.204432940075298),
])
_NODES = _GK[:, 0]
_WG = _GK[:, 1]
_WK = _GK[:, 2]


def _eval_panels(integrand, left, right):
    """Evaluate integrand rows on a batch of panels.

    Returns (i15, err) of shape (m, n_panels).
    """
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    nodes = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
    vals = np.atleast_2d(integrand(nodes))
    m = vals.shape[0]
    vals = vals.reshape(m, left.size, _NODES.size)
    i15 = (vals * _WK).sum(axis=2) * half
    i7 = (vals * _WG).sum(axis=2) * half
    return i15, np.abs(i15 - i7)


def integrate_rows(
    integrand,
    edges,
    rel_tol: float = 1e-10,
    scale_floor=0.0,
    max_panels: int = 4000,
    max_rounds: int = 40,
):
    """Integrate m rows over the panelization given by ``edges``.

    integrand(z) must accept a 1-D array and return (m, len(z)) (or (len(z),)
    for a single row).  Refinement halves every panel whose error estimate
    exceeds its share of a row tolerance rel_tol * max(|integral|,
    scale_floor).  Returns (totals, errors), each of shape (m,).

    Raises NoConvergence when refinement stalls (panel budget exhausted or
    panels shrunk to the width floor while the estimate still exceeds the
    tolerance).
    """
    edges = np.asarray(edges, dtype=float)
    left = edges[:-1].copy()
    right = edges[1:].copy()
    if np.any(right <= left):
        raise ValueError("edges must be strictly increasing")
    span = edges[-1] - edges[0]
    width_floor = span * 2.0 ** -45
    i15, err = _eval_panels(integrand, left, right)
    scale_floor = np.asarray(scale_floor, dtype=float)
    for _ in range(max_rounds):
        totals = i15.sum(axis=1)
        err_rows = err.sum(axis=1)
        tol_rows = rel_tol * np.maximum(np.abs(totals), scale_floor)
        if np.all(err_rows <= tol_rows):
            return totals, err_rows
        # a panel is split when it holds more than its share of any
        # unconverged row's budget
        n_p = left.size
        bad_rows = err_rows > tol_rows
        share = tol_rows[bad_rows, None] / (2.0 * n_p)
        split = np.any(err[bad_rows] > share, axis=0) & ((right - left) > width_floor)
        if not np.any(split) or n_p + np.sum(split) > max_panels:
            break
        l_s, r_s = left[split], right[split]
        mid = 0.5 * (l_s + r_s)
        nl = np.concatenate([left[~split], l_s, mid])
        nr = np.concatenate([right[~split], mid, r_s])
        order = np.argsort(nl, kind="stable")
        keep_i15 = i15[:, ~split]
        keep_err = err[:, ~split]
        new_i15, new_err = _eval_panels(integrand, np.concatenate([l_s, mid]), np.concatenate([mid, r_s]))
        i15 = np.concatenate([keep_i15, new_i15], axis=1)[:, order]
        err = np.concatenate([keep_err, new_err], axis=1)[:, order]
        left, right = nl[order], nr[order]
    totals = i15.sum(axis=1)
    err_rows = err.sum(axis=1)
    tol_rows = rel_tol * np.maximum(np.abs(totals), scale_floor)
    if np.all(err_rows <= tol_rows):
        return totals, err_rows
    raise NoConvergence(
        f"adaptive quadrature stalled at {left.size} panels; "
        f"worst err {float(np.max(err_rows / np.maximum(tol_rows, 1e-300))):.2e}x tolerance"
    )


def geometric_edges(a: float, b: float, n_uniform: int, t_start: float, ratio: float = 1.6):
    """Panel edges: n_uniform panels on [a, t_start], geometric out to b."""
    if t_start >= b:
        return np.linspace(a, b, n_uniform + 1)
    edges = list(np.linspace(a, t_start, n_uniform + 1))
    w = (t_start - a) / max(n_uniform, 1)
    z = t_start
    while z < b:
        w *= ratio
        z = min(z + w, b)
        edges.append(z)
    edges[-1] = b
    return np.array(edges)
