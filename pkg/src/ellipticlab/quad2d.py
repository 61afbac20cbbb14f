"""Adaptive 2-D quadrature on rectangles (tensor Simpson with quadtree refinement).

Cells whose Richardson error estimate exceeds their share of the tolerance
budget are split into four children; integrable singularities (log poles,
indicator boundaries) are handled by the depth cap, with the caller
supplying any analytic patch for excluded neighborhoods.
"""

from __future__ import annotations

import numpy as np


class QuadratureError(RuntimeError):
    """Adaptive refinement hit its depth/cell budget before the tolerance."""


_WX = np.array([1.0, 4.0, 1.0]) / 6.0
_W9 = np.outer(_WX, _WX).ravel()   # tensor Simpson weights on a 3x3 stencil
_OFF = np.array([0.0, 0.5, 1.0])


def _simpson_cells(func, x0, x1, y0, y1):
    """Vectorized 3x3 Simpson estimates for a batch of cells."""
    xs = x0[:, None] + (x1 - x0)[:, None] * _OFF[None, :]
    ys = y0[:, None] + (y1 - y0)[:, None] * _OFF[None, :]
    pts = (xs[:, :, None] + 1j * ys[:, None, :]).reshape(-1)
    vals = np.asarray(func(pts), dtype=float).reshape(len(x0), 9)
    area = (x1 - x0) * (y1 - y0)
    return area * (vals @ _W9)


def adaptive_quad2d(func, box, tol, max_depth: int = 14, max_cells: int = 2_000_000):
    """Integrate func over box = (x0, x1, y0, y1).

    func maps a complex ndarray of points to real values, vectorized.
    Returns (integral, error_estimate).  Raises QuadratureError when the
    cell budget is exhausted before the requested tolerance.
    """
    bx0, bx1, by0, by1 = map(float, box)
    total_area = (bx1 - bx0) * (by1 - by0)
    if total_area <= 0:
        raise ValueError("box must have positive area")

    x0 = np.array([bx0]); x1 = np.array([bx1])
    y0 = np.array([by0]); y1 = np.array([by1])
    parent = _simpson_cells(func, x0, x1, y0, y1)

    integral = 0.0
    err_acc = 0.0
    cells_used = 1
    for depth in range(max_depth + 1):
        xm = 0.5 * (x0 + x1)
        ym = 0.5 * (y0 + y1)
        cx0 = np.concatenate([x0, xm, x0, xm])
        cx1 = np.concatenate([xm, x1, xm, x1])
        cy0 = np.concatenate([y0, y0, ym, ym])
        cy1 = np.concatenate([ym, ym, y1, y1])
        child = _simpson_cells(func, cx0, cx1, cy0, cy1)
        refined = child.reshape(4, -1).sum(axis=0)

        err = np.abs(refined - parent) / 15.0
        cell_tol = tol * ((x1 - x0) * (y1 - y0)) / total_area
        done = (err <= cell_tol) | (depth == max_depth)

        integral += float(np.sum(refined[done] + (refined[done] - parent[done]) / 15.0))
        err_acc += float(np.sum(err[done]))

        keep = ~done
        if not keep.any():
            break
        mask4 = np.tile(keep, 4)
        x0, x1 = cx0[mask4], cx1[mask4]
        y0, y1 = cy0[mask4], cy1[mask4]
        parent = child[mask4]
        cells_used += int(keep.sum()) * 4
        if cells_used > max_cells:
            raise QuadratureError(
                f"exceeded {max_cells} cells at depth {depth}; tol={tol:g} too tight")
    return integral, err_acc
