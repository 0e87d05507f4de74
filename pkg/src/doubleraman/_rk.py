"""Compiled Dormand-Prince 5(4) integration of sublattice rows.

Each row is integrated with its own adaptive step, so a row's result does
not depend on which other rows share the batch.
"""

from __future__ import annotations

import numpy as np
from numba import njit

SHAPE_GAUSSIAN = 0
SHAPE_BOX = 1

STATUS_OK = 0
STATUS_UNDERFLOW = 1

# Butcher tableau (row i holds the a_ij of stage i) and error weights b - b*
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 6))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_E = np.array([
    35 / 384 - 5179 / 57600,
    0.0,
    500 / 1113 - 7571 / 16695,
    125 / 192 - 393 / 640,
    -2187 / 6784 + 92097 / 339200,
    11 / 84 - 187 / 2100,
    -1 / 40,
])


@njit(cache=True)
def _rhs(t, c, out, first, parity, offset, quasi, kind, amplitude, width):
    size = c.shape[0]
    for j in range(size):
        out[j] = 0.0
    if kind == SHAPE_GAUSSIAN:
        om = amplitude * np.exp(-t * t / (2.0 * width * width))
    else:
        om = amplitude
    if om == 0.0:
        return
    # link j -> j+1 oscillates as exp(-i t (2 n + 1 + 2 q -+ offset)), n = first + j
    link = np.exp(-1j * t * (2.0 * first + 1.0 + 2.0 * quasi))
    step = np.exp(-2j * t)
    shift = np.exp(1j * t * offset)
    shift_c = np.conj(shift)
    for j in range(size - 1):
        if (first + j + parity) & 1:
            lk = link * shift_c
        else:
            lk = link * shift
        out[j] += lk * c[j + 1]
        out[j + 1] += np.conj(lk) * c[j]
        link *= step
    for j in range(size):
        out[j] *= 1j * om


@njit(cache=True)
def integrate_batch(rows0, parity, quasi, first, offset, kind, amplitude, width,
                    t0, t1, rel_tol, abs_tol, h0):
    """Integrate every row of ``rows0`` from ``t0`` to ``t1``.

    ``h0`` holds the first trial step of every row.  Returns the final rows, accepted and rejected step counts, the smallest
    accepted step and a status (nonzero when the step size underflowed).
    """
    n_rows, size = rows0.shape
    out = rows0.copy()
    steps = 0
    rejected = 0
    min_step = np.inf
    status = STATUS_OK
    span = t1 - t0
    h_min = 1e-6 * span
    ks = np.empty((7, size), np.complex128)
    y = np.empty(size, np.complex128)
    y_stage = np.empty(size, np.complex128)
    for r in range(n_rows):
        for j in range(size):
            y[j] = rows0[r, j]
        par = parity[r]
        q = quasi[r]
        t = t0
        h = min(h0[r], span)
        _rhs(t, y, ks[0], first, par, offset, q, kind, amplitude, width)
        while t < t1:
            last = t + h >= t1
            if last:
                h = t1 - t
            for i in range(1, 7):
                for j in range(size):
                    acc = 0.0j
                    for m in range(i):
                        acc += _A[i, m] * ks[m, j]
                    y_stage[j] = y[j] + h * acc
                _rhs(t + _C[i] * h, y_stage, ks[i], first, par, offset, q, kind, amplitude, width)
            # y_stage now holds the 5th-order solution
            total = 0.0
            for j in range(size):
                err = 0.0j
                for m in range(7):
                    err += _E[m] * ks[m, j]
                err *= h
                scale = abs_tol + rel_tol * max(abs(y[j]), abs(y_stage[j]))
                total += (abs(err) / scale) ** 2
            err_norm = np.sqrt(total / size)
            if err_norm <= 1.0:
                t = t1 if last else t + h
                for j in range(size):
                    y[j] = y_stage[j]
                    ks[0, j] = ks[6, j]
                steps += 1
                min_step = min(min_step, h)
                factor = 5.0 if err_norm == 0.0 else min(5.0, 0.9 * err_norm ** -0.2)
            else:
                rejected += 1
                factor = max(0.2, 0.9 * err_norm ** -0.2)
            h *= factor
            if h < h_min and t < t1 and (t1 - t) > h_min:
                status = STATUS_UNDERFLOW
                return out, steps, rejected, min_step, status
        for j in range(size):
            out[r, j] = y[j]
    return out, steps, rejected, min_step, status
