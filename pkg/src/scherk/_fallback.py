"""Pure numpy implementations of the compiled kernels.

Signatures and results match ``scherk._kernels`` exactly; only speed differs.
"""

import numpy as np

_CHUNK = 1 << 20


def _popcount(m):
    m = m - ((m >> 1) & 0x55555555)
    m = (m & 0x33333333) + ((m >> 2) & 0x33333333)
    m = (m + (m >> 4)) & 0x0F0F0F0F
    return (m * 0x01010101 & 0xFFFFFFFF) >> 24


def _rot_right(m, n, full):
    return ((m >> 1) | (m << (n - 1))) & full


def _rot_left(m, n, full):
    return ((m << 1) | (m >> (n - 1))) & full


def _swap_pairs(m, n, offset, full):
    """Exchange bits (2j+offset, 2j+1+offset) cyclically."""
    even = 0
    for j in range(0, n, 2):
        even |= 1 << j
    odd = even << 1
    if offset:
        m = _rot_right(m, n, full)
    s = ((m & even) << 1) | ((m & odd) >> 1)
    if offset:
        s = _rot_left(s, n, full)
    return s


def scan_inscribed(n, a_offset, lengths):
    """Sweep every vertex subset of an ideal 2k-gon.

    Parameters
    ----------
    n : int
        Vertex count of the parent polygon (even, <= 30).
    a_offset : int
        0 when edge ``[d_0, d_1]`` is an A-side, 1 when it is a B-side.
    lengths : ndarray, shape (n, n)
        Truncated lengths ``|d_i d_j|`` at a fixed decoration.

    Returns
    -------
    masks, sides, margins : ndarrays
        Every alternating inscribed polygon (``sides`` is 0 for A, 1 for B)
        with its margin ``|P| - 2a(P)`` (resp. ``2b``).
    n_enumerated : int
        Number of inscribed polygons (subsets of size >= 3, parent excluded).
    n_shared : int
        Polygons having a vertex whose two edges are both interior.
    """
    full = (1 << n) - 1
    alt_masks = []
    alt_sides = []
    n_enum = 0
    n_shared = 0
    for start in range(1, full, _CHUNK):
        m = np.arange(start, min(start + _CHUNK, full), dtype=np.int64)
        big = _popcount(m) >= 3
        m = m[big]
        n_enum += m.size
        lonely = m & ~_rot_left(m, n, full) & ~_rot_right(m, n, full)
        n_shared += int(np.count_nonzero(lonely))
        for side, off in ((0, a_offset), (1, 1 - a_offset)):
            hit = m[_swap_pairs(m, n, off, full) == m]
            alt_masks.extend(hit.tolist())
            alt_sides.extend([side] * hit.size)
    margins = np.empty(len(alt_masks))
    for t, (mask, side) in enumerate(zip(alt_masks, alt_sides)):
        off = a_offset if side == 0 else 1 - a_offset
        margins[t] = mask_margin(mask, n, off, lengths)
    return (np.asarray(alt_masks, dtype=np.int64), np.asarray(alt_sides, dtype=np.int8),
            margins, n_enum, n_shared)


def mask_margin(mask, n, offset, lengths):
    """``|P| - 2 x(P)`` for the polygon on ``mask``; x-sides start at ``offset`` parity."""
    idx = [i for i in range(n) if mask >> i & 1]
    total = 0.0
    for p, q in zip(idx, idx[1:] + idx[:1]):
        ell = lengths[p, q]
        if (q - p) % n == 1 and (p - offset) % 2 == 0:
            total -= ell
        else:
            total += ell
    return total


# ---------------------------------------------------------------------------
# area functional


def assemble(u, tri, gx, gy, area, lam, weights, hessian=True):
    """Energy, nodal gradient and per-triangle Hessian blocks.

    The energy is ``sum_T |T| sum_q w_q lam_q sqrt(lam_q^2 + |grad u|^2)``.

    Returns
    -------
    energy : float
    grad : ndarray (N,)
    hess : ndarray (M, 3, 3) or None
    flux : ndarray (M, 2)
        Quadrature average of ``lam grad u / sqrt(lam^2 + |grad u|^2)``.
    """
    ut = u[tri]
    g0 = np.einsum("ij,ij->i", gx, ut)
    g1 = np.einsum("ij,ij->i", gy, ut)
    g2 = g0 * g0 + g1 * g1
    s = np.sqrt(lam * lam + g2[:, None])
    energy = float(np.sum(area * ((lam * s) @ weights)))
    k1 = (lam / s) @ weights
    flux = np.stack([k1 * g0, k1 * g1], axis=1)
    c = area * k1
    grad_t = c[:, None] * (g0[:, None] * gx + g1[:, None] * gy)
    grad = np.zeros(u.shape[0])
    np.add.at(grad, tri, grad_t)
    hess = None
    if hessian:
        k3 = (lam / s ** 3) @ weights
        d = area * k3
        px = g0[:, None] * gx + g1[:, None] * gy
        hess = (c[:, None, None] * (gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :])
                - d[:, None, None] * px[:, :, None] * px[:, None, :])
    return energy, grad, hess, flux
