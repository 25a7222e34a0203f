"""Raster kernels with a numba path and a numpy path.

Each kernel exists as ``<name>_numba`` and ``<name>_numpy``; the module-level
``<name>_kernel`` alias points at whichever :mod:`grapecount._accel` selected.
Arithmetic is written in the same order in both versions so the outputs agree
bit for bit.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit


@njit
def register_depth_numba(depth, kd, kc, width_c, height_c, rot, trans):
    """Reproject a depth raster into another camera's pixel grid.

    ``kd``/``kc`` are ``(fx, fy, cx, cy)`` arrays. Returns the registered
    raster (0.0 where nothing landed) and the number of valid source pixels
    that fell behind the target camera or outside its raster.
    """
    out = np.zeros((height_c, width_c), dtype=np.float64)
    dropped = 0
    fxd, fyd, cxd, cyd = kd[0], kd[1], kd[2], kd[3]
    fxc, fyc, cxc, cyc = kc[0], kc[1], kc[2], kc[3]
    h, w = depth.shape
    for v in range(h):
        for u in range(w):
            d = depth[v, u]
            if d <= 0.0:
                continue
            x = (u - cxd) * d / fxd
            y = (v - cyd) * d / fyd
            px = rot[0, 0] * x + rot[0, 1] * y + rot[0, 2] * d + trans[0]
            py = rot[1, 0] * x + rot[1, 1] * y + rot[1, 2] * d + trans[1]
            pz = rot[2, 0] * x + rot[2, 1] * y + rot[2, 2] * d + trans[2]
            if pz <= 0.0:
                dropped += 1
                continue
            iu = math.floor(fxc * px / pz + cxc + 0.5)
            iv = math.floor(fyc * py / pz + cyc + 0.5)
            if iu < 0 or iu >= width_c or iv < 0 or iv >= height_c:
                dropped += 1
                continue
            cur = out[iv, iu]
            if cur == 0.0 or pz < cur:
                out[iv, iu] = pz
    return out, dropped


def register_depth_numpy(depth, kd, kc, width_c, height_c, rot, trans):
    h, w = depth.shape
    vv, uu = np.nonzero(depth > 0.0)
    d = depth[vv, uu]
    x = (uu - kd[2]) * d / kd[0]
    y = (vv - kd[3]) * d / kd[1]
    px = rot[0, 0] * x + rot[0, 1] * y + rot[0, 2] * d + trans[0]
    py = rot[1, 0] * x + rot[1, 1] * y + rot[1, 2] * d + trans[1]
    pz = rot[2, 0] * x + rot[2, 1] * y + rot[2, 2] * d + trans[2]
    front = pz > 0.0
    dropped = int(np.count_nonzero(~front))
    px, py, pz = px[front], py[front], pz[front]
    iu = np.floor(kc[0] * px / pz + kc[2] + 0.5)
    iv = np.floor(kc[1] * py / pz + kc[3] + 0.5)
    inside = (iu >= 0) & (iu < width_c) & (iv >= 0) & (iv < height_c)
    dropped += int(np.count_nonzero(~inside))
    flat = iv[inside].astype(np.int64) * width_c + iu[inside].astype(np.int64)
    buf = np.full(height_c * width_c, np.inf)
    np.minimum.at(buf, flat, pz[inside])
    buf[np.isinf(buf)] = 0.0
    return buf.reshape(height_c, width_c), dropped


@njit
def paint_discs_numba(zbuf, label, us, vs, radii, zs, ids):
    """Z-buffer filled discs into ``zbuf`` in place; ``label`` gets ``ids[disc]``."""
    h, w = zbuf.shape
    for i in range(us.shape[0]):
        uc, vc, r, z = us[i], vs[i], radii[i], zs[i]
        r2 = r * r
        v0 = max(0, math.ceil(vc - r))
        v1 = min(h - 1, math.floor(vc + r))
        u0 = max(0, math.ceil(uc - r))
        u1 = min(w - 1, math.floor(uc + r))
        for v in range(v0, v1 + 1):
            dv = v - vc
            for u in range(u0, u1 + 1):
                du = u - uc
                if du * du + dv * dv <= r2 and z < zbuf[v, u]:
                    zbuf[v, u] = z
                    label[v, u] = ids[i]


def paint_discs_numpy(zbuf, label, us, vs, radii, zs, ids):
    h, w = zbuf.shape
    for i in range(us.shape[0]):
        uc, vc, r, z = us[i], vs[i], radii[i], zs[i]
        v0 = max(0, math.ceil(vc - r))
        v1 = min(h - 1, math.floor(vc + r))
        u0 = max(0, math.ceil(uc - r))
        u1 = min(w - 1, math.floor(uc + r))
        if v1 < v0 or u1 < u0:
            continue
        dv = np.arange(v0, v1 + 1)[:, None] - vc
        du = np.arange(u0, u1 + 1)[None, :] - uc
        sub = zbuf[v0 : v1 + 1, u0 : u1 + 1]
        hit = (du * du + dv * dv <= r * r) & (z < sub)
        sub[hit] = z
        label[v0 : v1 + 1, u0 : u1 + 1][hit] = ids[i]


if USE_NUMBA:
    register_depth_kernel = register_depth_numba
    paint_discs_kernel = paint_discs_numba
else:
    register_depth_kernel = register_depth_numpy
    paint_discs_kernel = paint_discs_numpy
