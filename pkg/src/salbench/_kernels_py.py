"""Pure numpy fallback with the same surface as the compiled ``_kernels``.

Forward convolution and bilinear resampling reproduce the compiled loop
order element for element, so forward results agree bitwise between the
two backends. Backward passes use ``tensordot``; they are deterministic
but may differ from the compiled backward in the last bits.
"""

import numpy as np


def conv2d_forward(x, w, b, stride, pad):
    n, c, h, wd = x.shape
    oc, _, kh, kw = w.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    y = np.zeros((n, oc, oh, ow))
    for ci in range(c):
        for ky in range(kh):
            for kx in range(kw):
                patch = xp[:, ci, ky : ky + stride * (oh - 1) + 1 : stride, kx : kx + stride * (ow - 1) + 1 : stride]
                y += w[:, ci, ky, kx][None, :, None, None] * patch[:, None]
    y += b[None, :, None, None]
    return y


def conv2d_backward(x, w, dy, stride, pad, need_dx=True):
    """``(dx, dw, db)``; with ``need_dx`` false, ``dx`` is left as zeros."""
    n, c, h, wd = x.shape
    oc, _, kh, kw = w.shape
    oh, ow = dy.shape[2], dy.shape[3]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    db = dy.sum(axis=(0, 2, 3))
    for ky in range(kh):
        for kx in range(kw):
            ys = slice(ky, ky + stride * (oh - 1) + 1, stride)
            xs = slice(kx, kx + stride * (ow - 1) + 1, stride)
            dw[:, :, ky, kx] = np.tensordot(dy, xp[:, :, ys, xs], axes=([0, 2, 3], [0, 2, 3]))
            if need_dx:
                dxp[:, :, ys, xs] += np.einsum("oc,nohw->nchw", w[:, :, ky, kx], dy)
    dx = dxp[:, :, pad : pad + h, pad : pad + wd] if pad else dxp
    return np.ascontiguousarray(dx), dw, db


def maxpool2_forward(x):
    n, c, h, wd = x.shape
    # window taps in row-major order; argmax keeps the first maximum
    taps = np.stack([x[:, :, dy::2, dx::2] for dy in (0, 1) for dx in (0, 1)])
    k = np.argmax(taps, axis=0)
    y = np.take_along_axis(taps, k[None], axis=0)[0]
    oy = np.arange(h // 2)[:, None]
    ox = np.arange(wd // 2)[None, :]
    idx = (2 * oy + k // 2) * wd + 2 * ox + k % 2
    return np.ascontiguousarray(y), idx.astype(np.int64)


def _src_coords(insize, outsize):
    d = np.arange(outsize, dtype=np.float64)
    s = (d + 0.5) * (insize / outsize) - 0.5
    s = np.clip(s, 0.0, insize - 1)
    i0 = np.floor(s).astype(np.intp)
    i1 = np.minimum(i0 + 1, insize - 1)
    return i0, i1, s - i0


def upsample_bilinear_forward(x, oh, ow):
    h, wd = x.shape[2], x.shape[3]
    y0, y1, ly = _src_coords(h, oh)
    x0, x1, lx = _src_coords(wd, ow)
    a = x[:, :, y0][:, :, :, x0]
    top = a + lx * (x[:, :, y0][:, :, :, x1] - a)
    b = x[:, :, y1][:, :, :, x0]
    bot = b + lx * (x[:, :, y1][:, :, :, x1] - b)
    return top + ly[:, None] * (bot - top)


def upsample_bilinear_backward(dy, h, wd):
    n, c, oh, ow = dy.shape
    y0, y1, ly = _src_coords(h, oh)
    x0, x1, lx = _src_coords(wd, ow)
    # separable adjoint: columns then rows, each as a dense interpolation matrix
    cols = np.zeros((ow, wd))
    np.add.at(cols, (np.arange(ow), x0), 1.0 - lx)
    np.add.at(cols, (np.arange(ow), x1), lx)
    rows = np.zeros((oh, h))
    np.add.at(rows, (np.arange(oh), y0), 1.0 - ly)
    np.add.at(rows, (np.arange(oh), y1), ly)
    return np.ascontiguousarray(np.einsum("ph,ncpq,qw->nchw", rows, dy, cols))
