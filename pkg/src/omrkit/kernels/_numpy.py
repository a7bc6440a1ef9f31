"""Pure-numpy kernels.  Reference path and fallback when numba is absent."""
import numpy as np


def _row_prefix(bits):
    h, w = bits.shape
    c = np.zeros((h, w + 1), dtype=np.int64)
    np.cumsum(bits, axis=1, out=c[:, 1:])
    return c


def erode_rows(bits, width, anchor):
    """1-D erosion along axis 1 by a run of ``width`` ones anchored at ``anchor``.

    Out-of-image neighbours count as background.
    """
    h, w = bits.shape
    c = _row_prefix(bits)
    z = np.arange(w)
    lo = z - anchor
    hi = z + width - anchor
    ok = (lo >= 0) & (hi <= w)
    lo_c = np.clip(lo, 0, w)
    hi_c = np.clip(hi, 0, w)
    count = c[:, hi_c] - c[:, lo_c]
    return (count == width) & ok[None, :]


def dilate_rows(bits, width, anchor):
    """1-D dilation along axis 1; reflection-consistent with :func:`erode_rows`."""
    h, w = bits.shape
    c = _row_prefix(bits)
    z = np.arange(w)
    lo_c = np.clip(z - (width - 1 - anchor), 0, w)
    hi_c = np.clip(z + anchor + 1, 0, w)
    return (c[:, hi_c] - c[:, lo_c]) > 0


def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        parent[i], i = root, parent[i]
    return root


def label8(bits):
    """8-connected labelling.  Labels are 1..n in raster order of first pixel.

    Works on horizontal runs rather than pixels, so the Python-level loop
    is proportional to the number of runs.
    """
    h, w = bits.shape
    labels = np.zeros((h, w), dtype=np.int32)
    if not bits.any():
        return labels, 0
    b = np.zeros((h, w + 2), dtype=np.int8)
    b[:, 1:-1] = bits
    d = np.diff(b, axis=1)
    rows, starts = np.nonzero(d == 1)
    _, ends = np.nonzero(d == -1)
    n_runs = len(rows)
    row_first = np.searchsorted(rows, np.arange(h + 1))

    parent = list(range(n_runs))
    for y in range(1, h):
        a0, a1 = row_first[y - 1], row_first[y]
        b1 = row_first[y + 1]
        if a0 == a1 or a1 == b1:
            continue
        prev_s = starts[a0:a1]
        prev_e = ends[a0:a1]
        for k in range(a1, b1):
            s, e = starts[k], ends[k]
            # previous-row runs with prev_e >= s and prev_s <= e touch under 8-connectivity
            j0 = np.searchsorted(prev_e, s, side="left")
            j1 = np.searchsorted(prev_s, e, side="right")
            for j in range(j0, j1):
                ra = _find(parent, a0 + j)
                rb = _find(parent, k)
                if ra != rb:
                    if ra < rb:
                        parent[rb] = ra
                    else:
                        parent[ra] = rb

    roots = np.fromiter((_find(parent, i) for i in range(n_runs)), dtype=np.int64, count=n_runs)
    uniq, comp = np.unique(roots, return_inverse=True)
    lens = ends - starts
    before = np.cumsum(lens) - lens
    flat = np.repeat(rows * w + starts - before, lens) + np.arange(lens.sum())
    labels.ravel()[flat] = np.repeat(comp + 1, lens).astype(np.int32)
    return labels, len(uniq)


def _iou_one_to_many(box, others):
    ix = np.minimum(box[2], others[:, 2]) - np.maximum(box[0], others[:, 0])
    iy = np.minimum(box[3], others[:, 3]) - np.maximum(box[1], others[:, 1])
    inter = np.maximum(ix, 0.0) * np.maximum(iy, 0.0)
    a = (box[2] - box[0]) * (box[3] - box[1])
    b = (others[:, 2] - others[:, 0]) * (others[:, 3] - others[:, 1])
    union = a + b - inter
    out = np.zeros(len(others))
    np.divide(inter, union, out=out, where=union > 0)
    return out


def nms_sorted(boxes, order, iou_threshold, max_out):
    """Greedy suppression over ``boxes`` visited in ``order``; returns kept indices."""
    keep = []
    remaining = np.asarray(order, dtype=np.int64)
    while remaining.size and len(keep) < max_out:
        i = remaining[0]
        keep.append(i)
        rest = remaining[1:]
        if rest.size == 0:
            break
        iou = _iou_one_to_many(boxes[i], boxes[rest])
        remaining = rest[iou <= iou_threshold]
    return np.asarray(keep, dtype=np.int64)
