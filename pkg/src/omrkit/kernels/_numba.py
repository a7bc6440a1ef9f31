"""numba-compiled kernels; same contracts as :mod:`omrkit.kernels._numpy`."""
import numpy as np
from numba import njit


@njit(cache=True)
def _erode_rows(bits, width, anchor, out):
    h, w = bits.shape
    for y in range(h):
        run = 0
        for x in range(w):
            if bits[y, x]:
                run += 1
            else:
                run = 0
            z = x - (width - 1 - anchor)
            if z >= 0 and run >= width:
                out[y, z] = True


def erode_rows(bits, width, anchor):
    out = np.zeros(bits.shape, dtype=np.bool_)
    _erode_rows(np.ascontiguousarray(bits, dtype=np.bool_), width, anchor, out)
    return out


@njit(cache=True)
def _dilate_rows(bits, width, anchor, out):
    h, w = bits.shape
    left = width - 1 - anchor
    for y in range(h):
        last = -(1 << 30)
        # last foreground column at or right of x - left, scanning a window ahead
        for x in range(w + anchor):
            if x < w and bits[y, x]:
                last = x
            z = x - anchor
            if 0 <= z < w and last >= z - left:
                out[y, z] = True


def dilate_rows(bits, width, anchor):
    out = np.zeros(bits.shape, dtype=np.bool_)
    _dilate_rows(np.ascontiguousarray(bits, dtype=np.bool_), width, anchor, out)
    return out


@njit(cache=True)
def _root(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True)
def _union(parent, a, b):
    ra = _root(parent, a)
    rb = _root(parent, b)
    if ra < rb:
        parent[rb] = ra
    elif rb < ra:
        parent[ra] = rb


@njit(cache=True)
def _label8(bits, labels):
    h, w = bits.shape
    parent = np.zeros(h * w // 2 + 2, dtype=np.int32)
    nxt = 1
    for y in range(h):
        for x in range(w):
            if not bits[y, x]:
                continue
            cur = 0
            if x > 0 and labels[y, x - 1]:
                cur = labels[y, x - 1]
            if y > 0:
                for dx in (-1, 0, 1):
                    xx = x + dx
                    if 0 <= xx < w and labels[y - 1, xx]:
                        n = labels[y - 1, xx]
                        if cur == 0:
                            cur = n
                        else:
                            _union(parent, cur, n)
            if cur == 0:
                if nxt >= parent.shape[0]:
                    grown = np.zeros(parent.shape[0] * 2, dtype=np.int32)
                    grown[: parent.shape[0]] = parent
                    parent = grown
                parent[nxt] = nxt
                cur = nxt
                nxt += 1
            labels[y, x] = cur
    # roots are the smallest provisional label in each set, which is also the
    # label of the set's first raster pixel, so compact ids follow raster order
    compact = np.zeros(nxt, dtype=np.int32)
    count = 0
    for i in range(1, nxt):
        r = _root(parent, i)
        if r == i:
            count += 1
            compact[i] = count
    for y in range(h):
        for x in range(w):
            if labels[y, x]:
                labels[y, x] = compact[_root(parent, labels[y, x])]
    return count


def label8(bits):
    labels = np.zeros(bits.shape, dtype=np.int32)
    n = _label8(np.ascontiguousarray(bits, dtype=np.bool_), labels)
    return labels, int(n)


@njit(cache=True)
def _nms_sorted(boxes, order, thr, max_out, keep):
    n = order.shape[0]
    dead = np.zeros(boxes.shape[0], dtype=np.bool_)
    k = 0
    for a in range(n):
        i = order[a]
        if dead[i]:
            continue
        keep[k] = i
        k += 1
        if k >= max_out:
            break
        ai = (boxes[i, 2] - boxes[i, 0]) * (boxes[i, 3] - boxes[i, 1])
        for b in range(a + 1, n):
            j = order[b]
            if dead[j]:
                continue
            ix = min(boxes[i, 2], boxes[j, 2]) - max(boxes[i, 0], boxes[j, 0])
            iy = min(boxes[i, 3], boxes[j, 3]) - max(boxes[i, 1], boxes[j, 1])
            inter = max(ix, 0.0) * max(iy, 0.0)
            aj = (boxes[j, 2] - boxes[j, 0]) * (boxes[j, 3] - boxes[j, 1])
            union = ai + aj - inter
            iou = inter / union if union > 0 else 0.0
            if iou > thr:
                dead[j] = True
    return k


def nms_sorted(boxes, order, iou_threshold, max_out):
    order = np.ascontiguousarray(order, dtype=np.int64)
    keep = np.zeros(max(min(max_out, order.shape[0]), 0), dtype=np.int64)
    if keep.shape[0] == 0:
        return keep
    k = _nms_sorted(np.ascontiguousarray(boxes, dtype=np.float64), order,
                    float(iou_threshold), int(max_out), keep)
    return keep[:k]
