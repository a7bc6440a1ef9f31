"""Independent reference implementations the tests compare against."""
from fractions import Fraction

import numpy as np

# standard clef ladders from the bottom staff line upward, and downward below it
_UP = {
    "treble": ["E4", "F4", "G4", "A4", "B4", "C5", "D5", "E5", "F5"],
    "bass": ["G2", "A2", "B2", "C3", "D3", "E3", "F3", "G3", "A3"],
    "alto": ["F3", "G3", "A3", "B3", "C4", "D4", "E4", "F4", "G4"],
}
_DOWN = {
    "treble": ["D4", "C4", "B3", "A3", "G3", "F3", "E3"],
    "bass": ["F2", "E2", "D2", "C2", "B1", "A1", "G1"],
    "alto": ["E3", "D3", "C3", "B2", "A2", "G2", "F2"],
}


def clef_table(clef, lo=-14, hi=21):
    """position -> note name for lo..hi, the written ladders extended by whole octaves."""
    table = dict(enumerate(_UP[clef]))
    table.update({-(k + 1): n for k, n in enumerate(_DOWN[clef])})
    for p in range(lo, hi + 1):
        if p in table:
            continue
        step = -7 if p > 0 else 7
        ref = p + step
        while ref not in table:
            ref += step
        name = table[ref]
        table[p] = name[0] + str(int(name[1:]) + (p - ref) // 7)
    return table


def otsu_variances(img):
    """Exact between-class variance for every threshold 0..255, from the histogram."""
    hist = np.bincount(np.asarray(img, dtype=np.int64).ravel(), minlength=256).tolist()
    n = sum(hist)
    total = sum(v * c for v, c in enumerate(hist))
    out = []
    n0 = s0 = 0
    for t in range(256):
        n0 += hist[t]
        s0 += t * hist[t]
        n1, s1 = n - n0, total - s0
        if n0 == 0 or n1 == 0:
            out.append(Fraction(0))
        else:
            out.append(Fraction(n0 * n1, n * n) * (Fraction(s0, n0) - Fraction(s1, n1)) ** 2)
    return out


def pairwise_iou(b):
    x0 = np.maximum(b[:, None, 0], b[None, :, 0])
    y0 = np.maximum(b[:, None, 1], b[None, :, 1])
    x1 = np.minimum(b[:, None, 2], b[None, :, 2])
    y1 = np.minimum(b[:, None, 3], b[None, :, 3])
    inter = np.clip(x1 - x0, 0, None) * np.clip(y1 - y0, 0, None)
    area = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    return inter / (area[:, None] + area[None, :] - inter)


def nms_oracle(boxes, scores, thr):
    """Greedy NMS characterised as the unique subset S of the score-ordered boxes where
    each box is in S exactly when no earlier member of S overlaps it above thr.
    Found by enumerating all subsets."""
    n = len(boxes)
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    iou = pairwise_iou(np.asarray(boxes, dtype=np.float64)[order])
    earlier = np.triu(iou > thr, k=1).astype(np.int64)  # earlier[j, i]: j precedes and overlaps i
    members = ((np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int64)
    suppressed = (members @ earlier) > 0
    (hits,) = np.nonzero(np.all(members.astype(bool) == ~suppressed, axis=1))
    assert len(hits) == 1
    return [order[k] for k in range(n) if members[hits[0], k]]


def random_boxes(rng, n, span=60.0):
    xy = rng.uniform(0, span, (n, 2))
    wh = rng.uniform(2, span / 2, (n, 2))
    return np.hstack([xy, xy + wh])


def ap_oracle(flags, n_gt):
    """Exact all-point AP: each recall step times the best precision at or beyond it."""
    tp = fp = 0
    points = []
    for f in flags:
        tp += bool(f)
        fp += not f
        points.append((Fraction(tp, n_gt), Fraction(tp, tp + fp)))
    total, prev = Fraction(0), Fraction(0)
    for r, _ in points:
        if r > prev:
            total += (r - prev) * max(p for rr, p in points if rr >= r)
            prev = r
    return total
