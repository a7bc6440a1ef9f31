import numpy as np
import pytest

from omrkit import kernels
from omrkit.kernels import _numpy


def brute_erode_rows(bits, width, anchor):
    h, w = bits.shape
    out = np.zeros_like(bits)
    for y in range(h):
        for z in range(w):
            win = [z + d for d in range(-anchor, width - anchor)]
            out[y, z] = all(0 <= x < w and bits[y, x] for x in win)
    return out


def brute_dilate_rows(bits, width, anchor):
    h, w = bits.shape
    out = np.zeros_like(bits)
    for y in range(h):
        for z in range(w):
            src = [z - d for d in range(-anchor, width - anchor)]
            out[y, z] = any(0 <= x < w and bits[y, x] for x in src)
    return out


def bfs_labels(bits):
    h, w = bits.shape
    labels = np.zeros((h, w), dtype=np.int32)
    n = 0
    for y in range(h):
        for x in range(w):
            if bits[y, x] and not labels[y, x]:
                n += 1
                stack = [(y, x)]
                labels[y, x] = n
                while stack:
                    cy, cx = stack.pop()
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            yy, xx = cy + dy, cx + dx
                            if 0 <= yy < h and 0 <= xx < w and bits[yy, xx] and not labels[yy, xx]:
                                labels[yy, xx] = n
                                stack.append((yy, xx))
    return labels, n


@pytest.mark.parametrize("width", [1, 2, 3, 4, 7])
def test_row_morphology_matches_definition(backend, rng, width):
    for _ in range(30):
        bits = rng.random((5, 13)) < rng.uniform(0.2, 0.9)
        for anchor in {width // 2, 0, width - 1}:
            assert np.array_equal(backend.erode_rows(bits, width, anchor), brute_erode_rows(bits, width, anchor))
            assert np.array_equal(backend.dilate_rows(bits, width, anchor), brute_dilate_rows(bits, width, anchor))


def test_label8_matches_flood_fill(backend, rng):
    for _ in range(200):
        shape = tuple(rng.integers(1, 18, size=2))
        bits = rng.random(shape) < rng.uniform(0.05, 0.7)
        labels, n = backend.label8(bits)
        ref, n_ref = bfs_labels(bits)
        assert n == n_ref
        # flood fill in raster order also numbers components by first pixel
        assert np.array_equal(labels, ref)


def test_label8_empty(backend):
    labels, n = backend.label8(np.zeros((4, 4), bool))
    assert n == 0 and not labels.any()


def test_label8_many_components_grows_union_table(backend):
    bits = np.zeros((40, 40), bool)
    bits[::2, ::2] = True
    labels, n = backend.label8(bits)
    assert n == 400
    assert labels.max() == 400


def test_backends_agree_on_nms(rng):
    mods = kernels.backends()
    if len(mods) < 2:
        pytest.skip("numba not available")
    for _ in range(200):
        n = int(rng.integers(1, 30))
        xy = rng.uniform(0, 50, size=(n, 2))
        wh = rng.uniform(1, 30, size=(n, 2))
        boxes = np.hstack([xy, xy + wh])
        order = np.argsort(-rng.random(n), kind="stable")
        thr = float(rng.uniform(0.1, 0.9))
        max_out = int(rng.integers(1, n + 2))
        a = mods["numpy"].nms_sorted(boxes, order, thr, max_out)
        b = mods["numba"].nms_sorted(boxes, order, thr, max_out)
        assert np.array_equal(a, b)


def test_active_backend_is_reported():
    assert kernels.BACKEND in kernels.backends()
    assert kernels.label8 is kernels.backends()[kernels.BACKEND].label8


def test_env_flag_forces_numpy(monkeypatch):
    import importlib

    monkeypatch.setenv("OMRKIT_DISABLE_NUMBA", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "numpy"
        assert mod.label8 is _numpy.label8
    finally:
        monkeypatch.delenv("OMRKIT_DISABLE_NUMBA")
        importlib.reload(kernels)
