"""Acceptance suite: one test per criterion, each timed against its budget.

Run alone with ``pytest tests/test_acceptance.py``; the terminal summary
prints one PASS/FAIL line per criterion.
"""
import itertools
import json
import math
import os
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from omrkit import detkit, imaging, staffdet
from omrkit.detkit import AnchorConfig, LossComponents, LossInputs
from omrkit.evaluation import EvalConfig, average_precision, evaluate
from omrkit.imaging import StructuringElement
from omrkit.ingest import SynthParams, gt_as_detections, parse_annotation_xml, synth_score
from omrkit.pitch import DetectedSymbol, position_to_pitch, staff_position
from omrkit.geometry import BBox
from omrkit.staffdet import StaffSystem

from oracles import clef_table, nms_oracle, otsu_variances, pairwise_iou, random_boxes

FIX = Path(__file__).parent / "fixtures"
SEED = 20240611


def random_gray(rng):
    kind = rng.integers(4)
    if kind == 0:
        return rng.integers(0, 256, (64, 64), dtype=np.uint8)
    if kind == 1:  # bimodal
        a = rng.normal(rng.uniform(20, 100), rng.uniform(2, 30), (64, 64))
        b = rng.normal(rng.uniform(150, 240), rng.uniform(2, 30), (64, 64))
        return np.clip(np.where(rng.random((64, 64)) < rng.random(), a, b), 0, 255).astype(np.uint8)
    if kind == 2:  # few levels, many exact ties
        levels = rng.choice(256, int(rng.integers(1, 5)), replace=False)
        return levels[rng.integers(0, len(levels), (64, 64))].astype(np.uint8)
    return np.clip(rng.normal(128, rng.uniform(1, 60), (64, 64)), 0, 255).astype(np.uint8)


def test_c01_otsu_oracle(criterion):
    rng = np.random.default_rng(SEED)
    with criterion("C1", "Otsu equals exhaustive maximum", 5.0):
        for _ in range(200):
            img = random_gray(rng)
            var = otsu_variances(img)
            t = imaging.otsu_threshold(img)
            assert var[t] == max(var)
            if img.min() != img.max():  # a constant page returns its own level instead
                assert t == var.index(max(var))  # smallest maximiser


def random_bits(rng):
    h, w = (int(v) for v in rng.integers(4, 40, 2))
    return rng.random((h, w)) < rng.uniform(0.2, 0.9)


def test_c02_morphology_laws(criterion):
    rng = np.random.default_rng(SEED)
    with criterion("C2", "morphology laws on 500 images", 10.0):
        for _ in range(500):
            x = random_bits(rng)
            se = StructuringElement(int(rng.integers(1, 8)), int(rng.integers(1, 5)))
            er, di = imaging.erode(x, se), imaging.dilate(x, se)
            assert not np.any(er & ~x)  # anti-extensive
            assert not np.any(x & ~di)  # extensive
            op = imaging.morph(x, se, "open")
            assert np.array_equal(imaging.morph(op, se, "open"), op)
            cl = imaging.morph(x, se, "close")
            assert np.array_equal(imaging.morph(cl, se, "close"), cl)
            # duality, where the window never leaves the image
            lhs, rhs = ~er, imaging.dilate(~x, se.reflected())
            ax, ay = se.anchor
            h, w = x.shape
            inner = (slice(ay, h - (se.height - 1 - ay)), slice(ax, w - (se.width - 1 - ax)))
            assert np.array_equal(lhs[inner], rhs[inner])
            # everywhere, once the complement's outside is foreground (the mirrored border rule)
            pad = ((se.height, se.height), (se.width, se.width))
            full = imaging.dilate(np.pad(~x, pad, constant_values=True), se.reflected())
            assert np.array_equal(lhs, full[se.height:se.height + h, se.width:se.width + w])


ENVELOPE = list(itertools.product((8, 16, 24, 32, 40), (1, 2, 3, 4), (-2.0, -1.0, 0.0, 1.0, 2.0), (0.5, 1.0)))


def _envelope_pages():
    for k, (s, t, r, c) in enumerate(ENVELOPE):
        p = SynthParams(staves=2, spacing=s, thickness=t, rotation=r, contrast=c, decoys=6, seed=k)
        yield p, synth_score(p)


def test_c03_staff_envelope(criterion):
    assert len(ENVELOPE) >= 100
    failures = []
    with criterion("C3", f"staff envelope ({len(ENVELOPE)} configs)", 60.0):
        for p, page in _envelope_pages():
            line_set, staves = staffdet.detect_staff(page.image)
            truth = sorted(y for ys in page.line_centers for y in ys)
            found = sorted(ln.y_center for ln in line_set.staff_lines)
            tag = f"s={p.spacing} t={p.thickness} r={p.rotation} c={p.contrast}"
            # one detected line per true line, each within thickness + 1
            if len(found) != len(truth):
                failures.append(f"{tag}: {len(found)} lines for {len(truth)}")
                continue
            err = max(abs(a - b) for a, b in zip(found, truth))
            if err > p.thickness + 1:
                failures.append(f"{tag}: centre error {err:.2f}")
            for ln in line_set.staff_lines:
                for b in page.decoys:
                    inside = (ln.contour.xs >= b.x_min) & (ln.contour.xs < b.x_max) & \
                             (ln.contour.ys >= b.y_min) & (ln.contour.ys < b.y_max)
                    if inside.any():
                        failures.append(f"{tag}: decoy at {tuple(b)} taken as staff line")
        assert not failures, "; ".join(failures[:5])


def test_c04_stave_grouping(criterion):
    rng = np.random.default_rng(SEED)
    with criterion("C4", "stave grouping and partition", 60.0):
        pages = [page for _, page in _envelope_pages()][::4]
        for k in range(10):  # noisier pages with more decoys
            pages.append(synth_score(SynthParams(staves=int(rng.integers(1, 4)), spacing=int(rng.integers(8, 20)),
                                                 noise=0.002, decoys=12, seed=100 + k)))
        for page in pages:
            gray = imaging.as_gray(page.image)
            line_set, staves = staffdet.detect_staff(gray)
            for st in staves:
                assert len(st.lines) == 5
                gaps = np.diff(st.line_ys)
                med = float(np.median(gaps))
                assert np.max(np.abs(gaps - med)) <= 0.2 * med + 1e-9
            # staff and non-staff contours tile the opened page exactly
            params = staffdet.StaffDetectParams()
            opened = imaging.extract_horizontal_lines(staffdet.binarize_page(gray, params),
                                                      params.kernel_width(gray.shape[1]))
            owner = np.zeros(opened.shape, dtype=np.int64)
            for c in [ln.contour for ln in line_set.staff_lines] + list(line_set.non_staff):
                owner[c.ys, c.xs] += 1
            assert owner.max() <= 1
            assert np.array_equal(owner == 1, opened)


def test_c05_pitch_oracle(criterion):
    rng = np.random.default_rng(SEED)
    with criterion("C5", "clef tables, octave law, translation", 5.0):
        for clef in ("treble", "bass", "alto"):
            table = clef_table(clef)
            for pos in range(-14, 22):
                assert position_to_pitch(pos, clef) == table[pos]
                a, b = position_to_pitch(pos, clef), position_to_pitch(pos + 7, clef)
                assert b == a[0] + str(int(a[1:]) + 1)
        staff = StaffSystem.from_line_ys([100.0 + 12 * k for k in range(5)])
        syms = [DetectedSymbol("noteheadBlack", 1.0, BBox(0, y - 5, 12, y + 5)) for y in rng.uniform(50, 200, 40)]
        base = [staff_position(s, staff) for s in syms]
        for dy in rng.uniform(-400, 400, 100):
            moved = StaffSystem.from_line_ys([y + dy for y in staff.line_ys])
            shifted = [DetectedSymbol(s.category, 1.0, BBox(0, s.bbox.y_min + dy, 12, s.bbox.y_max + dy)) for s in syms]
            assert [staff_position(s, moved) for s in shifted] == base


def test_c06_nms_oracle(criterion):
    rng = np.random.default_rng(SEED)
    with criterion("C6", "NMS equals subset oracle (1000 cases)", 30.0):
        for _ in range(1000):
            n = int(rng.integers(1, 13))
            boxes = random_boxes(rng, n)
            scores = rng.random(n) if rng.random() < 0.8 else rng.choice([0.2, 0.6], n)
            thr = float(rng.choice([0.3, 0.5, 0.7]))
            kept = list(detkit.nms(boxes, scores, thr))
            assert kept == nms_oracle(boxes, scores, thr)
            iou = pairwise_iou(boxes[kept])
            assert np.all(iou[~np.eye(len(kept), dtype=bool)] <= thr)


def test_c07_deltas_and_anchors(criterion):
    rng = np.random.default_rng(SEED)
    with criterion("C7", "delta round trip, anchor laws", 5.0):
        anchors, boxes = random_boxes(rng, 1000, 800), random_boxes(rng, 1000, 800)
        back = detkit.decode_deltas(detkit.encode_deltas(boxes, anchors), anchors)
        assert np.max(np.abs(back - boxes)) <= 1e-6
        for _ in range(20):
            scales = tuple(float(v) for v in rng.uniform(8, 512, int(rng.integers(1, 6))))
            ratios = tuple(float(v) for v in rng.uniform(0.25, 4, int(rng.integers(1, 4))))
            grid = (int(rng.integers(1, 8)), int(rng.integers(1, 8)))
            a = detkit.generate_anchors(AnchorConfig(scales, ratios, float(rng.uniform(1, 32)), grid))
            assert len(a) == grid[0] * grid[1] * len(scales) * len(ratios)
            ratio = ((a[:, 2] - a[:, 0]) / (a[:, 3] - a[:, 1])).reshape(-1, len(ratios))
            assert np.all(np.abs(ratio - np.array(ratios)) <= 1e-9)


def test_c08_losses(criterion):
    rng = np.random.default_rng(SEED)
    with criterion("C8", "loss formulas", 5.0):
        out = detkit.faster_rcnn_loss(LossInputs([0.5, 0.5], [1, 0], np.zeros((2, 4)), np.zeros((2, 4)), n_cls=2))
        assert abs(out.cls - math.log(2)) <= 1e-9
        for _ in range(100):
            n = int(rng.integers(1, 50))
            neg = detkit.faster_rcnn_loss(LossInputs(
                rng.random(n), np.zeros(n), rng.normal(0, 5, (n, 4)), rng.normal(0, 5, (n, 4)),
                n_cls=n, n_reg=float(rng.integers(1, 100)), lam=float(rng.uniform(0.1, 20))))
            assert neg.reg == 0.0
            vals = [float(v) for v in rng.random(5) * 10.0 ** rng.integers(-6, 6, 5)]
            total = detkit.mask_rcnn_total_loss(LossComponents(*vals))
            assert total == float(sum(Fraction(v) for v in vals))


def _fixture_pages():
    pages = [parse_annotation_xml((FIX / "doremi_page.xml").read_text()),
             parse_annotation_xml((FIX / "muscima_page.xml").read_text(), "muscima"),
             parse_annotation_xml((FIX / "toy_gt.xml").read_text())]
    return pages


def test_c09_evaluator(criterion):
    with criterion("C9", "AP fixture and self-consistency", 5.0):
        assert abs(average_precision([True, False, True], 2) - 5 / 6) <= 1e-9
        for page in _fixture_pages():
            for kind in ("box", "mask"):
                rep = evaluate([(page.page_id, gt_as_detections(page))], [page], EvalConfig(iou_kind=kind))
                assert f"{rep.mAP:.4f}" == "1.0000"
                assert rep.totals["fp"] == 0 and rep.totals["fn"] == 0


def _cli(args, cwd):
    env = dict(os.environ, PYTHONHASHSEED="0")
    proc = subprocess.run([sys.executable, "-m", "omrkit", *args], cwd=cwd, env=env,
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


def _golden_run(workdir):
    workdir.mkdir()
    _cli(["synth", "--staves", "2", "--seed", "7", "--out", "seed7.png"], workdir)
    _cli(["staff", "seed7.png", "--out", "staff.json"], workdir)
    _cli(["pitch", "--staff", "staff.json", "--detections", str(FIX / "middle_line_notehead.json"),
          "--out", "semantic.json"], workdir)
    return {n: (workdir / n).read_bytes().replace(b"\r\n", b"\n") for n in ("staff.json", "semantic.json")}


def test_c10_cli_golden(criterion, tmp_path):
    with criterion("C10", "CLI golden run, seed 7", 60.0):
        first, second = _golden_run(tmp_path / "a"), _golden_run(tmp_path / "b")
        assert first == second
        for name, data in first.items():
            golden = (FIX / "golden" / name).read_bytes().replace(b"\r\n", b"\n")
            assert data == golden, f"{name} differs from the golden copy"
        sem = json.loads(first["semantic.json"])
        (sym,) = sem["staves"][0]["symbols"]
        assert sym["pitch"] == "B4"
