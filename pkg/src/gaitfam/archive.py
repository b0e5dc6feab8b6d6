"""Persistence and export of gait families.

Archives are plain JSON with full-precision floats (shortest round-trip
representation, so serialize/load reproduces every value bit-exactly) and no
volatile content, making repeated runs byte-identical.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from . import hybrid, models
from .continuation import GaitFamily, GaitRecord, SingularEG
from .dynamics import HybridModel
from .errors import InputError

SCHEMA_VERSION = 1
SUPPORTED_SCHEMAS = (1,)


# ---------------------------------------------------------------------------
# serialization


def _seed_dict(s: SingularEG) -> dict:
    return {
        "tau": s.indicator_root,
        "x0": s.point.x0.vector.tolist(),
        "mu": s.point.mu.tolist(),
        "indicator_value": s.indicator_value,
        "null_dim": s.null_dim,
        "tangent": None if s.tangent is None else s.tangent.tolist(),
        "trace_direction": (None if s.trace_direction is None
                            else s.trace_direction.tolist()),
    }


def _gait_dict(g: GaitRecord) -> dict:
    return {
        "x0": g.x0.tolist(),
        "tau": g.tau,
        "mu": g.mu.tolist(),
        "residual": g.residual,
        "slope": g.slope,
        "step_length": g.step_length,
        "push_pull": g.push_pull,
    }


def family_to_dict(family: GaitFamily) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "model": family.model_params,
        "scan": {
            "interval": list(family.scan_interval),
            "steps": family.scan_steps,
            "samples": [[t, v] for t, v in family.scan_samples],
        },
        "seeds": [_seed_dict(s) for s in family.seeds],
        "branches": [
            {
                "seed_index": b.seed_index,
                "sign": b.sign,
                "map": b.map_kind,
                "status": b.status,
                "message": b.message,
                "gaits": [_gait_dict(g) for g in b.gaits],
            }
            for b in family.branches
        ],
        "queries": [],
    }
    if family.diagnostic is not None:
        doc["diagnostic"] = {
            "classification": family.diagnostic.classification,
            "remediation": family.diagnostic.remediation,
        }
    return doc


def save_archive(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_archive(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read archive {path}: {exc}") from exc
    version = doc.get("schema_version")
    if version not in SUPPORTED_SCHEMAS:
        raise InputError(f"unsupported archive schema {version!r}")
    return doc


def model_from_archive(doc: dict) -> HybridModel:
    return models.from_config_dict(doc["model"])


def iter_gaits(doc: dict):
    for bi, branch in enumerate(doc.get("branches", [])):
        for gi, g in enumerate(branch.get("gaits", [])):
            yield bi, gi, g


# ---------------------------------------------------------------------------
# audit


def audit_archive(doc: dict, rtol: float = hybrid.RTOL_DEFAULT,
                  atol: float = hybrid.ATOL_DEFAULT,
                  residual_limit: float = 1e-8,
                  mismatch_limit: float = 1e-12) -> dict:
    """Re-evaluate the periodicity residual of every stored gait and compare
    with the stored norms."""
    model = model_from_archive(doc)
    worst_residual = 0.0
    worst_mismatch = 0.0
    count = 0
    for _, _, g in iter_gaits(doc):
        c = hybrid.point_for(model, np.asarray(g["x0"]), g["tau"], np.asarray(g["mu"]))
        rn = hybrid.periodicity(model, c, rtol=rtol, atol=atol).norm
        worst_residual = max(worst_residual, rn)
        worst_mismatch = max(worst_mismatch, abs(rn - g["residual"]))
        count += 1
    return {
        "gaits": count,
        "max_residual": worst_residual,
        "max_mismatch": worst_mismatch,
        "ok": bool(worst_residual < residual_limit and worst_mismatch < mismatch_limit),
    }


# ---------------------------------------------------------------------------
# exports


def export_csv(doc: dict, path) -> int:
    """One row per stored gait.  Returns the row count."""
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = None
        for bi, gi, g in iter_gaits(doc):
            if writer is None:
                n = len(g["x0"]) // 2
                k = len(g["mu"])
                header = (["branch", "index"]
                          + [f"q{i + 1}" for i in range(n)]
                          + [f"dq{i + 1}" for i in range(n)]
                          + ["tau"]
                          + [f"mu{i}" for i in range(k)]
                          + ["residual", "slope", "slope_deg", "step_length",
                             "push_pull"])
                writer = csv.writer(fh)
                writer.writerow(header)
            row = ([bi, gi] + list(g["x0"]) + [g["tau"]] + list(g["mu"])
                   + [g["residual"], g["slope"], math.degrees(g["slope"]),
                      g["step_length"], int(g["push_pull"])])
            writer.writerow(row)
            rows += 1
        if writer is None:
            csv.writer(fh).writerow(["branch", "index"])
    return rows


def _svg_transform(tau_range, sigma_range, width=800, height=600, margin=60):
    t_lo, t_hi = tau_range
    s_lo, s_hi = sigma_range
    t_span = (t_hi - t_lo) or 1.0
    s_span = (s_hi - s_lo) or 1.0

    def to_xy(tau, sigma):
        x = margin + (tau - t_lo) / t_span * (width - 2 * margin)
        y = height - margin - (sigma - s_lo) / s_span * (height - 2 * margin)
        return x, y

    return to_xy


def export_svg(doc: dict, path) -> None:
    """Bifurcation diagram: slope against step duration, one polyline per
    branch, the rest family as a horizontal overlay and a marker at every
    singular gait."""
    pts = [(g["tau"], g["slope"]) for _, _, g in iter_gaits(doc)]
    seed_taus = [s["tau"] for s in doc.get("seeds", [])]
    taus = [p[0] for p in pts] + seed_taus + list(doc["scan"]["interval"])
    sigmas = [p[1] for p in pts] + [0.0]
    to_xy = _svg_transform((min(taus), max(taus)), (min(sigmas), max(sigmas)))

    parts = ['<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600" '
             'viewBox="0 0 800 600">',
             '<rect width="800" height="600" fill="white"/>']
    x0, y0 = to_xy(min(taus), 0.0)
    x1, _ = to_xy(max(taus), 0.0)
    parts.append(f'<line class="equilibrium-branch" x1="{x0:.2f}" y1="{y0:.2f}" '
                 f'x2="{x1:.2f}" y2="{y0:.2f}" stroke="red" stroke-width="1.5"/>')
    for branch in doc.get("branches", []):
        if not branch["gaits"]:
            continue
        coords = " ".join("%.2f,%.2f" % to_xy(g["tau"], g["slope"])
                          for g in branch["gaits"])
        parts.append(f'<polyline class="gait-branch" points="{coords}" fill="none" '
                     'stroke="green" stroke-width="1.2"/>')
    for s in doc.get("seeds", []):
        x, y = to_xy(s["tau"], 0.0)
        parts.append(f'<circle class="crossing-marker" data-tau="{s["tau"]:.4f}" '
                     f'cx="{x:.2f}" cy="{y:.2f}" r="5" fill="black" stroke="red" '
                     'stroke-width="2"/>')
    parts.append('<text x="400" y="592" text-anchor="middle">step duration (s)'
                 '</text>')
    parts.append('<text x="16" y="300" transform="rotate(-90 16 300)" '
                 'text-anchor="middle">surface slope (rad)</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def export_frames(doc: dict, path, fps: int = 60) -> None:
    """Time-sampled joint trajectories for an external animation viewer."""
    model = model_from_archive(doc)
    out = {"fps": fps, "model": doc["model"], "gaits": []}
    for bi, gi, g in iter_gaits(doc):
        c = hybrid.point_for(model, np.asarray(g["x0"]), g["tau"], np.asarray(g["mu"]))
        n_frames = int(math.floor(c.tau * fps)) + 1
        ts = np.minimum(np.arange(n_frames) / fps, c.tau)
        res = hybrid.flow(model, c, t_eval=ts)
        out["gaits"].append({
            "branch": bi,
            "index": gi,
            "tau": g["tau"],
            "slope": g["slope"],
            "frames": [y[:model.n].tolist() for y in res.sample_y],
        })
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=1)
        fh.write("\n")


EXPORTERS = {
    "csv": export_csv,
    "svg-bifurcation": export_svg,
    "animation-frames": export_frames,
}
