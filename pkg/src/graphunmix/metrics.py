"""Spectral and abundance angle errors with optimal endmember matching."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class EvalReport:
    permutation: tuple
    per_endmember_sad_deg: tuple
    rms_sad_deg: float
    rms_aad_deg: float
    method_label: str = ""
    degenerate_pixels: int = 0

    def to_json(self) -> dict:
        d = asdict(self)
        d["permutation"] = list(self.permutation)
        d["per_endmember_sad_deg"] = list(self.per_endmember_sad_deg)
        return d


def _unit(M, axis):
    n = np.linalg.norm(M, axis=axis, keepdims=True)
    return M / n


def _angle_between(a_unit, b_unit, axis=-1):
    # half-angle form; unlike arccos(cos) it stays accurate for tiny angles
    d = np.linalg.norm(a_unit - b_unit, axis=axis)
    s = np.linalg.norm(a_unit + b_unit, axis=axis)
    return 2.0 * np.arctan2(d, s)


def _angle(a, b):
    return float(_angle_between(a / np.linalg.norm(a), b / np.linalg.norm(b)))


def sad(m, m_hat) -> float:
    """Spectral angle (radians) between two signatures."""
    m, m_hat = np.asarray(m, dtype=float), np.asarray(m_hat, dtype=float)
    if not np.any(m) or not np.any(m_hat):
        raise ValueError("spectral angle is undefined for a zero vector")
    return _angle(m, m_hat)


def aad(a, a_hat) -> float:
    """Abundance angle (radians). Two zero vectors give 0, one zero vector pi/2."""
    a, a_hat = np.asarray(a, dtype=float), np.asarray(a_hat, dtype=float)
    za, zb = not np.any(a), not np.any(a_hat)
    if za and zb:
        return 0.0
    if za or zb:
        return math.pi / 2
    return _angle(a, a_hat)


def _angle_matrix(A, B):
    """Angle between every column of ``A`` and every column of ``B``."""
    na = np.linalg.norm(A, axis=0)
    nb = np.linalg.norm(B, axis=0)
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("spectral angle is undefined for a zero vector")
    Au, Bu = A / na, B / nb
    return _angle_between(Au[:, :, None], Bu[:, None, :], axis=0)


def match_endmembers(U_true, U_est) -> np.ndarray:
    """Assignment of estimated to true endmembers minimizing total SAD.

    Returns ``perm`` with ``perm[j]`` the true index paired with estimated
    column ``j``.
    """
    U_true, U_est = np.asarray(U_true, dtype=float), np.asarray(U_est, dtype=float)
    if U_true.shape != U_est.shape:
        raise ValueError(f"endmember shapes differ: {U_true.shape} vs {U_est.shape}")
    cost = _angle_matrix(U_est, U_true)
    est_idx, true_idx = linear_sum_assignment(cost)
    perm = np.empty(U_est.shape[1], dtype=np.int64)
    perm[est_idx] = true_idx
    return perm


def _align(M_est, perm):
    """Reorder estimated columns so column ``perm[j]`` holds estimate ``j``."""
    out = np.empty_like(M_est)
    out[:, perm] = M_est
    return out


def sad_per_endmember(U_true, U_est, perm) -> np.ndarray:
    U_true = np.asarray(U_true, dtype=float)
    aligned = _align(np.asarray(U_est, dtype=float), np.asarray(perm))
    if np.any(np.linalg.norm(U_true, axis=0) == 0) or np.any(np.linalg.norm(aligned, axis=0) == 0):
        raise ValueError("spectral angle is undefined for a zero vector")
    return _angle_between(_unit(U_true, 0), _unit(aligned, 0), axis=0)


def rms_sad(U_true, U_est, perm) -> float:
    """Root-mean-square spectral angle over endmembers, in degrees."""
    s = sad_per_endmember(U_true, U_est, perm)
    return math.degrees(math.sqrt(np.mean(s**2)))


def aad_per_pixel(V_true, V_est, perm):
    """Abundance angles (radians) per pixel and the count of degenerate rows."""
    V_true = np.asarray(V_true, dtype=float)
    V_est = _align(np.asarray(V_est, dtype=float), np.asarray(perm))
    if V_true.shape != V_est.shape:
        raise ValueError(f"abundance shapes differ: {V_true.shape} vs {V_est.shape}")
    na = np.linalg.norm(V_true, axis=1)
    nb = np.linalg.norm(V_est, axis=1)
    ok = (na > 0) & (nb > 0)
    ang = np.zeros(V_true.shape[0])
    ang[ok] = _angle_between(V_true[ok] / na[ok, None], V_est[ok] / nb[ok, None], axis=1)
    one_zero = (na > 0) != (nb > 0)
    ang[one_zero] = math.pi / 2
    return ang, int(one_zero.sum())


def rms_aad(V_true, V_est, perm) -> float:
    """Root-mean-square abundance angle over pixels, in degrees."""
    ang, _ = aad_per_pixel(V_true, V_est, perm)
    return math.degrees(math.sqrt(np.mean(ang**2)))


def evaluate_factors(U_true, V_true, U_est, V_est, label="") -> EvalReport:
    U_true, U_est = np.asarray(U_true, dtype=float), np.asarray(U_est, dtype=float)
    if U_true.shape != U_est.shape or np.shape(V_true) != np.shape(V_est):
        raise ValueError(
            f"estimate shapes U {U_est.shape}, V {np.shape(V_est)} do not match "
            f"truth U {U_true.shape}, V {np.shape(V_true)}"
        )
    perm = match_endmembers(U_true, U_est)
    sads = sad_per_endmember(U_true, U_est, perm)
    ang, degenerate = aad_per_pixel(V_true, V_est, perm)
    return EvalReport(
        permutation=tuple(int(p) for p in perm),
        per_endmember_sad_deg=tuple(float(math.degrees(s)) for s in sads),
        rms_sad_deg=math.degrees(math.sqrt(np.mean(sads**2))),
        rms_aad_deg=math.degrees(math.sqrt(np.mean(ang**2))),
        method_label=label,
        degenerate_pixels=degenerate,
    )


def evaluate(scene, fact, label="") -> EvalReport:
    """Compare a factorization against the ground truth of a simulated scene."""
    return evaluate_factors(scene.true_endmembers, scene.true_abundances, fact.U, fact.V, label)


def format_table(reports) -> str:
    """Two-row comparison table (rms_SAD / rms_AAD in degrees), one column per method."""
    labels = [r.method_label or f"run{i}" for i, r in enumerate(reports)]
    width = max(8, *(len(s) for s in labels)) + 2
    head = f"{'':<16}" + "".join(f"{s:>{width}}" for s in labels)
    sad_row = f"{'rms_SAD (deg)':<16}" + "".join(f"{r.rms_sad_deg:>{width}.2f}" for r in reports)
    aad_row = f"{'rms_AAD (deg)':<16}" + "".join(f"{r.rms_aad_deg:>{width}.2f}" for r in reports)
    return "\n".join([head, sad_row, aad_row]) + "\n"


def dump_report(path, report: EvalReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
