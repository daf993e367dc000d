"""Scale-invariant evaluation metrics: SI-SDR and SI-SAR.

Both are projections of the estimate onto reference subspaces, reported in
dB and clamped to +/-100 so downstream CSV aggregation never sees
infinities.
"""

from __future__ import annotations

import numpy as np

DB_CAP = 100.0


def _as_samples(signal) -> np.ndarray:
    samples = getattr(signal, "samples", signal)
    return np.asarray(samples, dtype=np.float64).ravel()


def _ratio_db(num: float, den: float, cap_db: float) -> float:
    if num <= 0.0:
        return -cap_db
    if den <= 0.0:
        return cap_db
    return float(np.clip(10.0 * np.log10(num / den), -cap_db, cap_db))


def si_sdr(est, ref, cap_db: float = DB_CAP) -> float:
    """Scale-invariant signal-to-distortion ratio in dB.

    Projects est onto ref: target = <est, ref>/||ref||^2 * ref, and returns
    10 log10(||target||^2 / ||target - est||^2).
    """
    est = _as_samples(est)
    ref = _as_samples(ref)
    if est.shape != ref.shape:
        raise ValueError("est and ref must have equal length")
    ref_energy = float(np.dot(ref, ref))
    if ref_energy <= 0.0:
        raise ValueError("reference has zero energy")
    alpha = float(np.dot(est, ref)) / ref_energy
    target = alpha * ref
    num = float(np.dot(target, target))
    den = float(np.sum((target - est) ** 2))
    return _ratio_db(num, den, cap_db)


def si_sar(est, ref_clean, ref_noise, cap_db: float = DB_CAP) -> float:
    """Scale-invariant signal-to-artifact ratio in dB.

    est is orthogonally projected onto span{ref_clean, ref_noise}; whatever
    falls outside that span is the artifact:
    10 log10(||projection||^2 / ||est - projection||^2).
    """
    est = _as_samples(est)
    clean = _as_samples(ref_clean)
    noise = _as_samples(ref_noise)
    if not est.shape == clean.shape == noise.shape:
        raise ValueError("est and references must have equal length")
    cc = float(np.dot(clean, clean))
    nn = float(np.dot(noise, noise))
    cn = float(np.dot(clean, noise))
    det = cc * nn - cn * cn
    if det <= 1e-12 * max(cc * nn, 1e-300):
        raise ValueError("degenerate span: references are collinear or zero")
    rhs = np.array([np.dot(est, clean), np.dot(est, noise)])
    coeff = np.linalg.solve(np.array([[cc, cn], [cn, nn]]), rhs)
    projection = coeff[0] * clean + coeff[1] * noise
    num = float(np.dot(projection, projection))
    den = float(np.sum((est - projection) ** 2))
    return _ratio_db(num, den, cap_db)
