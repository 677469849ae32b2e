"""Offline estimator gain synthesis over the octant schedule.

Each correction gain minimizes the noise-to-error energy (H2) of the
linearized estimation error dynamics. Two independent routes compute it:

- a trace-minimizing linear matrix inequality solved with the interior
  point solver in sdp.py, and
- a Riccati route via the ordered real Schur form of the associated
  Hamiltonian matrix.

The schedule constructor runs both on every octant and refuses to emit
gains when the routes disagree, so a regression in either one cannot
ship silently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import schur, solve_continuous_lyapunov

from .plant import (
    N_OCTANTS,
    LinearErrorPlant,
    build_plant,
    closed_loop,
    is_detectable,
    octant_rotation,
)
from .sdp import LmiBlock, SdpResult, full_basis, solve_sdp, sym_basis
from .sim import DEFAULT_FIELD, DEFAULT_GRAVITY, NoiseParams

GAIN_FORMAT_VERSION = 1


class SynthesisError(RuntimeError):
    """Gain synthesis failure: ill-posed plant or route disagreement."""


class GainFileError(ValueError):
    """Malformed gain schedule file."""


def default_design_noise(sample_rate: float = 150.0) -> NoiseParams:
    """Disturbance weights the default gain schedule is synthesized with.

    Measurement intensities match the MPU-9250-class sensor model so the
    innovation weighting stays physical. The bias random-walk intensity is
    deliberately much larger than the datasheet value: it is the knob that
    places the bias-estimation poles, and the datasheet figure would put
    them near -1e-3/s (minutes-scale convergence). 5e-2 keeps every
    closed-loop pole left of -0.88/s at 150 Hz rates, so initialization
    and bias errors die within seconds for a small noise-floor cost.
    """
    sensor = NoiseParams.mpu9250(sample_rate)
    return NoiseParams(n_w=sensor.n_w, n_b=5e-2, n_a=sensor.n_a, n_m=sensor.n_m)


def h2_norm(acl, bcl, cz) -> float:
    """H2 norm of x' = acl x + bcl w, z = cz x; raises when not Hurwitz."""
    acl = np.atleast_2d(np.asarray(acl, dtype=float))
    bcl = np.atleast_2d(np.asarray(bcl, dtype=float))
    cz = np.atleast_2d(np.asarray(cz, dtype=float))
    if np.linalg.eigvals(acl).real.max() >= 0.0:
        raise SynthesisError("closed loop is not Hurwitz; H2 norm is unbounded")
    gram = solve_continuous_lyapunov(acl, -bcl @ bcl.T)
    return float(np.sqrt(max(np.trace(cz @ gram @ cz.T), 0.0)))


def solve_h2_care(plant: LinearErrorPlant):
    """Riccati route: returns (gain, gamma, error covariance).

    The stabilizing solution comes from the stable invariant subspace of
    the estimation Hamiltonian, computed with an ordered real Schur form.
    """
    a, bw, cy, dw, cz = plant.a, plant.bw, plant.cy, plant.dw, plant.cz
    n = plant.n_states
    if not is_detectable(a, cy):
        raise SynthesisError("(a, cy) is not detectable")
    if not is_detectable(a.T, bw.T):
        raise SynthesisError("(a, bw) is not stabilizable")
    r_cov = dw @ dw.T
    rinv = np.linalg.inv(r_cov)
    ham = np.block([[a.T, -cy.T @ rinv @ cy], [-bw @ bw.T, -a]])
    scale = max(np.linalg.norm(ham), 1.0)
    eigs = np.linalg.eigvals(ham)
    if np.min(np.abs(eigs.real)) <= 1e-9 * scale:
        raise SynthesisError("Hamiltonian has eigenvalues on the imaginary axis")
    _, u, sdim = schur(ham, output="real", sort="lhp")
    if sdim != n:
        raise SynthesisError("Hamiltonian stable subspace has wrong dimension")
    u1, u2 = u[:n, :n], u[n:, :n]
    p = u2 @ np.linalg.inv(u1)
    p = 0.5 * (p + p.T)
    l = -p @ cy.T @ rinv
    gamma = h2_norm(*closed_loop(plant, l), cz)
    return l, gamma, p


def default_stabilizer(plant: LinearErrorPlant) -> np.ndarray:
    """A crude stabilizing output-injection gain used to seed the LMI solve.

    Zero suffices when the plant is already Hurwitz. For the 6-state
    attitude/bias structure, injecting the cross-product blocks of cy with
    opposite signs on the two state halves always stabilizes: the common
    factor skew(u)^2 + skew(v)^2 is negative definite whenever the two
    reference directions are independent.
    """
    a, cy = plant.a, plant.cy
    n = plant.n_states
    if np.linalg.eigvals(a).real.max() < 0.0:
        return np.zeros((n, cy.shape[0]))
    attitude_shape = (
        n == 6
        and cy.shape == (6, 6)
        and np.allclose(cy[:, 3:], 0.0)
        and np.allclose(cy[:3, :3], -cy[:3, :3].T)
        and np.allclose(cy[3:, :3], -cy[3:, :3].T)
    )
    if attitude_shape:
        su, sv = cy[:3, :3], cy[3:, :3]
        scale = 0.5 * (np.sum(su * su) + np.sum(sv * sv))  # |u|^2 + |v|^2
        l0 = np.block([[su / scale, sv / scale], [-su / scale, -sv / scale]])
        if np.linalg.eigvals(a + l0 @ cy).real.max() < 0.0:
            return l0
    raise SynthesisError(
        "no default stabilizing gain for this plant; pass l0 explicitly"
    )


def _refine_stabilizer(plant: LinearErrorPlant, l0: np.ndarray) -> np.ndarray:
    """Improve a stabilizing gain by successive output-injection updates.

    Each round solves one Lyapunov equation for the disturbance covariance
    of the current closed loop and re-injects through the measurement
    channel; iterates stay stabilizing, so any round can be kept. A crude
    seed gain can leave nearly marginal closed-loop modes whose covariance
    is huge, which makes a terrible barrier starting point; a few rounds of
    this fix the scaling at negligible cost.
    """
    cy, dw = plant.cy, plant.dw
    try:
        rinv = np.linalg.inv(dw @ dw.T)
    except np.linalg.LinAlgError:
        return l0
    l = l0
    for _ in range(8):
        acl, bcl = closed_loop(plant, l)
        w_cov = bcl @ bcl.T
        ridge = 1e-12 * np.linalg.norm(w_cov, 2) + 1e-300
        p = solve_continuous_lyapunov(acl, -(w_cov + ridge * np.eye(acl.shape[0])))
        p = 0.5 * (p + p.T)
        l_new = -p @ cy.T @ rinv
        if not np.all(np.isfinite(l_new)):
            break
        if np.linalg.eigvals(plant.a + l_new @ cy).real.max() >= 0.0:
            break
        if np.linalg.norm(l_new - l) <= 1e-9 * max(np.linalg.norm(l), 1.0):
            return l_new
        l = l_new
    return l


def _feasible_start(plant: LinearErrorPlant, l0: np.ndarray, ex, ew, eq):
    """Strictly feasible (X, W, Q) coordinates from one Lyapunov solve."""
    l0 = _refine_stabilizer(plant, l0)
    acl, bcl = closed_loop(plant, l0)
    w_cov = bcl @ bcl.T
    margin = 0.05 * np.linalg.norm(w_cov, 2) + 1e-12
    p = solve_continuous_lyapunov(acl, -(w_cov + margin * np.eye(plant.n_states)))
    p = 0.5 * (p + p.T)
    x_mat = np.linalg.inv(p)
    x_mat = 0.5 * (x_mat + x_mat.T)
    w_mat = x_mat @ l0
    zpz = plant.cz @ p @ plant.cz.T
    q_mat = 1.1 * zpz + (0.1 * np.linalg.norm(zpz, 2) + 1e-12) * np.eye(zpz.shape[0])
    n = plant.n_states
    nz = plant.cz.shape[0]
    x_coords = [x_mat[i, j] for i in range(n) for j in range(i, n)]
    q_coords = [q_mat[i, j] for i in range(nz) for j in range(i, nz)]
    return np.concatenate([x_coords, w_mat.ravel(), q_coords])


def solve_h2_lmi(plant: LinearErrorPlant, rel_gap: float = 1e-9, l0=None):
    """LMI route: returns (gain, gamma, solver result).

    Variables are a symmetric certificate X, the transformed gain W = X L,
    and a symmetric bound Q on the output covariance; the objective is
    trace(Q), so gamma = sqrt(trace Q) at the optimum. Process and
    measurement noises enter as separate disturbance columns. The barrier
    solve starts from a strictly feasible point built around a crude
    stabilizing gain, so no feasibility phase is needed.
    """
    a, bw, cy, dw, cz = plant.a, plant.bw, plant.cy, plant.dw, plant.cz
    n = plant.n_states
    p_dim = cy.shape[0]
    qw = bw.shape[1]
    qv = dw.shape[1]
    nz = cz.shape[0]

    ex = sym_basis(n)
    ew = full_basis(n, p_dim)
    eq = sym_basis(nz)
    m = len(ex) + len(ew) + len(eq)

    # block 1: [He(X a + W cy), X bw, W dw; *, -I, 0; *, 0, -I] < 0
    n1 = n + qw + qv
    f0_1 = np.zeros((n1, n1))
    f0_1[n : n + qw, n : n + qw] = -np.eye(qw)
    f0_1[n + qw :, n + qw :] = -np.eye(qv)
    c1 = np.zeros((m, n1, n1))
    for k, e in enumerate(ex):
        he = e @ a
        c1[k, :n, :n] = he + he.T
        eb = e @ bw
        c1[k, :n, n : n + qw] = eb
        c1[k, n : n + qw, :n] = eb.T
    for k, f in enumerate(ew):
        hf = f @ cy
        idx = len(ex) + k
        c1[idx, :n, :n] = hf + hf.T
        fd = f @ dw
        c1[idx, :n, n + qw :] = fd
        c1[idx, n + qw :, :n] = fd.T

    # block 2: [-Q, cz; cz^T, -X] < 0, i.e. Q > cz X^-1 cz^T by Schur complement
    n2 = nz + n
    f0_2 = np.zeros((n2, n2))
    f0_2[:nz, nz:] = cz
    f0_2[nz:, :nz] = cz.T
    c2 = np.zeros((m, n2, n2))
    for k, e in enumerate(ex):
        c2[k, nz:, nz:] = -e
    for k, e in enumerate(eq):
        c2[len(ex) + len(ew) + k, :nz, :nz] = -e

    c_obj = np.zeros(m)
    for k, e in enumerate(eq):
        c_obj[len(ex) + len(ew) + k] = np.trace(e)

    if l0 is None:
        l0 = default_stabilizer(plant)
    x0 = _feasible_start(plant, np.atleast_2d(np.asarray(l0, dtype=float)), ex, ew, eq)
    result = solve_sdp(
        c_obj, [LmiBlock(f0_1, c1), LmiBlock(f0_2, c2)], x0=x0, rel_gap=rel_gap
    )

    x_mat = np.tensordot(result.x[: len(ex)], ex, axes=1)
    w_mat = np.tensordot(result.x[len(ex) : len(ex) + len(ew)], ew, axes=1)
    l = np.linalg.solve(x_mat, w_mat)
    gamma = float(np.sqrt(max(result.value, 0.0)))
    return l, gamma, result


def gain_symmetry_transform(l: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Map a 6x6 gain between octants whose centers differ by rotation r."""
    t = np.zeros((6, 6))
    t[:3, :3] = r
    t[3:, 3:] = r
    return t @ l @ t.T


@dataclass
class GainSchedule:
    """Synthesized correction gains, one per octant, with certificates."""

    gains: np.ndarray  # (8, 6, 6)
    gammas: np.ndarray  # (8,)
    noise: NoiseParams
    g: tuple
    h: tuple

    def gain(self, octant: int) -> np.ndarray:
        return self.gains[octant]


def synthesize_schedule(
    noise: NoiseParams,
    g=DEFAULT_GRAVITY,
    h=DEFAULT_FIELD,
    *,
    rel_gap: float = 1e-9,
    cross_check_tol: float = 1e-3,
) -> GainSchedule:
    """Synthesize all octant gains, cross-checking the two routes.

    Raises SynthesisError when the LMI and Riccati gains (or their
    performance levels) disagree beyond cross_check_tol, or when any
    closed loop fails to be Hurwitz.
    """
    gains = np.zeros((N_OCTANTS, 6, 6))
    gammas = np.zeros(N_OCTANTS)
    for octant in range(N_OCTANTS):
        plant = build_plant(noise, octant, g, h)
        l_lmi, gamma_lmi, _ = solve_h2_lmi(plant, rel_gap=rel_gap)
        l_care, gamma_care, _ = solve_h2_care(plant)
        mismatch = np.linalg.norm(l_lmi - l_care) / np.linalg.norm(l_care)
        if mismatch > cross_check_tol:
            raise SynthesisError(
                f"octant {octant}: LMI and Riccati gains disagree "
                f"(relative mismatch {mismatch:.3e})"
            )
        if abs(gamma_lmi - gamma_care) > cross_check_tol * gamma_care:
            raise SynthesisError(
                f"octant {octant}: performance levels disagree "
                f"({gamma_lmi:.6e} vs {gamma_care:.6e})"
            )
        gamma_direct = h2_norm(*closed_loop(plant, l_lmi), plant.cz)
        if abs(gamma_lmi - gamma_direct) > cross_check_tol * gamma_direct:
            raise SynthesisError(
                f"octant {octant}: bound {gamma_lmi:.6e} does not match the "
                f"achieved closed-loop norm {gamma_direct:.6e}"
            )
        gains[octant] = l_lmi
        gammas[octant] = gamma_lmi
    return GainSchedule(
        gains=gains,
        gammas=gammas,
        noise=noise,
        g=tuple(float(v) for v in g),
        h=tuple(float(v) for v in h),
    )


def schedule_to_dict(schedule: GainSchedule) -> dict:
    return {
        "format_version": GAIN_FORMAT_VERSION,
        "noise": {
            "n_w": schedule.noise.n_w,
            "n_b": schedule.noise.n_b,
            "n_a": schedule.noise.n_a,
            "n_m": schedule.noise.n_m,
            "b0": list(schedule.noise.b0),
        },
        "g": list(schedule.g),
        "h": list(schedule.h),
        "gammas": [float(v) for v in schedule.gammas],
        "gains": [[[float(v) for v in row] for row in gain] for gain in schedule.gains],
    }


def schedule_from_dict(data: dict) -> GainSchedule:
    if not isinstance(data, dict):
        raise GainFileError("gain file must contain a JSON object")
    version = data.get("format_version")
    if version != GAIN_FORMAT_VERSION:
        raise GainFileError(
            f"unsupported gain format_version {version!r}; "
            f"expected {GAIN_FORMAT_VERSION}"
        )
    required = {"noise", "g", "h", "gammas", "gains"}
    missing = sorted(required - set(data))
    if missing:
        raise GainFileError(f"missing gain file keys: {', '.join(missing)}")
    try:
        noise = NoiseParams(
            n_w=float(data["noise"]["n_w"]),
            n_b=float(data["noise"]["n_b"]),
            n_a=float(data["noise"]["n_a"]),
            n_m=float(data["noise"]["n_m"]),
            b0=tuple(float(v) for v in data["noise"].get("b0", (0.0, 0.0, 0.0))),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GainFileError(f"invalid noise block: {exc}") from None
    gains = np.asarray(data["gains"], dtype=float)
    gammas = np.asarray(data["gammas"], dtype=float)
    if gains.shape != (N_OCTANTS, 6, 6):
        raise GainFileError(f"gains must have shape (8, 6, 6), got {gains.shape}")
    if gammas.shape != (N_OCTANTS,):
        raise GainFileError(f"gammas must have length 8, got {gammas.shape}")
    if not (np.all(np.isfinite(gains)) and np.all(np.isfinite(gammas))):
        raise GainFileError("gain file contains non-finite values")
    return GainSchedule(
        gains=gains,
        gammas=gammas,
        noise=noise,
        g=tuple(float(v) for v in data["g"]),
        h=tuple(float(v) for v in data["h"]),
    )


def save_gains(schedule: GainSchedule, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(schedule_to_dict(schedule), indent=2, sort_keys=True) + "\n")
    return path


def load_gains(path) -> GainSchedule:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise GainFileError(f"{path}: invalid JSON: {exc}") from None
    return schedule_from_dict(data)
