"""Linearized attitude/bias error dynamics used for gain synthesis.

State is the 6-vector (attitude error angle, gyro bias error). About a
hover/nominal-rate operating point the attitude error integrates the bias
error and the gyro noise, while the vector observations (gravity and
magnetic field rotated into the body frame) see the attitude error through
the cross-product of the predicted body-frame reference vectors.

The scheduling grid is the eight sign octants of roll/pitch/yaw; each
octant center is one of four physical attitudes (identity and the three
half-turns), reached twice by different angle triples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quat import dcm_of, quat_of_euler, skew
from .sim import DEFAULT_FIELD, DEFAULT_GRAVITY, NoiseParams

# roll/pitch/yaw of the eight octant centers, in scheduling order
OCTANT_TRIPLES = (
    (0.0, 0.0, 0.0),
    (0.0, 0.0, np.pi),
    (0.0, np.pi, 0.0),
    (np.pi, 0.0, 0.0),
    (0.0, np.pi, np.pi),
    (np.pi, np.pi, 0.0),
    (np.pi, 0.0, np.pi),
    (np.pi, np.pi, np.pi),
)

N_OCTANTS = len(OCTANT_TRIPLES)


def octant_rotation(octant: int) -> np.ndarray:
    """Inertial-to-body DCM at the center attitude of an octant."""
    if not 0 <= octant < N_OCTANTS:
        raise ValueError(f"octant must be 0..{N_OCTANTS - 1}, got {octant}")
    return dcm_of(quat_of_euler(*OCTANT_TRIPLES[octant]))


@dataclass
class LinearErrorPlant:
    """State-space data (a, bw, cy, dw, cz) of one estimation error model.

    x' = a x + bw w,  y = cy x + dw v,  z = cz x, with w and v independent
    unit-intensity white noises.
    """

    a: np.ndarray
    bw: np.ndarray
    cy: np.ndarray
    dw: np.ndarray
    cz: np.ndarray
    octant: int = 0

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.bw = np.atleast_2d(np.asarray(self.bw, dtype=float))
        self.cy = np.atleast_2d(np.asarray(self.cy, dtype=float))
        self.dw = np.atleast_2d(np.asarray(self.dw, dtype=float))
        self.cz = np.atleast_2d(np.asarray(self.cz, dtype=float))
        n = self.a.shape[0]
        p = self.cy.shape[0]
        if self.a.shape != (n, n):
            raise ValueError(f"a must be square, got {self.a.shape}")
        if self.bw.shape[0] != n:
            raise ValueError(f"bw must have {n} rows, got {self.bw.shape}")
        if self.cy.shape[1] != n:
            raise ValueError(f"cy must have {n} columns, got {self.cy.shape}")
        if self.dw.shape[0] != p:
            raise ValueError(f"dw must have {p} rows, got {self.dw.shape}")
        if self.cz.shape[1] != n:
            raise ValueError(f"cz must have {n} columns, got {self.cz.shape}")

    @property
    def n_states(self) -> int:
        return self.a.shape[0]


def closed_loop(plant: LinearErrorPlant, l: np.ndarray):
    """Estimator closed loop: (a + l cy, [bw, l dw]) driven by (w, v)."""
    l = np.atleast_2d(np.asarray(l, dtype=float))
    acl = plant.a + l @ plant.cy
    bcl = np.hstack([plant.bw, l @ plant.dw])
    return acl, bcl


def is_detectable(a, c, tol: float = 1e-8) -> bool:
    """PBH test: every eigenvalue of a with Re >= 0 is observable through c."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    c = np.atleast_2d(np.asarray(c, dtype=float))
    n = a.shape[0]
    scale = max(np.linalg.norm(a), np.linalg.norm(c), 1.0)
    for lam in np.linalg.eigvals(a):
        if lam.real < -tol * scale:
            continue
        pencil = np.vstack([lam * np.eye(n) - a, c])
        if np.linalg.svd(pencil, compute_uv=False)[-1] <= tol * scale:
            return False
    return True


def build_plant(
    noise: NoiseParams,
    octant: int = 0,
    g=DEFAULT_GRAVITY,
    h=DEFAULT_FIELD,
) -> LinearErrorPlant:
    """Error model at one octant center for the given sensor noise levels.

    Requires strictly positive noise intensities (they scale the disturbance
    channels) and non-parallel gravity/field directions (otherwise rotation
    about the common axis is unobservable).
    """
    for name in ("n_w", "n_b", "n_a", "n_m"):
        if getattr(noise, name) <= 0.0:
            raise ValueError(f"{name} must be > 0 for gain synthesis")
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    cross = np.linalg.norm(np.cross(g, h))
    if cross <= 1e-8 * np.linalg.norm(g) * np.linalg.norm(h):
        raise ValueError(
            "gravity and field directions are parallel; attitude about their "
            "common axis is unobservable"
        )

    r = octant_rotation(octant)
    eye3 = np.eye(3)
    zero3 = np.zeros((3, 3))

    a = np.block([[zero3, -eye3], [zero3, zero3]])
    bw = np.block([[-noise.n_w * eye3, zero3], [zero3, noise.n_b * eye3]])
    cy = np.block([[skew(r @ g), zero3], [skew(r @ h), zero3]])
    dw = np.block([[noise.n_a * eye3, zero3], [zero3, noise.n_m * eye3]])
    cz = np.eye(6)
    return LinearErrorPlant(a=a, bw=bw, cy=cy, dw=dw, cz=cz, octant=octant)
