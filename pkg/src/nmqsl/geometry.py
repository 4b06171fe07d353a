"""Bloch-sphere representation of a single qubit.

A state is rho = (I + r.sigma) / 2 with a real 3-vector r, |r| <= 1.  Polar
angles are measured from +z and live in [0, pi].  Everything here is a pure
function of immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "BlochVector",
    "BathSpec",
    "Rotation",
    "check_state",
    "purity",
    "trace_distance",
    "fixed_point",
    "purity_speed",
    "purity_speed_singular",
    "extremal_angles",
    "rotate_to_angle",
]

NORM_TOL = 1e-12


@dataclass(frozen=True)
class BlochVector:
    rx: float
    ry: float
    rz: float

    @classmethod
    def from_array(cls, v: Iterable[float]) -> "BlochVector":
        x, y, z = (float(c) for c in v)
        return cls(x, y, z)

    @classmethod
    def from_polar(cls, r: float, theta: float) -> "BlochVector":
        """Point in the x-z plane (x >= 0) with radius r and polar angle theta."""
        return cls(r * math.sin(theta), 0.0, r * math.cos(theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.rx, self.ry, self.rz], dtype=float)

    @property
    def r(self) -> float:
        return math.sqrt(self.rx * self.rx + self.ry * self.ry + self.rz * self.rz)

    @property
    def theta(self) -> float:
        r = self.r
        if r == 0.0:
            return 0.0
        return math.acos(max(-1.0, min(1.0, self.rz / r)))

    @property
    def polar(self) -> tuple[float, float]:
        return self.r, self.theta

    @property
    def purity(self) -> float:
        return purity(self)

    def is_physical(self, tol: float = NORM_TOL) -> bool:
        return self.r <= 1.0 + tol


def check_state(state: BlochVector) -> BlochVector:
    """Raise ``ValueError`` unless ``state`` lies inside the Bloch ball."""
    if not all(math.isfinite(c) for c in (state.rx, state.ry, state.rz)):
        raise ValueError(f"non-finite Bloch vector {state}")
    if not state.is_physical():
        raise ValueError(f"Bloch vector {state} has norm {state.r:.12g} > 1")
    return state


def purity(state: BlochVector) -> float:
    return 0.5 * (1.0 + state.r**2)


def trace_distance(state: BlochVector, ref: BlochVector) -> float:
    """Trace norm of rho - rho_ref, i.e. the Euclidean Bloch distance."""
    return math.sqrt(
        (state.rx - ref.rx) ** 2 + (state.ry - ref.ry) ** 2 + (state.rz - ref.rz) ** 2
    )


@dataclass(frozen=True)
class BathSpec:
    """Thermal bath at inverse temperature ``beta`` and the quantities it fixes.

    ``gamma_sum`` = 1 + e^beta is the longitudinal relaxation coefficient; the
    transverse components relax at half that rate.
    """

    beta: float
    rfp_magnitude: float = field(init=False)
    fixed_point: BlochVector = field(init=False)
    gamma_sum: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.beta >= 0.0:
            raise ValueError(f"inverse temperature must be >= 0, got {self.beta}")
        rfp = math.tanh(0.5 * self.beta)
        object.__setattr__(self, "rfp_magnitude", rfp)
        object.__setattr__(self, "fixed_point", BlochVector(0.0, 0.0, -rfp if rfp else 0.0))
        object.__setattr__(self, "gamma_sum", 1.0 + math.exp(self.beta))


def fixed_point(beta: float) -> BathSpec:
    return BathSpec(float(beta))


def purity_speed(gamma: float, state_polar: tuple[float, float], bath: BathSpec) -> float:
    """Instantaneous dP/dt for a state at (r, theta) under the rate ``gamma``.

    Evaluated as -gamma (1 + e^beta) r [r (1 + cos^2 theta) / 2 + r_fp cos theta],
    which stays finite at beta = 0.
    """
    r, theta = state_polar
    c = math.cos(theta)
    return -gamma * bath.gamma_sum * r * (0.5 * r * (1.0 + c * c) + bath.rfp_magnitude * c)


def purity_speed_singular(
    gamma: float, state_polar: tuple[float, float], bath: BathSpec
) -> float:
    """Same speed written with the 1/r_fp prefactor; undefined at beta = 0."""
    r, theta = state_polar
    c = math.cos(theta)
    rfp = bath.rfp_magnitude
    if rfp == 0.0:
        raise ZeroDivisionError("singular form needs beta > 0")
    return -gamma * (math.exp(bath.beta) - 1.0) * r * (c + r / (2.0 * rfp) * (1.0 + c * c))


def extremal_angles(r: float, bath: BathSpec) -> list[float]:
    """Stationary points of the purity speed in theta, sorted ascending.

    d v / d theta is proportional to sin(theta) (r cos(theta) + r_fp), so the
    poles are always stationary and an interior root exists iff r >= r_fp.
    """
    if not 0.0 < r <= 1.0 + NORM_TOL:
        raise ValueError(f"radius must lie in (0, 1], got {r}")
    angles = [0.0, math.pi]
    rfp = bath.rfp_magnitude
    if r >= rfp:
        interior = math.acos(max(-1.0, min(1.0, -rfp / r)))
        if all(abs(interior - a) > 1e-15 for a in angles):
            angles.append(interior)
    return sorted(angles)


@dataclass(frozen=True)
class Rotation:
    """Rotation of the Bloch ball by ``angle`` (radians) about the unit ``axis``."""

    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    angle: float = 0.0

    def __post_init__(self) -> None:
        a = np.asarray(self.axis, dtype=float)
        n = float(np.linalg.norm(a))
        if n == 0.0 or not math.isfinite(n):
            raise ValueError("rotation axis must be a non-zero finite vector")
        object.__setattr__(self, "axis", tuple(float(c) for c in a / n))
        object.__setattr__(self, "angle", float(self.angle))

    @classmethod
    def identity(cls) -> "Rotation":
        return cls((0.0, 0.0, 1.0), 0.0)

    @property
    def is_identity(self) -> bool:
        return math.remainder(self.angle, 2.0 * math.pi) == 0.0

    def matrix(self) -> np.ndarray:
        # Rodrigues
        k = np.asarray(self.axis)
        K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
        s, c = math.sin(self.angle), math.cos(self.angle)
        return np.eye(3) + s * K + (1.0 - c) * (K @ K)

    def apply(self, state: BlochVector) -> BlochVector:
        return BlochVector.from_array(self.matrix() @ state.as_array())

    def unitary(self) -> np.ndarray:
        """SU(2) matrix exp(-i angle n.sigma / 2) realizing this rotation."""
        nx, ny, nz = self.axis
        h = 0.5 * self.angle
        c, s = math.cos(h), math.sin(h)
        return np.array(
            [[c - 1j * s * nz, -1j * s * nx - s * ny], [-1j * s * nx + s * ny, c + 1j * s * nz]],
            dtype=complex,
        )


def rotate_to_angle(state: BlochVector, theta_target: float) -> tuple[BlochVector, Rotation]:
    """Rotate ``state`` into the x-z plane (x >= 0) at polar angle ``theta_target``.

    The zero vector is returned unchanged with the identity rotation.
    """
    if not 0.0 <= theta_target <= math.pi:
        raise ValueError(f"target polar angle must lie in [0, pi], got {theta_target}")
    r = state.r
    if r == 0.0:
        return state, Rotation.identity()
    a = state.as_array() / r
    b = np.array([math.sin(theta_target), 0.0, math.cos(theta_target)])
    cross = np.cross(a, b)
    s = float(np.linalg.norm(cross))
    c = float(np.clip(a @ b, -1.0, 1.0))
    if s < 1e-15:
        if c > 0.0:
            rot = Rotation.identity()
        else:
            # antiparallel: any axis orthogonal to a works
            trial = np.array([0.0, 1.0, 0.0]) if abs(a[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
            axis = trial - (trial @ a) * a
            rot = Rotation(tuple(axis), math.pi)
    else:
        rot = Rotation(tuple(cross / s), math.atan2(s, c))
    # place the result exactly on the target ray; the rotation carries the bookkeeping
    return BlochVector.from_polar(r, theta_target), rot
