"""Composite cantilever beam: closed-form low fidelity and a 1D finite-element proxy."""
import logging
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from bfreg.exceptions import ConfigurationError, InputError
from bfreg.modules.linalg import Rng, uniform_sample
from bfreg.modules.problems.models import BeamGeometry, BeamSample, BEAM_RANGES, UNITS

logger = logging.getLogger(__name__)

DEFAULT_GEOMETRY = BeamGeometry()
MIN_ELEMENTS = 50
GAUSS_POINTS = 8


def to_si(q: float, E1: float, E2: float, E3: float) -> tuple[float, float, float, float]:
    return (
        q * UNITS["q"]["to_si"],
        E1 * UNITS["E1"]["to_si"],
        E2 * UNITS["E2"]["to_si"],
        E3 * UNITS["E3"]["to_si"],
    )


def _check_moduli(E1: float, E2: float, E3: float) -> None:
    for name, value in (("E1", E1), ("E2", E2), ("E3", E3)):
        if not value > 0:
            raise InputError(f"elastic modulus {name} must be positive, got {value}")


def beam_section_stiffness(E1: float, E2: float, E3: float, hole_half_height=0.0,
                           geometry: BeamGeometry = DEFAULT_GEOMETRY):
    """Transformed-section EI (SI moduli) with a strip of half-height ``hole_half_height``
    removed from the web around its mid-height. Vectorised over the half-height.
    """
    g = geometry
    a = np.asarray(hole_half_height, dtype=np.float64)
    c = g.web_centre
    top = g.h2 + g.h3
    # (modulus, lower edge, upper edge) of each rectangle, bottom to top
    rects = [
        (E2, 0.0, g.h2),
        (E3, g.h2, c - a),
        (E3, c + a, top),
        (E1, top, top + g.h1),
    ]
    ea = sum(E * g.width * (y1 - y0) for E, y0, y1 in rects)
    first_moment = sum(E * g.width * (y1 - y0) * (y0 + y1) / 2 for E, y0, y1 in rects)
    centroid = first_moment / ea
    ei = 0.0
    for E, y0, y1 in rects:
        t = y1 - y0
        ei = ei + E * g.width * (t ** 3 / 12 + t * ((y0 + y1) / 2 - centroid) ** 2)
    return float(ei) if np.ndim(ei) == 0 else ei


def beam_lofi_profile(x, q: float, E1: float, E2: float, E3: float,
                      geometry: BeamGeometry = DEFAULT_GEOMETRY):
    """u(x) = -qL^4/(24EI) [(x/L)^4 - 4(x/L)^3 + 6(x/L)^2], holes ignored."""
    _check_moduli(E1, E2, E3)
    q_si, e1, e2, e3 = to_si(q, E1, E2, E3)
    ei = beam_section_stiffness(e1, e2, e3, 0.0, geometry)
    s = np.asarray(x, dtype=np.float64) / geometry.length
    return -q_si * geometry.length ** 4 / (24 * ei) * (s ** 4 - 4 * s ** 3 + 6 * s ** 2)


def beam_lofi_deflection(q: float, E1: float, E2: float, E3: float,
                         geometry: BeamGeometry = DEFAULT_GEOMETRY) -> float:
    """Tip deflection -qL^4/(8EI) of the hole-free section (input units in, metres out)."""
    _check_moduli(E1, E2, E3)
    q_si, e1, e2, e3 = to_si(q, E1, E2, E3)
    ei = beam_section_stiffness(e1, e2, e3, 0.0, geometry)
    return -q_si * geometry.length ** 4 / (8 * ei)


# ─── Finite-element proxy ───────────────────────────────────────

def _curvature_shapes(xi: np.ndarray, le: float) -> np.ndarray:
    """Second x-derivatives of the four Hermite cubics, one row per point."""
    return np.stack([
        (-6 + 12 * xi) / le ** 2,
        (-4 + 6 * xi) / le,
        (6 - 12 * xi) / le ** 2,
        (-2 + 6 * xi) / le,
    ], axis=-1)


@lru_cache(maxsize=16)
def _quadrature(n_elems: int, geometry: BeamGeometry, holes: bool):
    """Flat quadrature over the mesh: element ids, weights, chord half-heights, curvature shapes.

    Elements are split at hole edges; inside a hole x = x_c + r sin(phi) keeps the
    integrand smooth where the chord height has a square-root edge.
    """
    nodes, gauss_w = leggauss(GAUSS_POINTS)
    le = geometry.length / n_elems
    r = geometry.hole_radius
    centres = geometry.hole_centres if holes and r > 0 else np.empty(0)
    edges = np.concatenate([centres - r, centres + r])

    elem_ids, weights, half_heights, shapes = [], [], [], []
    for e in range(n_elems):
        x0, x1 = e * le, (e + 1) * le
        cuts = np.unique(np.concatenate([[x0, x1], edges[(edges > x0) & (edges < x1)]]))
        for s0, s1 in zip(cuts[:-1], cuts[1:]):
            mid = (s0 + s1) / 2
            inside = np.nonzero(np.abs(mid - centres) < r)[0]
            if inside.size:
                xc = centres[inside[0]]
                phi0 = np.arcsin(np.clip((s0 - xc) / r, -1.0, 1.0))
                phi1 = np.arcsin(np.clip((s1 - xc) / r, -1.0, 1.0))
                phi = (phi0 + phi1) / 2 + (phi1 - phi0) / 2 * nodes
                x = xc + r * np.sin(phi)
                w = gauss_w * (phi1 - phi0) / 2 * r * np.cos(phi)
                a = r * np.cos(phi)
            else:
                x = (s0 + s1) / 2 + (s1 - s0) / 2 * nodes
                w = gauss_w * (s1 - s0) / 2
                a = np.zeros_like(x)
            elem_ids.append(np.full(GAUSS_POINTS, e))
            weights.append(w)
            half_heights.append(a)
            shapes.append(_curvature_shapes((x - x0) / le, le))
    return (np.concatenate(elem_ids), np.concatenate(weights),
            np.concatenate(half_heights), np.concatenate(shapes))


@lru_cache(maxsize=16)
def _unit_load(n_elems: int, length: float) -> np.ndarray:
    """Consistent nodal load vector of a unit downward distributed load."""
    le = length / n_elems
    f = np.zeros(2 * (n_elems + 1))
    local = -np.array([le / 2, le ** 2 / 12, le / 2, -le ** 2 / 12])
    for e in range(n_elems):
        f[2 * e:2 * e + 4] += local
    return f


def beam_hifi_proxy(q: float, E1: float, E2: float, E3: float, n_elems: int = 200,
                    geometry: BeamGeometry = DEFAULT_GEOMETRY, holes: bool = True) -> float:
    """Tip deflection of the clamped-free Hermite-cubic model with hole-weakened EI(x)."""
    if n_elems < MIN_ELEMENTS:
        raise ConfigurationError(f"beam proxy needs at least {MIN_ELEMENTS} elements, got {n_elems}")
    _check_moduli(E1, E2, E3)
    q_si, e1, e2, e3 = to_si(q, E1, E2, E3)

    elem_ids, weights, half_heights, shapes = _quadrature(n_elems, geometry, holes)
    ei = np.asarray(beam_section_stiffness(e1, e2, e3, half_heights, geometry)) * np.ones_like(weights)
    local = (ei * weights)[:, None, None] * shapes[:, :, None] * shapes[:, None, :]

    n_dof = 2 * (n_elems + 1)
    stiffness = np.zeros((n_dof, n_dof))
    dofs = 2 * elem_ids[:, None] + np.arange(4)[None, :]
    np.add.at(stiffness, (dofs[:, :, None], dofs[:, None, :]), local)

    load = q_si * _unit_load(n_elems, geometry.length)
    # clamp deflection and rotation at x = 0
    u = np.linalg.solve(stiffness[2:, 2:], load[2:])
    return float(u[-2])


# ─── Sampling ───────────────────────────────────────────────────

def sample_beam_inputs(rng: Rng, n: int) -> np.ndarray:
    """(n, 4) array of (q, E1, E2, E3) drawn uniformly from their ranges."""
    columns = [uniform_sample(rng.split(j), low, high, n) for j, (low, high) in enumerate(BEAM_RANGES.values())]
    return np.stack(columns, axis=1)


def beam_samples(inputs: np.ndarray, fidelity: str, n_elems: int = 200,
                 geometry: BeamGeometry = DEFAULT_GEOMETRY) -> list[BeamSample]:
    solve = beam_lofi_deflection if fidelity == "lo" else (
        lambda q, e1, e2, e3, g: beam_hifi_proxy(q, e1, e2, e3, n_elems, g))
    return [BeamSample(*row, tip_deflection=solve(*row, geometry)) for row in map(tuple, inputs)]
