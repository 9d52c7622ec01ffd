"""Polygon generation, vertex classification, and condition-targeted edits.

All coordinates live in the unit scene square [0, 1]^2. A polygon is a float64
numpy array of shape (n, 2) listing vertices counter-clockwise (positive
shoelace area). Generation is seeded and deterministic: identical GenParams
produce bit-identical vertex arrays.

Concavity model
---------------
The reflex budget ``n_concavities`` is spent on notch groups:

- a *V-notch* pushes one vertex toward the centroid until it classifies
  REFLEX; the resulting cavity is wide and shallow (mouth >= depth);
- a *slit* replaces one vertex with four (two convex mouth corners that stay
  on the hull, two reflex floor corners), carving a narrow, deep bore
  (mouth < depth).

Each cavity is labeled DEEP (mouth < depth) or SHALLOW (mouth >= depth).
CONCAVE edits fill part of a deep cavity, NOFILL edits sit inside a shallow
one, CONVEX edits erect a bump outward on a hull edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import GenerationFailed, NoSuitableSite

MIN_AREA = 0.02
RETRY_BUDGET = 64

_TAG_GEN = 0x504F4C59  # rng spawn key for generation attempts
_TAG_EDIT = 0x45444954  # rng spawn key for edit placement

_BASE_RADIUS = 0.19  # mean polygon radius in scene units
_MIN_SITE_RADIUS = 0.035  # slit floors stay at least this far from the centroid
_MIN_APEX_RADIUS = 0.012  # V apexes may go deeper (small n leaves little room)
_EPS_COLLINEAR = 1e-13

# slit construction (deep cavities); widths and depths are sized so every
# slit can host a filling patch of up to _SLIT_CAP_AREA scene units
_SLIT_W_LO = 0.40 * _BASE_RADIUS
_SLIT_W_HI = 0.45 * _BASE_RADIUS
_SLIT_TAPER = 0.004
_SLIT_CAP_AREA = 0.0055

# edit construction
_EDGE_MARGIN = 0.008  # bump base keeps this much of its host edge free
_BASE_INSET = 0.0035  # cavity patch bases stop short of cavity corners
_CHORD_CLEAR = 0.006  # minimum clearance between a patch and the cavity chord


class VertexClass(Enum):
    CONVEX = "CONVEX"
    REFLEX = "REFLEX"


class EditCondition(Enum):
    CONCAVE = "CONCAVE"
    NOFILL = "NOFILL"
    CONVEX = "CONVEX"
    NOCHANGE = "NOCHANGE"


@dataclass(frozen=True)
class GenParams:
    """Generator inputs. ``n_concavities`` equals the exact REFLEX count of
    the emitted polygon and must not exceed ``n_vertices - 4``."""

    n_vertices: int
    n_concavities: int
    irregularity: float
    spikiness: float
    seed: int

    def __post_init__(self) -> None:
        if not 5 <= self.n_vertices <= 12:
            raise ValueError(f"n_vertices must be in [5, 12], got {self.n_vertices}")
        if not 0 <= self.n_concavities <= 3:
            raise ValueError(
                f"n_concavities must be in [0, 3], got {self.n_concavities}"
            )
        if self.n_concavities > self.n_vertices - 4:
            raise ValueError(
                f"n_concavities={self.n_concavities} needs n_vertices >= "
                f"{self.n_concavities + 4}, got {self.n_vertices}"
            )
        for name in ("irregularity", "spikiness"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {val}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True)
class Concavity:
    """One cavity: the boundary chain hidden from the hull plus its chord."""

    chain: tuple[int, ...]  # polygon indices strictly between the chord ends
    chord: tuple[int, int]  # polygon indices of the spanning hull vertices
    mouth: float  # chord length
    depth: float  # max inward distance from the chord to the chain
    deep: bool  # mouth < depth


@dataclass(frozen=True)
class EditPiece:
    patch: np.ndarray  # CCW simple polygon, base first/last vertex
    host_edge: int  # host edge v[i] -> v[i+1] carrying the base (its end, for NOFILL)
    condition: EditCondition
    area: float


# --------------------------------------------------------------- primitives


def polygon_area(verts: np.ndarray) -> float:
    """Signed shoelace area; positive for counter-clockwise order."""
    v = np.asarray(verts, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def perimeter(verts: np.ndarray) -> float:
    v = np.asarray(verts, dtype=float)
    return float(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1).sum())


def _orient(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a: np.ndarray, b: np.ndarray, p: np.ndarray) -> bool:
    return (
        min(a[0], b[0]) - _EPS_COLLINEAR <= p[0] <= max(a[0], b[0]) + _EPS_COLLINEAR
        and min(a[1], b[1]) - _EPS_COLLINEAR <= p[1] <= max(a[1], b[1]) + _EPS_COLLINEAR
    )


def _segments_touch(p1, p2, p3, p4) -> bool:
    """Whether closed segments p1p2 and p3p4 share at least one point."""
    d1 = _orient(p3, p4, p1)
    d2 = _orient(p3, p4, p2)
    d3 = _orient(p1, p2, p3)
    d4 = _orient(p1, p2, p4)
    eps = _EPS_COLLINEAR
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True
    if abs(d1) <= eps and _on_segment(p3, p4, p1):
        return True
    if abs(d2) <= eps and _on_segment(p3, p4, p2):
        return True
    if abs(d3) <= eps and _on_segment(p1, p2, p3):
        return True
    if abs(d4) <= eps and _on_segment(p1, p2, p4):
        return True
    return False


def is_simple(verts: np.ndarray) -> bool:
    """True when the closed polyline has no self-intersection, no repeated
    vertex, and no degenerate spike."""
    v = np.asarray(verts, dtype=float)
    n = len(v)
    if n < 3:
        return False
    edges = [(v[i], v[(i + 1) % n]) for i in range(n)]
    for a, b in edges:
        if np.hypot(*(b - a)) <= _EPS_COLLINEAR:
            return False
    for i in range(n):
        prev, here, nxt = v[i - 1], v[i], v[(i + 1) % n]
        if abs(_orient(prev, here, nxt)) <= _EPS_COLLINEAR:
            if np.dot(here - prev, nxt - here) < 0:  # folds back on itself
                return False
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue  # adjacent edges share an endpoint by design
            if _segments_touch(*edges[i], *edges[j]):
                return False
    return True


def classify_vertices(verts: np.ndarray) -> list[VertexClass]:
    """REFLEX iff the interior angle exceeds pi, for a simple CCW polygon.
    Collinear (straight) vertices classify CONVEX."""
    v = np.asarray(verts, dtype=float)
    n = len(v)
    out = []
    for i in range(n):
        cross = _orient(v[i - 1], v[i], v[(i + 1) % n])
        out.append(VertexClass.REFLEX if cross < 0 else VertexClass.CONVEX)
    return out


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Convex hull via monotone chain. Returns a CCW polygon whose vertices
    are a subset of the input vertices; collinear boundary points are dropped.
    Starts at the lexicographically smallest vertex for determinism."""
    pts = np.asarray(points, dtype=float)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    sorted_pts = pts[order]

    def build(seq):
        chain: list[np.ndarray] = []
        for p in seq:
            while len(chain) >= 2 and _orient(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = build(sorted_pts)
    upper = build(sorted_pts[::-1])
    hull = lower[:-1] + upper[:-1]
    return np.array(hull)


# -------------------------------------------------------------- concavities


def _dist_to_line(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    d = b - a
    return abs(_orient(a, b, p)) / float(np.hypot(*d))


def find_concavities(verts: np.ndarray) -> list[Concavity]:
    """Locate boundary chains hidden from the hull and measure their cavity:
    mouth = chord length between the flanking hull vertices, depth = maximum
    inward distance from that chord. DEEP iff mouth < depth."""
    v = np.asarray(verts, dtype=float)
    n = len(v)
    hull = convex_hull(v)
    hull_set = {tuple(p) for p in map(tuple, hull)}
    on_hull = [tuple(p) in hull_set for p in map(tuple, v)]
    if all(on_hull):
        return []
    cavities = []
    hull_idx = [i for i in range(n) if on_hull[i]]
    for pos, ia in enumerate(hull_idx):
        ib = hull_idx[(pos + 1) % len(hull_idx)]
        chain = []
        j = (ia + 1) % n
        while j != ib:
            chain.append(j)
            j = (j + 1) % n
        if not chain:
            continue
        mouth = float(np.hypot(*(v[ib] - v[ia])))
        depth = max(_dist_to_line(v[c], v[ia], v[ib]) for c in chain)
        cavities.append(
            Concavity(
                chain=tuple(chain),
                chord=(ia, ib),
                mouth=mouth,
                depth=depth,
                deep=mouth < depth,
            )
        )
    return cavities


# --------------------------------------------------------------- generation


def _plan_groups(k: int, n: int, rng: np.random.Generator) -> list[str]:
    if k == 0:
        return []
    if k == 1:
        return ["v"]
    if k == 2:
        return ["slit"] if rng.random() < 0.6 else ["v", "v"]
    # a slit+V split needs 5 surviving sites, otherwise the V chord spans
    # nearly a diameter and no reflex push fits
    if n - 3 >= 5 and rng.random() < 0.7:
        return ["slit", "v"]
    return ["v", "v", "v"]


def _pick_sites(
    n_sites: int, n_groups: int, rng: np.random.Generator
) -> list[int] | None:
    """Choose pairwise non-adjacent site indices on the cycle."""
    if n_groups == 0:
        return []
    chosen: list[int] = []
    for cand in rng.permutation(n_sites):
        c = int(cand)
        if all(min((c - s) % n_sites, (s - c) % n_sites) >= 2 for s in chosen):
            chosen.append(c)
            if len(chosen) == n_groups:
                return chosen
    return None


def _attempt_polygon(params: GenParams, rng: np.random.Generator) -> np.ndarray | None:
    n, k = params.n_vertices, params.n_concavities
    groups = _plan_groups(k, n, rng)
    n_slits = groups.count("slit")
    n_sites = n - 3 * n_slits
    if n_sites < max(3, 2 * len(groups)):
        return None

    # angular layout with jitter proportional to irregularity
    for _ in range(8):
        steps = 1.0 + params.irregularity * rng.uniform(-0.85, 0.85, n_sites)
        steps = steps / steps.sum() * (2.0 * math.pi)
        if steps.max() < 0.9 * math.pi:
            break
    else:
        return None
    theta = rng.uniform(0.0, 2.0 * math.pi) + np.concatenate(
        [[0.0], np.cumsum(steps[:-1])]
    )

    radii = _BASE_RADIUS * (1.0 + 0.55 * params.spikiness * rng.uniform(-1, 1, n_sites))
    np.clip(radii, 0.62 * _BASE_RADIUS, 1.38 * _BASE_RADIUS, out=radii)
    center = np.array([0.5, 0.5]) + rng.uniform(-0.02, 0.02, 2)

    sites = _pick_sites(n_sites, len(groups), rng)
    if sites is None:
        return None
    # notch hosts get a radius floor so the carving has room to go inward
    for g, s in zip(groups, sites):
        radii[s] = max(radii[s], (1.15 if g == "v" else 1.20) * _BASE_RADIUS)

    pts = center + radii[:, None] * np.c_[np.cos(theta), np.sin(theta)]

    # convexify: push any non-convex site outward onto (slightly past) the
    # chord of its neighbors; radial moves preserve the angular order
    for _ in range(60):
        dirty = False
        for i in range(n_sites):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % n_sites]
            if _orient(a, b, c) <= 1e-5:
                d = b - center
                denom = _orient(a, center + d, c) - _orient(a, center, c)
                # t such that center + t*d sits on line a-c, then overshoot
                if abs(denom) < 1e-12:
                    return None
                t = -_orient(a, center, c) / denom
                new = center + (1.04 * t) * d
                if np.hypot(*(new - center)) > 0.46:
                    return None
                pts[i] = new
                dirty = True
        if not dirty:
            break
    else:
        return None

    # carve notches
    out_pts: list[np.ndarray] = []
    reflex_expect: list[int] = []
    site_kind = {s: g for g, s in zip(groups, sites)}
    for i in range(n_sites):
        kind = site_kind.get(i)
        if kind is None:
            out_pts.append(pts[i])
            continue
        v0 = pts[i]
        u_in = center - v0
        u_in = u_in / np.hypot(*u_in)
        if kind == "slit":
            prev_p, next_p = pts[i - 1], pts[(i + 1) % n_sites]
            t_hat = next_p - prev_p
            t_hat = t_hat / np.hypot(*t_hat)
            w = rng.uniform(_SLIT_W_LO, _SLIT_W_HI)
            d_max = float(np.hypot(*(v0 - center))) - _MIN_SITE_RADIUS
            b_f = w - 2.0 * _SLIT_TAPER - 2.0 * _BASE_INSET
            need = _SLIT_CAP_AREA / b_f + b_f / 4.0 + 0.55 * w + 0.008
            d_lo = max(1.35 * w, need)
            d_hi = min(2.1 * w, 0.98 * d_max)
            if d_hi < d_lo:
                return None
            depth = rng.uniform(d_lo, d_hi)
            m1 = v0 - 0.5 * w * t_hat
            m2 = v0 + 0.5 * w * t_hat
            f1 = m1 + depth * u_in + _SLIT_TAPER * t_hat
            f2 = m2 + depth * u_in - _SLIT_TAPER * t_hat
            reflex_expect.extend([len(out_pts) + 1, len(out_pts) + 2])
            out_pts.extend([m1, f1, f2, m2])
        else:  # V-notch
            a, b = pts[i - 1], pts[(i + 1) % n_sites]
            mouth = float(np.hypot(*(b - a)))
            n_chord = np.array([-(b - a)[1], (b - a)[0]]) / mouth  # points inward
            if np.dot(n_chord, center - a) < 0:
                n_chord = -n_chord
            sag = float(np.dot(v0 - a, -n_chord))  # how far v0 juts past the chord
            cos_phi = float(np.dot(u_in, n_chord))
            if cos_phi < 0.5:
                return None
            budget = (
                float(np.hypot(*(v0 - center))) - _MIN_APEX_RADIUS
            ) * cos_phi - sag
            hi = min(0.85 * mouth, 0.95 * budget)
            lo = max(0.08 * mouth, 0.012)
            if hi < lo:
                return None
            depth = rng.uniform(max(lo, 0.55 * hi), hi)
            apex = v0 + ((sag + depth) / cos_phi) * u_in
            reflex_expect.append(len(out_pts))
            out_pts.append(apex)

    verts = np.array(out_pts)
    return verts if _validate(verts, params, reflex_expect) else None


def _validate(
    verts: np.ndarray, params: GenParams, reflex_expect: list[int]
) -> bool:
    if verts.shape != (params.n_vertices, 2):
        return False
    if np.any(verts < 0.002) or np.any(verts > 0.998):
        return False
    if polygon_area(verts) < MIN_AREA:
        return False
    if not is_simple(verts):
        return False
    classes = classify_vertices(verts)
    got_reflex = [i for i, c in enumerate(classes) if c is VertexClass.REFLEX]
    if got_reflex != sorted(reflex_expect):
        return False
    # every carved notch must measure as its intended cavity class
    cavities = find_concavities(verts)
    covered: set[int] = set()
    for cav in cavities:
        chain_reflex = [i for i in cav.chain if i in got_reflex]
        if not chain_reflex:
            return False
        if len(cav.chain) == 1:
            if cav.deep:  # V-notches must stay shallow
                return False
        elif len(cav.chain) == 2:
            if not cav.deep:  # slits must stay deep
                return False
        else:
            return False
        covered.update(chain_reflex)
    return covered == set(got_reflex)


def generate_polygon(params: GenParams) -> np.ndarray:
    """Emit a simple CCW polygon matching ``params`` exactly (vertex count,
    REFLEX count), with area >= MIN_AREA, inside the unit square.

    Deterministic per seed; raises GenerationFailed after RETRY_BUDGET
    internally reseeded attempts.
    """
    for attempt in range(RETRY_BUDGET):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=params.seed, spawn_key=(_TAG_GEN, attempt))
        )
        verts = _attempt_polygon(params, rng)
        if verts is not None:
            return verts
    raise GenerationFailed(
        f"no valid polygon for {params} within {RETRY_BUDGET} attempts"
    )


# -------------------------------------------------------------------- edits


def _erect(
    host: np.ndarray,
    edge_idx: int,
    t1: float,
    t2: float,
    ridge: list[tuple[float, float]],
    condition: EditCondition,
    target_area: float,
) -> tuple[np.ndarray, EditPiece]:
    """Attach a patch to host edge ``edge_idx`` over base interval [t1, t2]
    (arc-length from the edge start). ``ridge`` lists (t, height) points in
    edge coordinates; height extends along the edge's outward normal, which
    for cavity walls points into the cavity."""
    n = len(host)
    a, b = host[edge_idx], host[(edge_idx + 1) % n]
    e_hat = (b - a) / np.hypot(*(b - a))
    n_hat = np.array([e_hat[1], -e_hat[0]])  # right of travel = away from interior
    p = a + t1 * e_hat
    q = a + t2 * e_hat
    pts = [p] + [a + t * e_hat + h * n_hat for t, h in ridge] + [q]
    patch = np.array(pts)
    area = polygon_area(patch)
    if abs(area - target_area) > 1e-9:
        raise AssertionError("patch area drifted from target")
    out = np.vstack([host[: edge_idx + 1], patch, host[edge_idx + 1 :]])
    piece = EditPiece(
        patch=patch, host_edge=edge_idx, condition=condition, area=float(area)
    )
    return out, piece


def _hull_edges(host: np.ndarray) -> list[int]:
    """Host edge indices whose both endpoints are consecutive hull vertices."""
    hull = convex_hull(host)
    hull_seq = [tuple(p) for p in hull]
    pos = {p: i for i, p in enumerate(hull_seq)}
    m = len(hull_seq)
    out = []
    n = len(host)
    for i in range(n):
        pa, pb = tuple(host[i]), tuple(host[(i + 1) % n])
        if pa in pos and pb in pos and (pos[pa] + 1) % m == pos[pb]:
            out.append(i)
    return out


def _edit_convex(host, rng, target_area):
    edges = _hull_edges(host)
    beta = math.radians(rng.uniform(62.0, 72.0))
    base = 2.0 * math.sqrt(target_area / math.tan(beta))
    height = 2.0 * target_area / base
    order = list(rng.permutation(len(edges))) if edges else []
    for pick in order:
        i = edges[int(pick)]
        a, b = host[i], host[(i + 1) % len(host)]
        e_len = float(np.hypot(*(b - a)))
        span = e_len - 2.0 * _EDGE_MARGIN - base
        if span <= 0:
            continue
        t_mid = _EDGE_MARGIN + base / 2.0 + rng.uniform(0.0, span)
        return _erect(
            host,
            i,
            t_mid - base / 2.0,
            t_mid + base / 2.0,
            [(t_mid, height)],
            EditCondition.CONVEX,
            target_area,
        )
    raise NoSuitableSite("no hull edge can host the bump")


def _edit_concave(host, rng, target_area):
    cavities = [
        c for c in find_concavities(host) if c.deep and len(c.chain) == 2
    ]
    if not cavities:
        raise NoSuitableSite("no deep flat-floored cavity")
    for pick in rng.permutation(len(cavities)):
        cav = cavities[int(pick)]
        f1, f2 = cav.chain
        if (f1 + 1) % len(host) != f2:
            continue
        floor_len = float(np.hypot(*(host[f2] - host[f1])))
        b_f = floor_len - 2.0 * _BASE_INSET
        if b_f <= 0:
            continue
        clear = 0.55 * cav.mouth + _CHORD_CLEAR
        if target_area > b_f * b_f / 4.0:
            # house profile: rectangle topped by a 45-degree roof, covering
            # the whole floor so both reflex floor corners sit under it
            h_body = (target_area - b_f * b_f / 4.0) / b_f
            top = h_body + b_f / 2.0
            if top > cav.depth - clear:
                continue
            t1 = _BASE_INSET
            t2 = _BASE_INSET + b_f
            ridge = [
                (t1, h_body),
                ((t1 + t2) / 2.0, top),
                (t2, h_body),
            ]
        else:
            # small patch: centered triangle with 45-degree flanks
            b_t = 2.0 * math.sqrt(target_area)
            h_t = math.sqrt(target_area)
            if h_t > cav.depth - clear:
                continue
            t1 = (floor_len - b_t) / 2.0
            t2 = (floor_len + b_t) / 2.0
            ridge = [((t1 + t2) / 2.0, h_t)]
        return _erect(host, f1, t1, t2, ridge, EditCondition.CONCAVE, target_area)
    raise NoSuitableSite("no deep cavity fits the requested patch area")


def _edit_nofill(host, rng, target_area):
    n = len(host)
    cavities = [
        c for c in find_concavities(host) if not c.deep and len(c.chain) == 1
    ]
    if not cavities:
        raise NoSuitableSite("no shallow single-vertex cavity")
    for pick in rng.permutation(len(cavities)):
        cav = cavities[int(pick)]
        j = cav.chain[0]
        apex = host[j]
        u = host[(j - 1) % n] - apex  # along the incoming wall, toward prev
        v = host[(j + 1) % n] - apex  # along the outgoing wall, toward next
        lu, lv = float(np.hypot(*u)), float(np.hypot(*v))
        sin_phi = abs(u[0] * v[1] - u[1] * v[0]) / (lu * lv)
        if sin_phi < 1e-9:
            continue
        # cut the notch tip flush, wall to wall: the new floor leaves no
        # narrow gap for a coarse body to bridge, so the visible change is
        # essentially the patch itself
        cap = min(0.85, 1.0 - _CHORD_CLEAR / cav.depth)
        if cap <= 0:
            continue
        a_max, b_max = cap * lu, cap * lv
        rho = math.exp(rng.uniform(-0.35, 0.35))
        side = math.sqrt(2.0 * target_area / sin_phi)
        a, b = side * math.sqrt(rho), side / math.sqrt(rho)
        if a > a_max:
            a = a_max
            b = 2.0 * target_area / (a * sin_phi)
        if b > b_max:
            b = b_max
            a = 2.0 * target_area / (b * sin_phi)
        if not (0.0 < a <= a_max and 0.0 < b <= b_max):
            continue
        p = apex + (a / lu) * u
        q = apex + (b / lv) * v
        patch = np.array([q, apex, p])  # CCW; floor q -> p is first/last
        if abs(polygon_area(patch) - target_area) > 1e-9:
            raise AssertionError("patch area drifted from target")
        out = np.vstack([host[:j], [p, q], host[j + 1 :]])
        if not is_simple(out):
            continue
        piece = EditPiece(
            patch=patch,
            host_edge=(j - 1) % n,
            condition=EditCondition.NOFILL,
            area=float(polygon_area(patch)),
        )
        return out, piece
    raise NoSuitableSite("no shallow cavity fits the requested patch area")


def make_edit(
    poly: np.ndarray,
    condition: EditCondition,
    rel_area: float,
    seed: int,
) -> tuple[np.ndarray, EditPiece]:
    """Attach a patch of exactly ``rel_area * polygon_area(poly)`` to the
    polygon, at a location matching ``condition``:

    - CONVEX: isoceles bump erected outward on a hull edge
    - CONCAVE: profile filling the floor of a deep cavity, fully inside the hull
    - NOFILL: flush triangular fill of a shallow cavity's tip, wall to wall

    The out polygon stays simple and CCW, and its area grows by exactly the
    patch area (within 1e-9). CONVEX and CONCAVE preserve every host vertex;
    NOFILL consumes the cavity apex, which ends up interior to the filled
    region. Raises NoSuitableSite when no matching location fits the patch.
    """
    if condition is EditCondition.NOCHANGE:
        raise ValueError("NOCHANGE is not an edit; duplicate the trial instead")
    if not 0.0 < rel_area <= 0.15:
        raise ValueError(f"rel_area must be in (0, 0.15], got {rel_area}")
    host = np.asarray(poly, dtype=float)
    area = polygon_area(host)
    if area <= 0 or not is_simple(host):
        raise ValueError("host polygon must be simple and counter-clockwise")
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(_TAG_EDIT,))
    )
    target_area = rel_area * area
    if condition is EditCondition.CONVEX:
        return _edit_convex(host, rng, target_area)
    if condition is EditCondition.CONCAVE:
        return _edit_concave(host, rng, target_area)
    return _edit_nofill(host, rng, target_area)
