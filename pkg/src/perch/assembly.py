"""Master contour and piecewise jump matrix for the (y, t) problem.

build_master_contour lays out the oriented segment set the solver
integrates over: the truncated real axis, the circle |k| = 1/2, small
circles of radius eps about +-i/2, every branch cut of the selected
root, and one positively oriented disk per root pole carrying its
residue condition as an equivalent jump.  Orientations follow one fixed
rule set: real-axis pieces run left to right, the circle runs from +1/2
toward -1/2 through each half-plane (counterclockwise above, clockwise
below), the eps-circle at i/2 is clockwise and its mirror at -i/2
counterclockwise, vertical cuts run away from the origin, and residue
disks are counterclockwise.  The plus side of every piece is the left
side when walking along it; note that on the left real half-axis this
differs from the away-from-origin convention used by the probe helper
eval_R.

Region tags on segments select the jump formula:

  real_outer / real_inner        plain real axis, |k| above / below 1/2
  cut_hor_outer / cut_hor_inner  real-axis pieces covered by a cut
  circle                         |k| = 1/2 away from the eps-disks
  circle_eps                     |k| = 1/2 inside an eps-disk
  eps_outer / eps_inner          eps-circle arcs, |k| above / below 1/2
  cut_vert                       cuts on the imaginary axis
  disk                           residue disks

The time dependence enters through the scalar phase
p(y, t, k) = y - t / (2 (k^2 + 1/4)): the jump at (y, t) is the k-fixed
matrix conjugated by exp(-i k p sigma3), except on residue disks, where
the phase is evaluated at the pole itself.
"""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import ContourConfig
from .contour import Segment, build_panels
from .errors import (BadGeometry, DenominatorCollapse, DiskOverlap,
                     CrossValidationFailure, JumpConsistencyError, PhasePole,
                     SideRequired, UnknownRegion)
from .mat2 import I2, det2, frob, sigma1_conj

REAL_TAGS = ("real_outer", "real_inner", "cut_hor_outer", "cut_hor_inner")
UPPER_LOWER_TAGS = ("circle", "circle_eps", "eps_outer", "eps_inner")
CUT_TAGS = ("cut_hor_outer", "cut_hor_inner", "cut_vert")
ALL_TAGS = REAL_TAGS + UPPER_LOWER_TAGS + ("cut_vert", "disk")

ORIGIN_STUB = 0.03        # ungraded panel length abutting k = 0
EPS_FLOOR = 0.02          # smallest admissible eps-circle radius
CLEARANCE = 0.01          # required gap between eps-circles and cuts
AXIS_TOL = 1e-9           # how close to an axis counts as on it


# ------------------------------------------------------------ contour


@dataclass
class MasterContour:
    """Oriented segments of the jump contour plus build bookkeeping."""
    segments: list
    eps: float
    k_max: float
    disk_radius: float
    theta: float
    L: float
    notes: list = field(default_factory=list)

    def by_label(self, label):
        return [s for s in self.segments if s.label == label]

    def describe(self):
        counts = {}
        for s in self.segments:
            counts[s.label] = counts.get(s.label, 0) + 1
        parts = [f"{counts[t]} {t}" for t in sorted(counts)]
        return (f"{len(self.segments)} segments ({', '.join(parts)}), "
                f"eps {self.eps:g}, window {self.k_max:g}")


def _dist_point_cut(z, cut):
    """Distance from a complex point to an axis-aligned cut."""
    if cut.axis == "real":
        lo, hi, u, v = cut.lo, cut.hi, z.real, z.imag
    else:
        lo, hi, u, v = cut.lo, cut.hi, z.imag, -z.real
    du = max(lo - u, 0.0, u - hi)
    return float(np.hypot(du, v))


def _shrunk_eps(sr, ccfg):
    """Largest eps <= the configured radius clearing cuts and disks."""
    eps = min(ccfg.eps_circle, 0.4)
    bound = eps
    r_d = ccfg.disk_radius
    for c in sr.cuts.cuts:
        for z in (0.5j, -0.5j):
            bound = min(bound, _dist_point_cut(z, c) - CLEARANCE)
    for p in sr.poles:
        for mu in (p.mu, np.conj(p.mu)):
            for z in (0.5j, -0.5j):
                bound = min(bound, abs(mu - z) - 1.25 * r_d)
    if bound < EPS_FLOOR:
        raise BadGeometry(
            f"no admissible eps-circle radius: best candidate {bound:.3g} "
            f"is under the floor {EPS_FLOOR:g}")
    if bound < eps:
        warnings.warn(f"eps-circle radius shrunk from {eps:g} to {bound:.6g} "
                      "to clear cuts and residue disks", stacklevel=3)
    return bound


def _check_disks(centers, r_d, eps, imag_cuts):
    """Residue disks must be pairwise disjoint and clear of everything."""
    pad = 1.25 * r_d
    for i, z in enumerate(centers):
        if abs(z.imag) < pad:
            raise DiskOverlap(f"residue disk at {z:.6g} touches the real axis")
        if abs(abs(z) - 0.5) < pad:
            raise DiskOverlap(f"residue disk at {z:.6g} touches |k| = 1/2")
        for c in (0.5j, -0.5j):
            if abs(z - c) < eps + pad:
                raise DiskOverlap(f"residue disk at {z:.6g} touches the "
                                  f"eps-circle at {c}")
        for c in imag_cuts:
            if abs(z.real) < pad and c.lo - pad < z.imag < c.hi + pad:
                raise DiskOverlap(f"residue disk at {z:.6g} touches a "
                                  "vertical cut")
        for w in centers[i + 1:]:
            if abs(z - w) < 2 * r_d + 0.5 * r_d:
                raise DiskOverlap(f"residue disks at {z:.6g} and {w:.6g} "
                                  "collide")


def _real_axis_segments(sr, k_max, notes):
    cuts = sr.cuts.real_cuts
    pts = {-k_max, k_max, -0.5, 0.5, 0.0, -ORIGIN_STUB, ORIGIN_STUB}
    branch_pts = set()
    for c in cuts:
        pts.update((c.lo, c.hi))
        branch_pts.update((c.lo, c.hi))
        if c.lo < -0.5 < c.hi or c.lo < 0.5 < c.hi:
            notes.append(f"horizontal cut [{c.lo:.6g}, {c.hi:.6g}] straddles "
                         "|k| = 1/2; split at the circle")
    xs = sorted(x for x in pts if -k_max <= x <= k_max)
    xs = [x for i, x in enumerate(xs) if i == 0 or x - xs[i - 1] > 1e-9]
    segs = []
    for x0, x1 in zip(xs[:-1], xs[1:]):
        mid = 0.5 * (x0 + x1)
        on_cut = sr.cuts.on_cut("real", mid) is not None
        tag = (("cut_hor_" if on_cut else "real_")
               + ("outer" if abs(mid) > 0.5 else "inner"))
        gs = x0 in branch_pts or x0 in (-0.5, 0.5) or x0 == ORIGIN_STUB
        ge = x1 in branch_pts or x1 in (-0.5, 0.5) or x1 == -ORIGIN_STUB
        segs.append(Segment("line", a=complex(x0), b=complex(x1), label=tag,
                            grade_start=gs, grade_end=ge))
    return segs


def _circle_segments(eps):
    lo = float(np.arcsin(1.0 - 2.0 * eps * eps))
    hi = np.pi - lo
    up = [Segment("arc", center=0j, radius=0.5, phi1=p1, phi2=p2, label=lab,
                  grade_start=gs, grade_end=ge)
          for p1, p2, lab, gs, ge in
          [(0.0, lo, "circle", True, True),
           (lo, np.pi / 2, "circle_eps", True, True),
           (np.pi / 2, hi, "circle_eps", True, True),
           (hi, np.pi, "circle", True, True)]]
    down = [Segment("arc", center=0j, radius=0.5, phi1=-p1, phi2=-p2,
                    label=lab, grade_start=gs, grade_end=ge)
            for p1, p2, lab, gs, ge in
            [(0.0, lo, "circle", True, True),
             (lo, np.pi / 2, "circle_eps", True, True),
             (np.pi / 2, hi, "circle_eps", True, True),
             (hi, np.pi, "circle", True, True)]]
    return up + down


def _eps_segments(eps):
    h = float(np.arcsin(min(eps, 0.999)))
    upper = [Segment("arc", center=0.5j, radius=eps, phi1=np.pi + h,
                     phi2=-h, label="eps_outer"),
             Segment("arc", center=0.5j, radius=eps, phi1=-h,
                     phi2=-np.pi + h, label="eps_inner")]
    lower = [Segment("arc", center=-0.5j, radius=eps, phi1=np.pi - h,
                     phi2=2 * np.pi + h, label="eps_outer"),
             Segment("arc", center=-0.5j, radius=eps, phi1=h,
                     phi2=np.pi - h, label="eps_inner")]
    return upper + lower


def _vertical_cut_segments(sr):
    segs = []
    for c in sr.cuts.imag_cuts:
        pieces = []
        if c.lo < 0.0 < c.hi:
            pieces.append((0.0, c.hi))
            pieces.append((0.0, c.lo))
        else:
            far = c.hi if abs(c.hi) >= abs(c.lo) else c.lo
            near = c.lo if far is c.hi else c.hi
            pieces.append((near, far))
        for near, far in pieces:
            if near == 0.0:
                stub = ORIGIN_STUB * np.sign(far)
                segs.append(Segment("line", a=0j, b=1j * stub,
                                    label="cut_vert"))
                segs.append(Segment("line", a=1j * stub, b=1j * far,
                                    label="cut_vert", grade_start=True,
                                    grade_end=True))
            else:
                segs.append(Segment("line", a=1j * near, b=1j * far,
                                    label="cut_vert", grade_start=True,
                                    grade_end=True))
    return segs


def _disk_segments(sd, sr, r_d, theta):
    """Two half-circle arcs per residue disk, counterclockwise."""
    segs = []
    for p in sr.poles:
        mu = complex(p.mu)
        c = complex(p.residue)
        a_mu, _, astar_mu, _ = (complex(v[0]) for v in
                                sd.ab(np.array([mu])))
        if p.region == "upper_outer":
            plain = ("D1", a_mu * a_mu * c)
            conj = ("D4", astar_mu * astar_mu * np.conj(c))
        else:
            plain = ("D3", np.exp(2j * mu * theta) * c)
            conj = ("D2", np.exp(-2j * np.conj(mu) * theta) * np.conj(c))
        for center, (dreg, wconst) in ((mu, plain), (np.conj(mu), conj)):
            meta = {"mu": center, "dregion": dreg, "wconst": wconst,
                    "res": c if dreg in ("D1", "D3") else np.conj(c)}
            for p1, p2 in ((-np.pi / 2, np.pi / 2),
                           (np.pi / 2, 3 * np.pi / 2)):
                segs.append(Segment("arc", center=center, radius=r_d,
                                    phi1=p1, phi2=p2, label="disk",
                                    meta=dict(meta)))
    return segs


def build_master_contour(sr, *, ccfg=None):
    """Assemble the full oriented contour for one set of scattering data.

    Shrinks the eps-circles (with a warning) when the configured radius
    would clash with cuts or residue disks, splits every piece so that
    each segment carries a single region tag, and keeps k = 0, +-1/2 and
    +-i/2 as segment endpoints only, never interior quadrature targets.
    """
    ccfg = ccfg or ContourConfig()
    notes = []
    eps = _shrunk_eps(sr, ccfg)
    r_d = ccfg.disk_radius
    centers = []
    for p in sr.poles:
        centers.extend((complex(p.mu), complex(np.conj(p.mu))))
    _check_disks(centers, r_d, eps, sr.cuts.imag_cuts)
    segs = _real_axis_segments(sr, sr.k_max, notes)
    segs += _circle_segments(eps)
    segs += _eps_segments(eps)
    segs += _vertical_cut_segments(sr)
    segs += _disk_segments(sr.sd, sr, r_d, sr.theta)
    if centers:
        notes.append(f"{len(centers)} residue disks of radius {r_d:g}")
    return MasterContour(segments=segs, eps=eps, k_max=sr.k_max,
                         disk_radius=r_d, theta=sr.theta, L=sr.sd.mp.L,
                         notes=notes)


def panelize(mc, ccfg=None, order=None):
    """Gauss-Legendre panels over the master contour."""
    ccfg = ccfg or ContourConfig()
    per = {"circle": ccfg.panel_circle, "circle_eps": 0.6 * ccfg.panel_circle,
           "eps_outer": 0.6 * ccfg.panel_circle,
           "eps_inner": 0.6 * ccfg.panel_circle,
           "cut_vert": ccfg.panel_circle,
           "cut_hor_outer": ccfg.panel_circle,
           "cut_hor_inner": ccfg.panel_circle,
           "disk": 0.5 * np.pi * mc.disk_radius}
    return build_panels(mc.segments, order=order or ccfg.panel_order,
                        target_len=ccfg.panel_real, levels=ccfg.grade_levels,
                        ratio=ccfg.grade_ratio, per_label_len=per)


# ------------------------------------------------------------ phase


def _phase_raw(y, t, k):
    return y - t / (2.0 * (k * k + 0.25))


def phase_p_hat(y, t, k, *, eps=None):
    """Scalar phase p(y, t, k) = y - t / (2 (k^2 + 1/4)).

    Even in k; reduces to y at t = 0.  Refuses evaluation within half an
    eps-circle radius of the poles at +-i/2 (jump assembly on the circle
    inside the eps-disk bypasses the guard: there the factor multiplying
    the phase exponential vanishes at i/2, keeping entries bounded).
    """
    eps = ContourConfig().eps_circle if eps is None else eps
    ks = np.asarray(k, dtype=complex)
    guard = 0.5 * eps
    if np.any(np.abs(ks - 0.5j) < guard) or np.any(np.abs(ks + 0.5j) < guard):
        raise PhasePole(f"phase evaluation within {guard:g} of a pole "
                        "at +-i/2")
    out = _phase_raw(y, t, ks)
    return complex(out) if out.shape == () else out


# ------------------------------------------------------------ G-functions


def _sided_roots(sr, ks, side, variant="plain"):
    """Boundary values of a root and its conjugate on a cut.

    plus is the left side of the contour orientation: the upper half
    plane on real cuts (they run rightward), the side away from the
    travel direction's right on vertical cuts (Re k < 0 on the upper
    piece, Re k > 0 on the lower one).
    """
    flat = np.atleast_1d(ks)
    K = np.empty(flat.shape, dtype=complex)
    Ks = np.empty(flat.shape, dtype=complex)
    on_real = np.abs(flat.imag) <= AXIS_TOL
    on_imag = ~on_real & (np.abs(flat.real) <= AXIS_TOL)
    if np.any(~(on_real | on_imag)):
        raise BadGeometry("sided evaluation requires points on an axis cut")
    if np.any(on_real):
        app = 1.0 if side == "plus" else -1.0
        xs = flat.real[on_real]
        K[on_real] = sr.boundary("real", xs, app, variant)
        Ks[on_real] = sr.boundary_star("real", xs, app, variant)
    for sgn in (1.0, -1.0):
        sel = on_imag & (np.sign(flat.imag) == sgn)
        if not np.any(sel):
            continue
        app = -sgn if side == "plus" else sgn
        xs = flat.imag[sel]
        K[sel] = sr.boundary("imag", xs, app, variant)
        Ks[sel] = sr.boundary_star("imag", xs, app, variant)
    return K, Ks


def _cross_check(name, first, second, ks):
    scale = np.maximum(1.0, np.maximum(np.abs(first), np.abs(second)))
    bad = np.abs(first - second) > 1e-8 * scale
    if np.any(bad):
        i = int(np.argmax(np.abs(first - second) / scale))
        raise CrossValidationFailure(
            f"{name} forms disagree at k = {ks[i]:.6g}: "
            f"{first[i]:.9g} vs {second[i]:.9g}")


def _guard_denominator(name, value, floor=1e-10):
    if np.any(np.abs(value) < floor):
        raise DenominatorCollapse(
            f"{name} fell under {floor:g}; the sheet labeling is wrong "
            "upstream")


def _g_core(sd, sr, ks, side):
    """Vectorized sextet (G, G1, Gt, Gt1, G2, G3) with dual-form checks."""
    flat = np.atleast_1d(np.asarray(ks, dtype=complex))
    if sr.trivial:
        z = np.zeros(flat.shape, dtype=complex)
        return (z,) * 6
    theta, L = sr.theta, sd.mp.L
    a, b, astar, bstar = sd.ab(flat)
    phL = np.exp(1j * flat * (L - theta))
    at, bt = a * phL, b * phL
    ats, bts = astar / phL, bstar / phL
    if side == "off":
        K, Ks = sr.R(flat), sr.R_star(flat)
        if sr.same_branch:
            Kt, Kts = K, Ks
        else:
            Kt, Kts = sr.R_tilde(flat), sr.R_tilde_star(flat)
    elif side in ("plus", "minus"):
        K, Ks = _sided_roots(sr, flat, side)
        if sr.same_branch:
            Kt, Kts = K, Ks
        else:
            Kt, Kts = _sided_roots(sr, flat, side, "tilde")
    else:
        raise BadGeometry(f"unknown side {side!r}")
    e2t = np.exp(-2j * flat * theta)
    e2L = np.exp(-2j * flat * L)
    den = a - b * Ks
    dent = at - bt * Kts
    _guard_denominator("a", a)
    _guard_denominator("a~", at)
    _guard_denominator("a - b K*", den)
    _guard_denominator("a~ - b~ K~*", dent)
    G_div = Ks / (a * den)
    G = Ks * e2t + bstar / a
    G1_div = a * K / (den * e2t)
    G1 = a * a * K - a * b
    Gt_div = Kts / (at * dent)
    Gt = Kts * e2L + bts / at
    Gt1_div = at * Kt / (dent * e2L)
    Gt1 = at * at * Kt - at * bt
    _cross_check("G", G_div, G, flat)
    _cross_check("G1", G1_div, G1, flat)
    _cross_check("G~", Gt_div, Gt, flat)
    _cross_check("G~1", Gt1_div, Gt1, flat)
    if sr.same_branch:
        zero = np.zeros(flat.shape, dtype=complex)
        return G, G1, Gt, Gt1, zero, zero
    phLt = np.exp(1j * flat * (L + theta))
    den2 = (a + bstar * K / e2t) * (at + bts * Kt / e2L)
    _guard_denominator("G2 denominator", den2)
    G2_div = a * at * phLt * (K - Kt) / den2
    G2 = a * at * (K - Kt)
    G3_div = (Ks - Kts) / (den * dent)
    G3 = (Ks - Kts) / phLt
    _cross_check("G2", G2_div, G2, flat)
    _cross_check("G3", G3_div, G3, flat)
    return G, G1, Gt, Gt1, G2, G3


def g_functions(sd, sr, k, side="off"):
    """The six jump building blocks at one point.

    G and G1 drive the circle and plain real-axis jumps, their tilde
    versions the circle piece inside the eps-disks, and G2 / G3 the
    eps-circles; the last two are identically zero whenever both root
    normalizations pick the same branch.  Every value is computed from
    two algebraically equal forms and cross-checked to 1e-8.
    """
    out = _g_core(sd, sr, complex(k), side)
    return tuple(complex(v[0]) for v in out)


# ------------------------------------------------------------ jumps


class JumpSpec:
    """Evaluator for the piecewise jump matrix on the master contour.

    j0_stack gives the t-independent matrix per region tag; jump_stack
    conjugates it with the phase exponential.  Residue disks are the one
    exception: their nilpotent entry carries the phase evaluated at the
    pole, exactly as the residue conditions prescribe.
    """

    def __init__(self, sd, sr, mc):
        self.sd = sd
        self.sr = sr
        self.mc = mc
        self.theta = sr.theta
        self.L = sd.mp.L
        self.same_branch = sr.same_branch

    # -------------------------------------------- t = 0 matrices

    def _j0_real(self, flat, tag, side):
        a, b, astar, bstar = self.sd.ab(flat)
        r = bstar / a
        rs = b / astar
        out = np.empty(flat.shape + (2, 2), dtype=complex)
        mid = np.empty_like(out)
        mid[..., 0, 0] = 1.0 - r * rs
        mid[..., 0, 1] = rs
        mid[..., 1, 0] = -r
        mid[..., 1, 1] = 1.0
        g_side = side if tag.startswith("cut_hor") else "off"
        G, G1, _, _, _, _ = _g_core(self.sd, self.sr, flat, g_side)
        left = np.zeros_like(out)
        right = np.zeros_like(out)
        left[..., 0, 0] = left[..., 1, 1] = 1.0
        right[..., 0, 0] = right[..., 1, 1] = 1.0
        if tag.endswith("outer"):
            left[..., 1, 0] = -np.conj(G1)
            right[..., 0, 1] = G1
        else:
            left[..., 0, 1] = -np.conj(G)
            right[..., 1, 0] = G
        return left @ mid @ right

    def _j0_upper(self, flat, tag):
        out = np.zeros(flat.shape + (2, 2), dtype=complex)
        if tag in ("circle", "circle_eps"):
            G, G1, Gt, Gt1, _, _ = _g_core(self.sd, self.sr, flat, "off")
            up, lo = (Gt1, Gt) if tag == "circle_eps" else (G1, G)
            out[..., 0, 0] = 1.0 - up * lo
            out[..., 0, 1] = -up
            out[..., 1, 0] = lo
            out[..., 1, 1] = 1.0
            return out
        ph = np.exp(1j * flat * (self.L - self.theta))
        _, _, _, _, G2, G3 = _g_core(self.sd, self.sr, flat, "off")
        out[..., 0, 0] = ph
        out[..., 1, 1] = 1.0 / ph
        if tag == "eps_outer":
            out[..., 0, 1] = G2
        else:
            out[..., 1, 0] = G3
        return out

    def _j0_vert(self, flat, side):
        if side not in ("plus", "minus"):
            raise SideRequired("vertical-cut jump needs side plus or minus")
        Kp, Ksp = _sided_roots(self.sr, flat, "plus")
        Km, Ksm = _sided_roots(self.sr, flat, "minus")
        out = np.zeros(flat.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = out[..., 1, 1] = 1.0
        upper = flat.imag > 0
        e2t = np.exp(-2j * flat * self.theta)
        out[..., 1, 0] = np.where(upper, e2t * (Ksp - Ksm), 0.0)
        out[..., 0, 1] = np.where(upper, 0.0, (Kp - Km) / e2t)
        return out

    def j0_stack(self, ks, tag, side=None):
        """Stacked t-independent jump matrices for one region tag."""
        flat = np.atleast_1d(np.asarray(ks, dtype=complex))
        if tag in CUT_TAGS and side not in ("plus", "minus"):
            raise SideRequired(f"region {tag} needs side plus or minus")
        if tag in ("real_outer", "real_inner", "cut_hor_outer",
                   "cut_hor_inner"):
            return self._j0_real(flat, tag, side)
        if tag in UPPER_LOWER_TAGS:
            out = np.empty(flat.shape + (2, 2), dtype=complex)
            up = flat.imag >= 0.0
            if np.any(up):
                out[up] = self._j0_upper(flat[up], tag)
            if np.any(~up):
                ref = self._j0_upper(np.conj(flat[~up]), tag)
                out[~up] = sigma1_conj(np.conj(ref))
            return out
        if tag == "cut_vert":
            return self._j0_vert(flat, side)
        if tag == "disk":
            return self.jump_stack(0.0, 0.0, flat, tag)
        raise UnknownRegion(f"no jump rule for region tag {tag!r}")

    def j0(self, k, tag, side=None):
        return self.j0_stack(complex(k), tag, side)[0]

    # -------------------------------------------- disks

    def _disk_meta(self, k):
        best, dist = None, np.inf
        for s in self.mc.by_label("disk"):
            d = abs(complex(k) - s.center)
            if d < dist:
                best, dist = s, d
        if best is None or dist > 3.0 * self.mc.disk_radius:
            raise BadGeometry(f"{complex(k):.6g} is not on a residue disk")
        return best.meta

    def _disk_stack(self, y, t, flat, meta):
        mu = meta["mu"]
        sgn = -1.0 if meta["dregion"] in ("D1", "D3") else 1.0
        w = meta["wconst"] * np.exp(sgn * 2j * mu * _phase_raw(y, t, mu))
        out = np.zeros(flat.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = out[..., 1, 1] = 1.0
        entry = -w / (flat - mu)
        if sgn < 0:
            out[..., 0, 1] = entry
        else:
            out[..., 1, 0] = entry
        return out

    # -------------------------------------------- assembled jump

    def jump_stack(self, y, t, ks, tag, side=None):
        """Jump matrices at (y, t) for nodes sharing one region tag."""
        flat = np.atleast_1d(np.asarray(ks, dtype=complex))
        if tag == "disk":
            return self._disk_stack(y, t, flat, self._disk_meta(flat.ravel()[0]))
        out = self.j0_stack(flat, tag, side).copy()
        e = np.exp(-2j * flat * _phase_raw(y, t, flat))
        out[..., 0, 1] *= e
        out[..., 1, 0] /= e
        return out

    def jump(self, y, t, k, tag, side=None):
        return self.jump_stack(y, t, complex(k), tag, side)[0]


def build_jump_spec(sd, sr, mc):
    """Bind scattering data, sheeted root, and contour into an evaluator."""
    return JumpSpec(sd, sr, mc)


def jump_at(js, y, t, k, tag, side=None):
    """The assembled jump matrix at one contour point.

    The region tag picks the formula; side is required on cut tags (the
    matrix itself is side independent, since the cut formulas pin their
    own boundary values, but evaluation on a cut without side awareness
    is a caller bug).  Unknown tags raise UnknownRegion.
    """
    return js.jump(y, t, k, tag, side)


def residue_to_disk(js, mu, res, dregion, y, t):
    """Disk segment and nilpotent jump part for one residue condition.

    The returned matrix N is the numerator of the rank-one pole term:
    the jump on the (counterclockwise) disk is I - N / (k - mu), which
    transfers the residue of the solution column at mu into a jump, so
    the solver never sees the pole itself.  The triangularity direction
    and the weight follow the residue conditions for the four regions
    split by the real axis and |k| = 1/2.
    """
    mu = complex(mu)
    r_d = js.mc.disk_radius
    region_ok = {"D1": mu.imag > 0 and abs(mu) > 0.5,
                 "D2": mu.imag > 0 and abs(mu) < 0.5,
                 "D3": mu.imag < 0 and abs(mu) < 0.5,
                 "D4": mu.imag < 0 and abs(mu) > 0.5}
    if dregion not in region_ok:
        raise UnknownRegion(f"unknown residue region {dregion!r}")
    if not region_ok[dregion]:
        raise BadGeometry(f"pole {mu:.6g} is not in region {dregion}")
    _check_disks([mu], r_d, js.mc.eps, js.sr.cuts.imag_cuts)
    if dregion == "D1":
        a_mu = complex(js.sd.ab(np.array([mu]))[0][0])
        wconst = a_mu * a_mu * res
    elif dregion == "D3":
        wconst = np.exp(2j * mu * js.theta) * res
    elif dregion == "D2":
        wconst = np.exp(-2j * mu * js.theta) * res
    else:
        astar_mu = complex(js.sd.ab(np.array([mu]))[2][0])
        wconst = astar_mu * astar_mu * res
    sgn = -1.0 if dregion in ("D1", "D3") else 1.0
    w = wconst * np.exp(sgn * 2j * mu * _phase_raw(y, t, mu))
    N = np.zeros((2, 2), dtype=complex)
    N[0, 1] if sgn < 0 else N[1, 0]
    if sgn < 0:
        N[0, 1] = w
    else:
        N[1, 0] = w
    seg = Segment("arc", center=mu, radius=r_d, phi1=-np.pi / 2,
                  phi2=1.5 * np.pi, label="disk",
                  meta={"mu": mu, "dregion": dregion, "wconst": wconst,
                        "res": res})
    return seg, N


# ------------------------------------------------------------ diagnostics


def _node_side(tag):
    return "plus" if tag in CUT_TAGS else None


def jump_diagnostics(js, y=0.0, t=0.0, n=200, seed=5, ccfg=None):
    """Determinant, symmetry, and seam defects over sampled nodes.

    Samples up to n quadrature nodes, evaluates the jump at each node k
    and at its images -k and -conj(k) (same region tag by symmetry of
    the contour), and reports the worst determinant defect |det - 1|,
    the two symmetry defects, and the factorization seam mismatch at
    k = +-1/2.  Cut tags compare against the side-mapped image: the
    reflection k -> -conj(k) keeps the side on horizontal cuts and swaps
    it on vertical ones, and k -> -k does the opposite.
    """
    ps = panelize(js.mc, ccfg)
    rng = np.random.default_rng(seed)
    idx = rng.permutation(ps.n)[:n]
    det_defect = 0.0
    sym1 = 0.0
    sym2 = 0.0
    for i in idx:
        panel = ps.panel_of_node(i)
        tag = panel.label
        k = complex(ps.nodes[i])
        side = _node_side(tag)
        if tag == "disk":
            j = js.jump_stack(y, t, np.array([k]), tag)[0]
            det_defect = max(det_defect, abs(det2(j) - 1.0))
            continue
        j = js.jump(y, t, k, tag, side)
        det_defect = max(det_defect, abs(det2(j) - 1.0))
        if tag == "cut_vert":
            s1, s2 = ("minus", "plus")
        elif tag in ("cut_hor_outer", "cut_hor_inner"):
            s1, s2 = ("plus", "minus")
        else:
            s1 = s2 = None
        j_refl = js.jump(y, t, -np.conj(k), tag, s1)
        j_neg = js.jump(y, t, -k, tag, s2)
        sym1 = max(sym1, float(frob(j - np.conj(j_refl))))
        sym2 = max(sym2, float(frob(j - sigma1_conj(j_neg)[::-1, ::-1].T.T)))
        sym2 = max(sym2, float(frob(j - sigma1_conj(j_neg))))
    seam = 0.0
    for x in (0.5, -0.5):
        if js.sr.cuts.on_cut("real", x) is not None:
            continue
        j_out = js.jump(y, t, complex(x), "real_outer")
        j_in = js.jump(y, t, complex(x), "real_inner")
        seam = max(seam, float(frob(j_out - j_in)))
    return {"det": det_defect, "sym_reflect": sym1, "sym_negate": sym2,
            "seam": seam, "nodes_checked": int(len(idx))}


def check_jumps(js, tol=None, **kw):
    """Raise JumpConsistencyError when diagnostics exceed tolerance."""
    from .config import Tolerances
    tol = tol or Tolerances()
    d = jump_diagnostics(js, **kw)
    if d["det"] > 1e-9 or d["sym_reflect"] > 1e-9 or d["sym_negate"] > 1e-9:
        raise JumpConsistencyError(
            f"jump det/symmetry defects {d['det']:.3g}, "
            f"{d['sym_reflect']:.3g}, {d['sym_negate']:.3g} exceed 1e-9")
    if d["seam"] > 1e-7:
        raise JumpConsistencyError(
            f"factorization seam defect {d['seam']:.3g} exceeds 1e-7")
    return d


def dump_contour_csv(js, path, *, y=0.0, t=0.0, ccfg=None):
    """Write nodes, region tags, and jump entries to a CSV file."""
    ps = panelize(js.mc, ccfg)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["re_k", "im_k", "tag",
                     "re_j11", "im_j11", "re_j12", "im_j12",
                     "re_j21", "im_j21", "re_j22", "im_j22"])
        for panel in ps.panels:
            tag = panel.label
            side = _node_side(tag)
            stack = js.jump_stack(y, t, panel.nodes, tag, side)
            for k, j in zip(panel.nodes, stack):
                wr.writerow([f"{k.real:.12g}", f"{k.imag:.12g}", tag,
                             *(f"{v:.12g}" for e in j.ravel()
                               for v in (e.real, e.imag))])
    return ps.n
