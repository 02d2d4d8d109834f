"""Direct scattering for the periodic spectral problem at t = 0.

The scalar problem

    psi_xx = (1/4) psi + lam (m0(x) + 1) psi,     lam = -k^2 - 1/4,

is integrated over one period [0, L] as a first-order 2x2 system, giving
the transfer matrix T(k) for (psi, psi_x).  Because m0 vanishes at the
period endpoints, the wave-basis change

    W = (1/2) (1, -1/(ik); 1, 1/(ik)),     W^{-1} = (1, 1; -ik, ik)

is the same constant matrix at both ends, and the monodromy in that basis
factorizes into spectral functions:

    M(k) = W T(k) W^{-1} = ( a e^{-ik theta},  -b e^{-ik theta}
                            -b* e^{ik theta},   a* e^{ik theta} ).

Here theta = y(L) and a*(k) = conj(a(conj(k))), b*(k) = conj(b(conj(k))).
One integration per k yields all four functions; det T = 1 forces
a a* - b b* = 1, and a(-k) = conj(a(conj(k))) ties the two half planes.

Also computed here: the k -> 0 pole data (a ~ i rho / k + a0,
b ~ -i rho / k + b0), the zeros of a on the segment (0, i/2) with their
norming constants, and the zeros of b* that later become poles of the
sheeted quadratic root.  Zero searches combine coarse scans with
argument-principle windings (phase continuation on cell boundaries, with
the k = 0 pole cancelled by a factor k) and batched refinement.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

from .config import ContourConfig, ScatteringConfig, Tolerances
from .errors import (BasisSingular, ClusterUnresolved, DerivativeTooSmall,
                     IdenticallyZero, MultiplicityDetected, NonGenericCase,
                     StiffnessFailure, VerificationFailure)
from .initial import trig_eval

_STAGES = _dop.N_STAGES                       # 12-stage order-8 scheme
_A = _dop.A[:_STAGES, :_STAGES]
_B = _dop.B
_C = _dop.C[:_STAGES]


def rk8_tableau():
    """(A, B, C) of the order-8 explicit scheme used by the integrator."""
    return _A.copy(), _B.copy(), _C.copy()


def integrate_transfer(m0, L, ks, n_steps):
    """Fixed-step RK8 for Y' = (0 1; q 0) Y over [0, L], batched over k.

    q(x, k) = 1/4 - (k^2 + 1/4)(m0(x) + 1).  Returns Y(L) with Y(0) = I,
    shape (len(ks), 2, 2).  The step count is chosen by the caller from
    the phase rate |k| sqrt(max m0 + 1).
    """
    ks = np.asarray(ks, dtype=complex)
    nk = len(ks)
    h = L / n_steps
    xs = (np.arange(n_steps)[:, None] + _C[None, :]) * h
    w = trig_eval(m0, L, xs.ravel()).reshape(n_steps, _STAGES) + 1.0
    coef = -(ks**2 + 0.25)                     # lam
    Y = np.zeros((nk, 2, 2), dtype=complex)
    Y[:, 0, 0] = Y[:, 1, 1] = 1.0
    K = np.zeros((_STAGES, nk, 2, 2), dtype=complex)
    hA = h * _A
    hB = h * _B
    for n in range(n_steps):
        q = 0.25 + np.multiply.outer(w[n], coef)   # (stages, nk)
        for i in range(_STAGES):
            Z = Y if i == 0 else Y + np.tensordot(hA[i, :i], K[:i], axes=1)
            K[i, :, 0, :] = Z[:, 1, :]
            K[i, :, 1, :] = q[i][:, None] * Z[:, 0, :]
        Y = Y + np.tensordot(hB, K, axes=1)
    return Y


@dataclass(frozen=True)
class TransferMatrix:
    k: complex
    lam: complex
    T: np.ndarray
    det_residual: float


def transfer_matrix(mp, k, steps_min=192, steps_per_k=12.0,
                    imag_guard=60.0, kmax_guard=None):
    """Transfer matrix of the scalar problem at one spectral value."""
    k = complex(k)
    if kmax_guard is None:
        # ten times the default real-axis truncation window
        kmax_guard = 10.0 * ContourConfig().k_window_factor * np.pi / mp.theta
    if abs(k) > kmax_guard:
        raise StiffnessFailure(f"|k| = {abs(k):.3g} beyond the {kmax_guard:.3g} guard")
    if abs(k.imag) * mp.theta > imag_guard:
        raise StiffnessFailure(
            f"|Im k| * theta = {abs(k.imag) * mp.theta:.3g} beyond the "
            f"{imag_guard} guard; growth would drown the subordinate solution")
    wmax = float(np.sqrt(np.max(mp.m0) + 1.0))
    n = _step_count(abs(k), wmax, mp.L, steps_min, steps_per_k)
    T = integrate_transfer(mp.m0, mp.L, np.array([k]), n)[0]
    det = T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0]
    return TransferMatrix(k, -k**2 - 0.25, T, float(abs(det - 1.0)))


def _step_count(kabs, wmax, L, steps_min, steps_per_k):
    n = max(steps_min, int(np.ceil(steps_per_k * kabs * wmax * L)))
    return ((n + 63) // 64) * 64               # bucket for batch reuse


@dataclass(frozen=True)
class ZeroExpansion:
    """Pole data of a and b at k = 0: a ~ i rho / k + a0, b ~ -i rho/k + b0."""
    rho: float
    a0: float
    b0: float
    rho_from_b: float
    fit_residual: float


@dataclass(frozen=True)
class EigenRecord:
    """One zero i nu of a on (0, i/2) with its norming data."""
    nu: float
    b_j: complex
    c_j: complex
    adot: complex


@dataclass(frozen=True)
class BStarZeroSet:
    """Zeros of b* split by region: upper outside |k|=1/2, lower inside.

    multiplicities aligns with .all; the search rejects anything that is
    not a simple zero, so entries are 1 in the generic case.
    """
    upper_outer: tuple
    lower_inner: tuple
    multiplicities: tuple = ()

    @property
    def all(self):
        return tuple(self.upper_outer) + tuple(self.lower_inner)


class ScatteringData:
    """Cached evaluator of (a, b, a*, b*) built from one MomentumProfile."""

    def __init__(self, mp, scfg=None, tol=None):
        self.mp = mp
        self.scfg = scfg or ScatteringConfig()
        self.tol = tol or Tolerances()
        self.theta = mp.theta
        self.wmax = float(np.sqrt(np.max(mp.m0) + 1.0))
        self._cache = {}
        self._coarse = {}

    # -------------------------------------------------- core evaluation

    def ab(self, ks):
        """Vectorized (a, b, a*, b*) at the given k values (k != 0)."""
        ks = np.atleast_1d(np.asarray(ks, dtype=complex))
        if np.any(ks == 0):
            raise BasisSingular("the wave basis is singular at k = 0; "
                                "use expand_at_zero for the pole data")
        guard = np.max(np.abs(ks.imag)) * self.theta
        if guard > self.scfg.imag_guard:
            raise StiffnessFailure(
                f"|Im k| * theta = {guard:.3g} beyond the guard")
        missing = sorted({k for k in ks.tolist() if k not in self._cache},
                         key=lambda z: (abs(z), z.real, z.imag))
        if missing:
            self._integrate_batch(np.asarray(missing))
        out = np.array([self._cache[k] for k in ks.tolist()])
        return out[:, 0], out[:, 1], out[:, 2], out[:, 3]

    def _integrate_batch(self, ks):
        steps = np.array([_step_count(abs(k), self.wmax, self.mp.L,
                                      self.scfg.ode_steps_min,
                                      self.scfg.ode_steps_per_k)
                          for k in ks])
        for n in np.unique(steps):
            sel = ks[steps == n]
            T = integrate_transfer(self.mp.m0, self.mp.L, sel, int(n))
            A, Bv, As, Bs = _unpack_monodromy(sel, T, self.theta)
            for i, k in enumerate(sel.tolist()):
                self._cache[k] = (A[i], Bv[i], As[i], Bs[i])

    def ab_coarse(self, ks):
        """Low-accuracy (~1e-4) evaluation for winding counts only.

        One step bucket per batch keeps the Python-level overhead of the
        integrator off the quadtree's critical path; integer windings are
        insensitive to this accuracy.
        """
        ks = np.atleast_1d(np.asarray(ks, dtype=complex))
        missing = [k for k in ks.tolist() if k not in self._coarse]
        if missing:
            arr = np.asarray(missing)
            n = _step_count(float(np.max(np.abs(arr))), self.wmax, self.mp.L,
                            64, 1.5)
            T = integrate_transfer(self.mp.m0, self.mp.L, arr, n)
            A, Bv, As, Bs = _unpack_monodromy(arr, T, self.theta)
            for i, k in enumerate(arr.tolist()):
                self._coarse[k] = (A[i], Bv[i], As[i], Bs[i])
        out = np.array([self._coarse[k] for k in ks.tolist()])
        return out[:, 0], out[:, 1], out[:, 2], out[:, 3]

    def ab_tilde(self, ks):
        """(a~, b~) = e^{ik(L - theta)} (a, b); a~(i/2) = 1."""
        ks = np.atleast_1d(np.asarray(ks, dtype=complex))
        a, b, _, _ = self.ab(ks)
        ph = np.exp(1j * ks * (self.mp.L - self.theta))
        return a * ph, b * ph

    def monodromy(self, ks):
        """Entries (M11, M12, M21, M22) of the monodromy matrix."""
        ks = np.atleast_1d(np.asarray(ks, dtype=complex))
        a, b, astar, bstar = self.ab(ks)
        ph = np.exp(1j * ks * self.theta)
        return a / ph, -b / ph, -bstar * ph, astar * ph

    def floquet_discriminant(self, ks):
        """Delta(k) = trace of the monodromy matrix."""
        m11, _, _, m22 = self.monodromy(ks)
        return m11 + m22

    def ab_deriv(self, ks, h=None):
        """d/dk of (a, b, a*, b*) by central differences."""
        ks = np.atleast_1d(np.asarray(ks, dtype=complex))
        h = h or self.scfg.fd_step
        hs = h * np.maximum(1.0, np.abs(ks))
        vp = self.ab(ks + hs)
        vm = self.ab(ks - hs)
        return tuple((p - m) / (2 * hs) for p, m in zip(vp, vm))

    # -------------------------------------------------- k -> 0 expansion

    def expand_at_zero(self, radii=None, n_fit=16, tau_rho=1e-8):
        """Fit the simple pole of a and b at k = 0 on small circles."""
        radii = radii or self.scfg.zero_fit_radii
        rows, va, vb = [], [], []
        for r in radii:
            ang = (np.arange(n_fit) + 0.5) * (2 * np.pi / n_fit)
            kc = r * np.exp(1j * ang)
            a, b, _, _ = self.ab(kc)
            rows.append(np.stack([1.0 / kc, np.ones(n_fit), kc, kc**2], axis=1))
            va.append(a)
            vb.append(b)
        X = np.vstack(rows)
        ca, res_a = _lstsq_resid(X, np.concatenate(va))
        cb, res_b = _lstsq_resid(X, np.concatenate(vb))
        rho_a = complex(-1j * ca[0])
        rho_b = complex(1j * cb[0])
        scale = max(abs(rho_a), abs(rho_b))
        if scale < tau_rho:
            raise NonGenericCase(
                f"|rho| = {scale:.2e} below {tau_rho:.0e}: k = 0 is not a "
                "simple pole of a, the generic-case pipeline does not apply")
        r0 = min(radii)
        if max(res_a, res_b) > 1e-6 * (scale / r0):
            raise VerificationFailure(
                f"pole fit residual {max(res_a, res_b):.2e} too large")
        for name, v in (("rho", rho_a), ("a0", complex(ca[1])),
                        ("b0", complex(cb[1]))):
            if abs(v.imag) > 1e-8 * max(1.0, abs(v)):
                raise VerificationFailure(
                    f"{name} = {v:.3e} should be real to 1e-8")
        if abs(rho_a - rho_b) > 1e-6 * max(1.0, scale):
            raise VerificationFailure(
                f"rho from a ({rho_a:.6e}) and from b ({rho_b:.6e}) disagree")
        return ZeroExpansion(rho_a.real, ca[1].real, cb[1].real,
                             rho_b.real, float(max(res_a, res_b)))

    # -------------------------------------------------- discrete spectrum

    def discrete_spectrum(self, n_scan=600, edge=1e-3):
        """Zeros i nu of a on (0, i/2): nu, b_j = b(i nu), c_j = 1/(b_j da)."""
        nus = np.linspace(edge, 0.5 - edge, n_scan)
        a, _, _, _ = self.ab(1j * nus)
        if np.max(np.abs(a.imag)) > 1e-7 * (1 + np.max(np.abs(a))):
            raise VerificationFailure("a is not real on the imaginary axis")
        ar = a.real
        roots = []
        for i in np.flatnonzero(np.signbit(ar[:-1]) != np.signbit(ar[1:])):
            roots.append(self._refine_a_zero(nus[i], nus[i + 1]))
        count = self._winding(lambda z: self.ab_coarse(z)[0],
                              -0.05 + 1j * edge, 0.05 + 1j * (0.5 - edge))
        if count != len(roots):
            raise MultiplicityDetected(
                f"argument principle counts {count} zeros of a in the strip, "
                f"scan found {len(roots)}")
        recs = []
        for nu in roots:
            k0 = 1j * nu
            da = self.ab_deriv(np.array([k0]))[0][0]
            b_j = self.ab(np.array([k0]))[1][0]
            if abs(da) < 1e-8:
                raise DerivativeTooSmall(f"|da/dk| = {abs(da):.2e} at k = {k0}")
            if abs(b_j) < 1e-12:
                raise DerivativeTooSmall(f"|b| = {abs(b_j):.2e} at k = {k0}")
            c_j = 1.0 / (b_j * da)
            if abs(c_j.real) > 1e-6 * abs(c_j):
                raise VerificationFailure(
                    f"norming constant {c_j:.3e} should be purely imaginary")
            recs.append(EigenRecord(float(nu), complex(b_j), complex(c_j),
                                    complex(da)))
        return recs

    def _refine_a_zero(self, lo, hi):
        # batched grid bisection: one evaluator call per 17x shrink
        for _ in range(14):
            grid = np.linspace(lo, hi, 18)
            vals = self.ab(1j * grid)[0].real
            idx = np.flatnonzero(np.signbit(vals[:-1]) != np.signbit(vals[1:]))
            if len(idx) == 0:
                break
            lo, hi = grid[idx[0]], grid[idx[0] + 1]
            if hi - lo < 1e-15:
                break
        return 0.5 * (lo + hi)

    # -------------------------------------------------- b* zero search

    def bstar_zeros(self, ccfg=None):
        """Zeros of b* in the upper-outer and lower-inner regions.

        Upper-outer zeros are found directly; lower-inner ones are the
        conjugates of zeros of b inside |k| < 1/2 in the upper half plane
        (b*(conj k) = conj(b(k))).  The always-present zero of b at i/2
        maps to the excluded circle around -i/2 and is dropped.  The
        factor k multiplied into both functions cancels their k = 0 pole
        so windings stay clean near the origin.
        """
        ccfg = ccfg or ContourConfig()
        W = self.k_window(ccfg)
        probes = np.linspace(0.13, W, 40) + 0.037j
        _, bprobe, _, bsprobe = self.ab_coarse(probes)
        scale = max(np.max(np.abs(bprobe)), np.max(np.abs(bsprobe)))
        if scale < 1e-12:
            raise IdenticallyZero("b vanishes identically; no poles to find")
        ymin, ymax = 1e-3, ccfg.mu_search_height
        # zeros inside the exclusion disk at i/2 are never reported, so a
        # square inscribed in it is masked from the search; this keeps the
        # ever-present zero of b at i/2 from driving deep quadtree descent.
        # off-round numbers keep stray zeros off the artificial seams.
        hw = 0.699 * ccfg.eps_circle
        sq = (-1.005 * hw + 1j * (0.5 - 0.995 * hw),
              0.995 * hw + 1j * (0.5 + 1.005 * hw))
        rect = (-W + 1j * ymin, W + 1j * ymax)
        rect_in = (-0.5617 + 1j * ymin, 0.5617 + 1j * min(0.5617, ymax))
        upper = self._zeros_in_rect(lambda z: z * self.ab_coarse(z)[3],
                                    _rect_minus_square(rect, sq),
                                    ccfg, polish=lambda z: z * self.ab(z)[3])
        inner = self._zeros_in_rect(lambda z: z * self.ab_coarse(z)[1],
                                    _rect_minus_square(rect_in, sq),
                                    ccfg, polish=lambda z: z * self.ab(z)[1])
        keep_u = [z for z in upper
                  if abs(z) > 0.5 and abs(z - 0.5j) > ccfg.eps_circle]
        keep_l = [np.conj(z) for z in inner
                  if abs(z) < 0.5 and abs(z - 0.5j) > ccfg.eps_circle]
        for z in keep_u:
            if 2 * abs(z.real) > 1e-8 and \
               not any(abs(w + np.conj(z)) < 1e-8 for w in keep_u):
                raise VerificationFailure(
                    f"zero {z:.6f} lacks its mirror under k -> -conj(k)")
        return BStarZeroSet(tuple(keep_u), tuple(keep_l),
                            (1,) * (len(keep_u) + len(keep_l)))

    def k_window(self, ccfg=None):
        """Half-width of the truncation window on the real axis."""
        ccfg = ccfg or ContourConfig()
        return ccfg.k_window_factor * np.pi / self.theta

    def _zeros_in_rect(self, f, rects, ccfg, polish=None):
        """Level-synchronous quadtree by argument-principle winding.

        rects seeds the tree (several cells allowed, e.g. a rectangle with
        a masked hole).  Windings are integers, so f may be a cheap
        low-accuracy evaluator; polish (default f) is used for the final
        Newton refinement and its residual check and should be accurate.
        """
        polish = polish or f
        cells = list(rects)
        zeros = []
        min_cell = 1e-3
        while cells:
            windings = self._windings_batched(f, cells, ccfg.winding_nodes)
            nxt = []
            for (lo, hi), wnd in zip(cells, windings):
                if wnd == 0:
                    continue
                size = max(hi.real - lo.real, hi.imag - lo.imag)
                if wnd == 1 and size <= ccfg.cell_size:
                    z = self._newton_zero(polish, 0.5 * (lo + hi))
                    if abs(z - 0.5 * (lo + hi)) > 2 * size and size > min_cell:
                        nxt += _subdivide(lo, hi)   # polish left the cell
                    else:
                        zeros.append(z)
                    continue
                if size <= min_cell:
                    raise ClusterUnresolved(
                        f"winding {wnd} persists in a {size:.1e} cell at "
                        f"{0.5 * (lo + hi):.4f}")
                nxt += _subdivide(lo, hi)
            cells = nxt
        out = []
        for z in zeros:
            if not any(abs(z - w) < 1e-9 for w in out):
                out.append(z)
        for i, z in enumerate(out):
            for w in out[:i]:
                if abs(z - w) < 1e-6:
                    raise ClusterUnresolved(
                        f"zeros {z:.8f} and {w:.8f} closer than 1e-6")
        return out

    def _windings_batched(self, f, cells, base_nodes):
        out = [None] * len(cells)
        todo = list(range(len(cells)))
        for mult in (1, 4, 16):
            pts = [_rect_boundary(*cells[i], base_nodes * mult,
                                  self._samples_per_unit() * mult)
                   for i in todo]
            vals = f(np.concatenate(pts)) if pts else np.empty(0)
            ofs = 0
            retry = []
            for i, p in zip(todo, pts):
                v = vals[ofs:ofs + len(p)]
                ofs += len(p)
                wnd = _phase_winding(v)
                if wnd is None:
                    retry.append(i)
                else:
                    out[i] = wnd
            todo = retry
            if not todo:
                break
        if todo:
            raise ClusterUnresolved(
                f"{len(todo)} winding cells kept failing after 16x "
                "densification; a zero sits on or next to a cell boundary")
        return out

    def _samples_per_unit(self):
        # phase rate of b, b* along real directions is bounded by the
        # oscillation of e^{+-ik theta} and e^{+-ikL}: keep steps well
        # under a radian of worst-case phase
        return 4.0 * (2 * self.theta + self.mp.L + 2.0)

    def _winding(self, f, lo, hi, nodes=256):
        return self._windings_batched(f, [(lo, hi)], nodes)[0]

    def _newton_zero(self, f, z):
        for _ in range(self.tol.newton_maxit):
            h = self.scfg.fd_step * max(1.0, abs(z))
            f0, fp, fm = f(np.array([z, z + h, z - h]))
            df = (fp - fm) / (2 * h)
            if abs(df) < 1e-12:
                raise DerivativeTooSmall(f"flat spot in Newton polish at {z:.6f}")
            step = f0 / df
            z = z - step
            if abs(step) < self.tol.newton_tol * max(1.0, abs(z)):
                break
        resid = abs(f(np.array([z]))[0])
        if resid > 1e-9:
            raise ClusterUnresolved(
                f"Newton polish stalled at {z:.8f}, |f| = {resid:.2e}")
        return complex(z)


def _unpack_monodromy(ks, T, theta):
    """Spectral functions (a, b, a*, b*) from T via the wave basis."""
    ik = 1j * ks
    tw00 = T[:, 0, 0] - ik * T[:, 0, 1]
    tw01 = T[:, 0, 0] + ik * T[:, 0, 1]
    tw10 = T[:, 1, 0] - ik * T[:, 1, 1]
    tw11 = T[:, 1, 0] + ik * T[:, 1, 1]
    m11 = 0.5 * (tw00 - tw10 / ik)
    m12 = 0.5 * (tw01 - tw11 / ik)
    m21 = 0.5 * (tw00 + tw10 / ik)
    m22 = 0.5 * (tw01 + tw11 / ik)
    ph = np.exp(1j * ks * theta)
    return m11 * ph, -m12 * ph, m22 / ph, -m21 / ph


def _lstsq_resid(X, y):
    c, *_ = np.linalg.lstsq(X, y, rcond=None)
    return c, float(np.max(np.abs(X @ c - y)))


def _rect_minus_square(rect, hole):
    """Cover rect minus a rectangular hole with up to four rectangles."""
    lo, hi = rect
    hlo, hhi = hole
    out = []
    if hlo.real >= hi.real or hhi.real <= lo.real or \
       hlo.imag >= hi.imag or hhi.imag <= lo.imag:
        return [rect]
    if hlo.real > lo.real:
        out.append((lo, hlo.real + 1j * hi.imag))
    if hhi.real < hi.real:
        out.append((hhi.real + 1j * lo.imag, hi))
    xl, xr = max(hlo.real, lo.real), min(hhi.real, hi.real)
    if hlo.imag > lo.imag:
        out.append((xl + 1j * lo.imag, xr + 1j * hlo.imag))
    if hhi.imag < hi.imag:
        out.append((xl + 1j * hhi.imag, xr + 1j * hi.imag))
    return out


def _subdivide(lo, hi):
    # midpoints nudged off center so a zero on an exact bisector line
    # cannot land on the shared boundary of the children
    mx = lo.real + 0.513 * (hi.real - lo.real)
    my = lo.imag + 0.487 * (hi.imag - lo.imag)
    return [(lo, mx + 1j * my),
            (mx + 1j * lo.imag, hi.real + 1j * my),
            (lo.real + 1j * my, mx + 1j * hi.imag),
            (mx + 1j * my, hi)]


def _phase_winding(v):
    """Winding number from phase continuation; None if sampling too coarse."""
    if np.any(~np.isfinite(v)) or np.any(v == 0):
        return None
    dphi = np.angle(v[1:] / v[:-1])
    if np.max(np.abs(dphi)) > 2.2:
        return None
    return int(np.rint(np.sum(dphi) / (2 * np.pi)))


def _rect_boundary(lo, hi, min_nodes, per_unit):
    """Closed sample loop on a rectangle boundary, density per unit length."""
    x0, y0, x1, y1 = lo.real, lo.imag, hi.real, hi.imag
    sides = []
    for p, q in (((x0, y0), (x1, y0)), ((x1, y0), (x1, y1)),
                 ((x1, y1), (x0, y1)), ((x0, y1), (x0, y0))):
        length = np.hypot(q[0] - p[0], q[1] - p[1])
        m = max(int(min_nodes) // 4, int(np.ceil(length * per_unit)), 8)
        t = np.arange(m) / m
        sides.append(p[0] + (q[0] - p[0]) * t + 1j * (p[1] + (q[1] - p[1]) * t))
    loop = np.concatenate(sides)
    return np.append(loop, loop[0])
