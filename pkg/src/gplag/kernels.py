"""Lead-lag covariance kernels on time x series-index.

Every kernel here is semi-stationary: it depends on the two inputs
``(t, l)`` and ``(t', l')`` only through the signed lag argument

    r = t - t' + s_l - s_l'

and the dissimilarity ``a_ll'`` between the two series (``a_ll = 0``).  A
positive ``s_2`` therefore means that series 2 runs *ahead* of series 1:
``y_2(t)`` behaves like ``y_1(t + s_2)``.

Each family is evaluated through a unit-variance profile ``k(r, a^2; b)``;
the covariance is ``sigma2 * k``.  Matern-type families support only the
half-integer smoothness values 1/2, 3/2 and 5/2, for which closed forms exist.
"""

import math
import weakref
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import ValidationError

LRBF = "lrbf"
LEXP = "lexp"
LMAT = "lmat"
GNEITING_MATERN = "gneiting_matern"
GNEITING_EXP_SEP = "gneiting_exp_sep"
LAPLACE_SCALED = "laplace_scaled"
RATIONAL_QUADRATIC = "rational_quadratic"
COMPLEX_EXPONENTIAL = "complex_exponential"

FAMILY_TAGS = (LRBF, LEXP, LMAT, GNEITING_MATERN, GNEITING_EXP_SEP, LAPLACE_SCALED,
               RATIONAL_QUADRATIC, COMPLEX_EXPONENTIAL)
# families exposed by default on the command line
CORE_TAGS = (LRBF, LEXP, LMAT)
SUPPORTED_NU = (0.5, 1.5, 2.5)

_ALIASES = {
    "lrbf": LRBF, "lexp": LEXP, "lmat": LMAT,
    "gneitingmatern": GNEITING_MATERN, "gneitingexpsep": GNEITING_EXP_SEP,
    "laplacescaled": LAPLACE_SCALED, "laplace": LAPLACE_SCALED,
    "rationalquadratic": RATIONAL_QUADRATIC, "rq": RATIONAL_QUADRATIC,
    "complexexponential": COMPLEX_EXPONENTIAL,
}


@dataclass(frozen=True)
class KernelFamily:
    tag: str
    nu: float = None
    c: float = None

    def __post_init__(self):
        tag = _ALIASES.get(self.tag.lower().replace("_", "").replace("-", ""), None)
        if tag is None:
            raise ValueError(f"unknown kernel family {self.tag!r}")
        object.__setattr__(self, "tag", tag)
        nu, c = self.nu, self.c
        if tag in (LMAT, GNEITING_MATERN):
            nu = 1.5 if nu is None else float(nu)
            if not any(abs(nu - v) < 1e-12 for v in SUPPORTED_NU):
                raise ValueError(f"unsupported smoothness nu={nu}; use one of {SUPPORTED_NU}")
        elif tag == GNEITING_EXP_SEP:
            nu = 0.5
        else:
            nu = None
        if tag in (GNEITING_MATERN, GNEITING_EXP_SEP):
            c = 1.0 if c is None else float(c)
            if not c > 0:
                raise ValueError(f"separability c must be positive, got {c}")
        else:
            c = None
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "c", c)

    @property
    def has_spectral_density(self):
        return self.tag in CORE_TAGS

    def __str__(self):
        extra = [f"nu={self.nu:g}"] if self.nu is not None and self.tag != GNEITING_EXP_SEP else []
        if self.c is not None:
            extra.append(f"c={self.c:g}")
        return self.tag + (f"({', '.join(extra)})" if extra else "")


def as_family(family):
    if isinstance(family, KernelFamily):
        return family
    return KernelFamily(str(family))


@dataclass(frozen=True)
class PairwiseParams:
    """Two-series parameters; ``s`` is the lag of series 2 relative to series 1."""

    sigma2: float
    b: float
    a: float
    s: float
    tau2: float = 0.0

    @property
    def num_series(self):
        return 2

    def to_multi(self):
        return MultiParams(self.sigma2, self.b, self.tau2,
                           np.array([[0.0, self.a], [self.a, 0.0]]), np.array([0.0, self.s]))

    def as_dict(self):
        return {"sigma2": self.sigma2, "b": self.b, "a": self.a, "s": self.s, "tau2": self.tau2}


@dataclass(frozen=True, eq=False)
class MultiParams:
    """L-series parameters: dissimilarity matrix ``A`` and lag vector ``S``."""

    sigma2: float
    b: float
    tau2: float
    A: np.ndarray = field(repr=True)
    S: np.ndarray = field(repr=True)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        S = np.array(self.S, dtype=float).reshape(-1)
        A.setflags(write=False)
        S.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "S", S)

    @property
    def num_series(self):
        return len(self.S)

    def to_multi(self):
        return self

    def as_dict(self):
        return {"sigma2": self.sigma2, "b": self.b, "A": self.A.tolist(), "S": self.S.tolist(),
                "tau2": self.tau2}


def _arrays(params):
    """(sigma2, b, tau2, A, S) for either parameter type, without validation."""
    if isinstance(params, PairwiseParams):
        a = float(params.a)
        return (params.sigma2, params.b, params.tau2,
                np.array([[0.0, a], [a, 0.0]]), np.array([0.0, float(params.s)]))
    return params.sigma2, params.b, params.tau2, params.A, params.S


class Violation(NamedTuple):
    kind: str
    index: tuple
    detail: str


def validate_params(params, tol=0.0):
    """List every violated parameter constraint (empty list means valid).

    ``tol`` is the slack allowed on the triangle inequalities.
    """
    out = []

    def positive(name, v, strict=True):
        if not np.isfinite(v):
            out.append(Violation("finite", (name,), f"{name}={v} is not finite"))
        elif (v <= 0) if strict else (v < 0):
            rel = ">" if strict else ">="
            out.append(Violation("positivity", (name,), f"{name}={v} must be {rel} 0"))

    positive("sigma2", params.sigma2)
    positive("b", params.b)
    positive("tau2", params.tau2, strict=False)
    if isinstance(params, PairwiseParams):
        positive("a", params.a, strict=False)
        if not np.isfinite(params.s):
            out.append(Violation("finite", ("s",), f"s={params.s} is not finite"))
        return out

    A, S = params.A, params.S
    L = len(S)
    if A.shape != (L, L):
        out.append(Violation("shape", (), f"A has shape {A.shape}, expected {(L, L)}"))
        return out
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(S)):
        out.append(Violation("finite", (), "A and S must be finite"))
        return out
    if S[0] != 0.0:
        out.append(Violation("baseline", (1,), f"S[1]={S[0]} must be 0"))
    for i in range(L):
        if A[i, i] != 0.0:
            out.append(Violation("diagonal", (i + 1, i + 1), f"a_{i+1}{i+1}={A[i, i]} must be 0"))
        for j in range(i + 1, L):
            if A[i, j] != A[j, i]:
                out.append(Violation("symmetry", (i + 1, j + 1),
                                     f"a_{i+1}{j+1}={A[i, j]} != a_{j+1}{i+1}={A[j, i]}"))
            if A[i, j] <= 0 or A[j, i] <= 0:
                out.append(Violation("positivity", (i + 1, j + 1),
                                     f"off-diagonal a_{i+1}{j+1} must be > 0"))
    for l in range(L):
        for k in range(L):
            for m in range(L):
                if len({l, k, m}) < 3:
                    continue
                gap = A[l, k] - A[l, m] - A[m, k]
                if gap > tol and l < k:
                    out.append(Violation("triangle", (l + 1, m + 1, k + 1),
                                         f"a_{l+1}{m+1}+a_{m+1}{k+1}={A[l, m] + A[m, k]:g} "
                                         f"< a_{l+1}{k+1}={A[l, k]:g}"))
    return out


def check_params(params):
    """Raise on invalid parameters; triangle checks allow round-off (1e-12 relative)."""
    scale = float(np.max(np.abs(params.A))) if isinstance(params, MultiParams) and params.A.size else 0.0
    bad = validate_params(params, tol=1e-12 * max(scale, 1.0) if np.isfinite(scale) else 0.0)
    if bad:
        raise ValidationError("; ".join(v.detail for v in bad))


# ---------------------------------------------------------------------------
# unit-variance profiles and their partial derivatives


def _matern(nu, x):
    """(m(x), m'(x)) for m(x) = 2^(1-nu)/Gamma(nu) x^nu K_nu(x), half-integer nu."""
    e = np.exp(-x)
    if nu == 0.5:
        return e, -e
    if nu == 1.5:
        return (1.0 + x) * e, -x * e
    return (1.0 + x + x * x / 3.0) * e, -(x / 3.0) * (1.0 + x) * e


def profile(family, r, a2, b, derivatives=False):
    """Unit-variance kernel value at lag argument ``r`` and squared dissimilarity ``a2``.

    With ``derivatives=True`` returns ``(k, dk/db, dk/da2, dk/dr)``.  At the
    ``|r|`` kink of the non-smooth families the r-derivative is taken as 0,
    the mean of the two one-sided derivatives.
    """
    fam = as_family(family)
    r = np.asarray(r, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    q = a2 + 1.0
    tag = fam.tag
    ar = np.abs(r)
    sg = np.sign(r)
    if tag == LRBF:
        k = np.exp(-b * r * r / q) / np.sqrt(q)
        if not derivatives:
            return k
        return k, -r * r / q * k, k * (-0.5 / q + b * r * r / (q * q)), -2.0 * b * r / q * k
    if tag == LEXP:
        k = np.exp(-b * ar) / q
        if not derivatives:
            return k
        return k, -ar * k, -k / q, -b * sg * k
    if tag == LMAT:
        p = fam.nu + 0.5
        pre = q ** -p
        m, dm = _matern(fam.nu, b * ar)
        k = pre * m
        if not derivatives:
            return k
        return k, pre * dm * ar, -p * k / q, pre * dm * b * sg
    if tag in (GNEITING_MATERN, GNEITING_EXP_SEP):
        nu, c = fam.nu, fam.c
        qc = a2 + c
        g = np.sqrt(q / qc)
        pre = math.sqrt(c) * q ** -nu / np.sqrt(qc)
        m, dm = _matern(nu, b * g * ar)
        k = pre * m
        if not derivatives:
            return k
        dpre = pre * (-nu / q - 0.5 / qc)
        dg = 0.5 * g * (1.0 / q - 1.0 / qc)
        return k, pre * dm * g * ar, dpre * m + pre * dm * b * ar * dg, pre * dm * b * g * sg
    if tag == LAPLACE_SCALED:
        rq = np.sqrt(q)
        k = np.exp(-b * ar / rq) / rq
        if not derivatives:
            return k
        return k, -ar / rq * k, k * (-0.5 / q + 0.5 * b * ar / q ** 1.5), -b * sg / rq * k
    if tag == RATIONAL_QUADRATIC:
        rq = np.sqrt(q)
        den = q + b * r * r
        k = rq / den
        if not derivatives:
            return k
        return k, -rq * r * r / den ** 2, 0.5 / (rq * den) - rq / den ** 2, -2.0 * b * r * rq / den ** 2
    if tag == COMPLEX_EXPONENTIAL:
        k = np.exp(-a2 - b * r * r - a2 * r * r)
        if not derivatives:
            return k
        return k, -r * r * k, -(1.0 + r * r) * k, -2.0 * (b + a2) * r * k
    raise ValueError(f"unsupported family {tag}")  # pragma: no cover


def kernel_eval(family, params, x, xp):
    """Covariance between ``x = (t, l)`` and ``xp = (t', l')`` (1-based series ids)."""
    fam = as_family(family)
    check_params(params)
    sigma2, b, _, A, S = _arrays(params)
    (t, l), (tp, lp) = x, xp
    r = t - tp + S[l - 1] - S[lp - 1]
    a2 = A[l - 1, lp - 1] ** 2
    return float(sigma2 * profile(fam, r, a2, b))


def _pair_arrays(t1, c1, t2, c2, A, S):
    r = t1[:, None] - t2[None, :] + S[c1 - 1][:, None] - S[c2 - 1][None, :]
    a2 = (A ** 2)[np.ix_(c1 - 1, c2 - 1)]
    return r, a2


def cross_covariance(family, params, t1, c1, t2, c2):
    """Covariance block between two point sets (no noise term)."""
    sigma2, b, _, A, S = _arrays(params)
    t1, t2 = np.asarray(t1, float), np.asarray(t2, float)
    c1, c2 = np.asarray(c1, np.int64), np.asarray(c2, np.int64)
    r, a2 = _pair_arrays(t1, c1, t2, c2, A, S)
    return sigma2 * profile(family, r, a2, b)


def covariance_matrix(family, params, data, include_noise=True):
    """``Sigma`` (plus ``tau2 * I`` when ``include_noise``) over the points of ``data``."""
    check_params(params)
    K = cross_covariance(family, params, data.t, data.series, data.t, data.series)
    K = 0.5 * (K + K.T)
    if include_noise:
        K[np.diag_indices_from(K)] += params.tau2
    return K


class _Geometry:
    """Upper-triangle time differences and series indices of one dataset.

    Covariances and all their theta-derivatives are symmetric, so they are
    evaluated on the upper triangle (diagonal included) only.
    """

    def __init__(self, data):
        t, c = data.t, data.series
        self.n = len(t)
        self.iu = np.triu_indices(self.n)
        i, j = self.iu
        self.dt = t[i] - t[j]
        self.ci, self.cj = c[i] - 1, c[j] - 1
        self.weight = np.where(i == j, 1.0, 2.0)
        L = data.num_series
        self.pair_mask = {}
        for l in range(L):
            for m in range(l + 1, L):
                self.pair_mask[(l, m)] = ((self.ci == l) & (self.cj == m)) | ((self.ci == m) & (self.cj == l))
        self.s_sign = [(self.ci == l).astype(float) - (self.cj == l).astype(float)
                       for l in range(1, L)]

    def full(self, v):
        M = np.empty((self.n, self.n))
        M[self.iu] = v
        M.T[self.iu] = v
        return M


_GEOMETRY = weakref.WeakKeyDictionary()


def _geometry(data):
    geo = _GEOMETRY.get(data)
    if geo is None:
        geo = _GEOMETRY[data] = _Geometry(data)
    return geo


def condensed_partials(family, params, data):
    """Upper-triangle covariance and theta-derivatives; see :func:`covariance_partials`.

    Returns ``(geometry, k, parts)`` with 1-D arrays over ``geometry.iu``.
    """
    sigma2, b, _, A, S = _arrays(params)
    geo = _geometry(data)
    r = geo.dt + (S[geo.ci] - S[geo.cj])
    a2 = (A ** 2)[geo.ci, geo.cj]
    k, dk_db, dk_da2, dk_dr = profile(family, r, a2, b, derivatives=True)
    K = sigma2 * k
    parts = [K, sigma2 * b * dk_db]
    L = len(S)
    for l in range(L):
        for m in range(l + 1, L):
            parts.append(np.where(geo.pair_mask[(l, m)], sigma2 * 2.0 * A[l, m] ** 2 * dk_da2, 0.0))
    if L > 1:
        g = sigma2 * dk_dr
        parts.extend(g * sign for sign in geo.s_sign)
    return geo, K, parts


def covariance_partials(family, params, data):
    """Signal covariance and its derivatives in the transformed coordinates.

    Returns ``(K, parts)`` where ``K`` excludes noise and ``parts`` holds
    dK/dtheta for theta = (log sigma2, log b, log a_lk for l<k, s_2..s_L);
    the noise derivative (``tau2 * I``) is left to the caller.
    """
    geo, K, parts = condensed_partials(family, params, data)
    return geo.full(K), [geo.full(P) for P in parts]


# ---------------------------------------------------------------------------
# spectral densities


def spectral_density(family, params, omega, l, lp):
    """Fourier transform of ``t -> K((t, l), (0, l'))``.

    Convention: ``f(w) = (2 pi)^(-1/2) * integral exp(-i w t) K(t) dt``,
    with every constant kept, so the result can be compared against direct
    quadrature.  Includes the phase factor ``exp(i w (s_l - s_l'))``.
    """
    fam = as_family(family)
    if not fam.has_spectral_density:
        raise ValueError(f"no closed-form spectral density for {fam.tag}")
    check_params(params)
    sigma2, b, _, A, S = _arrays(params)
    w = np.asarray(omega, dtype=float)
    q = A[l - 1, lp - 1] ** 2 + 1.0
    phase = np.exp(1j * w * (S[l - 1] - S[lp - 1]))
    if fam.tag == LRBF:
        mag = sigma2 / math.sqrt(2.0 * b) * np.exp(-q * w * w / (4.0 * b))
    else:
        nu = 0.5 if fam.tag == LEXP else fam.nu
        const = math.sqrt(2.0) * math.gamma(nu + 0.5) / math.gamma(nu)
        mag = sigma2 * const * b ** (2 * nu) / (q ** (nu + 0.5) * (b * b + w * w) ** (nu + 0.5))
    out = mag * phase
    return complex(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# JSON form


def spec_to_dict(family, params):
    fam = as_family(family)
    d = {"family": fam.tag}
    if fam.nu is not None:
        d["nu"] = fam.nu
    if fam.c is not None:
        d["c"] = fam.c
    d.update({k: (float(v) if np.isscalar(v) else v) for k, v in params.as_dict().items()})
    return d


def spec_from_dict(d):
    fam = KernelFamily(d["family"], d.get("nu"), d.get("c"))
    if "A" in d:
        params = MultiParams(d["sigma2"], d["b"], d.get("tau2", 0.0), d["A"], d["S"])
    else:
        params = PairwiseParams(d["sigma2"], d["b"], d["a"], d["s"], d.get("tau2", 0.0))
    return fam, params
