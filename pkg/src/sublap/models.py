"""Built-in structures and the plain-JSON structure/volume file formats.

Built-in ids:
  heisenberg3         3D nilpotent contact model, X1 = dx - (y/2) dz,
                      X2 = dy + (x/2) dz, complement dz
  carnot-corank1      rank-k step-2 group frame X_i = d_i - (1/2)(A x)_i dz
                      for an antisymmetric k x k matrix A, complement dz
  quasicontact-r4     R^4 frame X = g^{-1/2}(dx + (y/2) dw),
                      Y = g^{-1/2}(dy - (x/2) dw), Z = g^{-1/2} dz,
                      complement dw, with g = e^z or a positive linear g(z)
  contact3-perturbed  3D contact ker(p dx + r dy + dz) with
                      p = (y/2)(1+eps*x), r = -(x/2)(1+delta*y)

Structure files are JSON: either {"model": {"id": ..., ...params}} or
polynomial coefficient tables per field component, each component a list of
[coeff, [e_1..e_n]] monomial terms (user fields fall back to FD Jacobians).

Volume specs: "lebesgue" | "popp" | {"scale": c} | {"poly": terms} |
{"exp_poly": terms}, with "scale" composable with the others.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .corank1 import OneForm, popp_volume
from .errors import InputError
from .frames import Structure, VolumeForm, lebesgue, scaled


@dataclass(frozen=True)
class Model:
    structure: Structure
    eta: Optional[OneForm] = None
    params: dict = field(default_factory=dict)

    @property
    def name(self):
        return self.structure.name


# ---------------------------------------------------------------------------
# built-in frames

def heisenberg3() -> Model:
    def x1(q):
        out = np.zeros_like(q)
        out[..., 0] = 1.0
        out[..., 2] = -0.5 * q[..., 1]
        return out

    def x2(q):
        out = np.zeros_like(q)
        out[..., 1] = 1.0
        out[..., 2] = 0.5 * q[..., 0]
        return out

    def x3(q):
        out = np.zeros_like(q)
        out[..., 2] = 1.0
        return out

    J1 = np.zeros((3, 3))
    J1[2, 1] = -0.5
    J2 = np.zeros((3, 3))
    J2[2, 0] = 0.5
    J3 = np.zeros((3, 3))

    def j1(q, _J=J1):
        return np.broadcast_to(_J, q.shape + (3,))

    def j2(q, _J=J2):
        return np.broadcast_to(_J, q.shape + (3,))

    def j3(q, _J=J3):
        return np.broadcast_to(_J, q.shape + (3,))

    s = Structure(3, 2, (x1, x2, x3), (j1, j2, j3), name="heisenberg3")

    inv_sqrt2 = 1.0 / np.sqrt(2.0)

    def eta_coeffs(q):
        out = np.zeros_like(q)
        out[..., 0] = 0.5 * q[..., 1] * inv_sqrt2
        out[..., 1] = -0.5 * q[..., 0] * inv_sqrt2
        out[..., 2] = inv_sqrt2
        return out

    return Model(s, OneForm(eta_coeffs, "eta_heisenberg", normalized=True))


def carnot_corank1(A) -> Model:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError("carnot-corank1 needs a square matrix A")
    if np.max(np.abs(A + A.T)) > 1e-12:
        raise InputError("carnot-corank1 matrix A must be antisymmetric")
    k = A.shape[0]
    n = k + 1
    fro = np.sqrt(np.sum(A * A))
    if fro == 0:
        raise InputError("carnot-corank1 matrix A must be nonzero (step 2)")

    def make_field(i):
        def f(q):
            out = np.zeros_like(q)
            out[..., i] = 1.0
            out[..., n - 1] = -0.5 * np.einsum("j,...j->...", A[i], q[..., :k])
            return out
        return f

    def make_jac(i):
        J0 = np.zeros((n, n))
        J0[n - 1, :k] = -0.5 * A[i]

        def j(q):
            return np.broadcast_to(J0, q.shape + (n,))
        return j

    def vert(q):
        out = np.zeros_like(q)
        out[..., n - 1] = 1.0
        return out

    _JV = np.zeros((n, n))

    def vert_jac(q):
        return np.broadcast_to(_JV, q.shape + (n,))

    fields = tuple(make_field(i) for i in range(k)) + (vert,)
    jacs = tuple(make_jac(i) for i in range(k)) + (vert_jac,)
    s = Structure(n, k, fields, jacs, name="carnot-corank1")

    def eta_coeffs(q):
        out = np.zeros_like(q)
        out[..., :k] = 0.5 * np.einsum("ij,...j->...i", A, q[..., :k])
        out[..., n - 1] = 1.0
        return out / fro                      # tr(JJ^T) = |A|_F^2 for raw eta

    return Model(s, OneForm(eta_coeffs, "eta_carnot", normalized=True),
                 params={"A": A.tolist()})


def _g_profile(kind, params):
    if kind == "exp":
        return (lambda z: np.exp(z)), (lambda z: np.exp(z))
    if kind == "linear":
        a = float(params.get("a", 2.0))
        b = float(params.get("b", 0.5))
        if b == 0:
            raise InputError("linear g must be strictly monotone (b != 0)")
        return (lambda z: a + b * z), (lambda z: b + 0.0 * z)
    raise InputError(f"unknown g profile {kind!r} (want 'exp' or 'linear')")


def quasicontact_r4(g: str = "exp", **params) -> Model:
    gf, gpf = _g_profile(g, params)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)

    def sfac(q):
        return gf(q[..., 2]) ** -0.5

    def x_field(q):
        s_ = sfac(q)
        out = np.zeros_like(q)
        out[..., 0] = s_
        out[..., 3] = 0.5 * q[..., 1] * s_
        return out

    def y_field(q):
        s_ = sfac(q)
        out = np.zeros_like(q)
        out[..., 1] = s_
        out[..., 3] = -0.5 * q[..., 0] * s_
        return out

    def z_field(q):
        out = np.zeros_like(q)
        out[..., 2] = sfac(q)
        return out

    def w_field(q):
        out = np.zeros_like(q)
        out[..., 3] = 1.0
        return out

    def ds(q):
        # d/dz of g^{-1/2}
        return -0.5 * gf(q[..., 2]) ** -1.5 * gpf(q[..., 2])

    def jx(q):
        J = np.zeros(q.shape + (4,))
        J[..., 0, 2] = ds(q)
        J[..., 3, 1] = 0.5 * sfac(q)
        J[..., 3, 2] = 0.5 * q[..., 1] * ds(q)
        return J

    def jy(q):
        J = np.zeros(q.shape + (4,))
        J[..., 1, 2] = ds(q)
        J[..., 3, 0] = -0.5 * sfac(q)
        J[..., 3, 2] = -0.5 * q[..., 0] * ds(q)
        return J

    def jz(q):
        J = np.zeros(q.shape + (4,))
        J[..., 2, 2] = ds(q)
        return J

    def jw(q):
        return np.zeros(q.shape + (4,))

    s = Structure(4, 3, (x_field, y_field, z_field, w_field),
                  (jx, jy, jz, jw), name="quasicontact-r4")

    def eta_coeffs(q):
        gq = gf(q[..., 2])
        out = np.zeros_like(q)
        out[..., 0] = -0.5 * q[..., 1] * gq * inv_sqrt2
        out[..., 1] = 0.5 * q[..., 0] * gq * inv_sqrt2
        out[..., 3] = gq * inv_sqrt2
        return out

    return Model(s, OneForm(eta_coeffs, "eta_quasicontact", normalized=True),
                 params={"g": g, **params})


def contact3_perturbed(eps: float = 0.2, delta: float = 0.1) -> Model:
    def p(q):
        return 0.5 * q[..., 1] * (1.0 + eps * q[..., 0])

    def r(q):
        return -0.5 * q[..., 0] * (1.0 + delta * q[..., 1])

    def u1(q):
        out = np.zeros_like(q)
        out[..., 0] = 1.0
        out[..., 2] = -p(q)
        return out

    def u2(q):
        out = np.zeros_like(q)
        out[..., 1] = 1.0
        out[..., 2] = -r(q)
        return out

    def u3(q):
        out = np.zeros_like(q)
        out[..., 2] = 1.0
        return out

    def j1(q):
        J = np.zeros(q.shape + (3,))
        J[..., 2, 0] = -0.5 * eps * q[..., 1]
        J[..., 2, 1] = -0.5 * (1.0 + eps * q[..., 0])
        return J

    def j2(q):
        J = np.zeros(q.shape + (3,))
        J[..., 2, 0] = 0.5 * (1.0 + delta * q[..., 1])
        J[..., 2, 1] = 0.5 * delta * q[..., 0]
        return J

    def j3(q):
        return np.zeros(q.shape + (3,))

    s = Structure(3, 2, (u1, u2, u3), (j1, j2, j3), name="contact3-perturbed")

    def eta_coeffs(q):
        out = np.zeros_like(q)
        out[..., 0] = p(q)
        out[..., 1] = r(q)
        out[..., 2] = 1.0
        return out

    # raw (unnormalized) on purpose: exercises pointwise normalization
    return Model(s, OneForm(eta_coeffs, "eta_contact3"),
                 params={"eps": eps, "delta": delta})


BUILTINS = {
    "heisenberg3": lambda params: heisenberg3(),
    "carnot-corank1": lambda params: carnot_corank1(params.get("A", [[0.0, 1.0], [-1.0, 0.0]])),
    "quasicontact-r4": lambda params: quasicontact_r4(params.get("g", "exp"),
                                                      **{k: v for k, v in params.items()
                                                         if k not in ("id", "g")}),
    "contact3-perturbed": lambda params: contact3_perturbed(
        float(params.get("eps", 0.2)), float(params.get("delta", 0.1))),
}


# ---------------------------------------------------------------------------
# polynomial user models

def poly_fn(terms, n):
    """terms: list of [coeff, [e_1..e_n]] monomials -> vectorized function."""
    terms = [(float(c), np.asarray(e, dtype=int)) for c, e in terms]
    for _, e in terms:
        if e.shape != (n,):
            raise InputError(f"monomial exponent list must have length {n}")

    def f(q):
        q = np.asarray(q, dtype=float)
        out = np.zeros(q.shape[:-1])
        for c, e in terms:
            mono = np.ones(q.shape[:-1])
            for m in range(n):
                if e[m]:
                    mono = mono * q[..., m] ** int(e[m])
            out = out + c * mono
        return out

    return f


def _poly_field(components, n):
    comps = [poly_fn(t, n) for t in components]

    def f(q):
        q = np.asarray(q, dtype=float)
        return np.stack([c(q) for c in comps], axis=-1)

    return f


def model_from_dict(obj: dict) -> Model:
    if not isinstance(obj, dict):
        raise InputError("structure file must contain a JSON object")
    if "model" in obj:
        spec = obj["model"]
        mid = spec.get("id")
        if mid not in BUILTINS:
            raise InputError(f"unknown builtin model id {mid!r}; "
                             f"known: {sorted(BUILTINS)}")
        return BUILTINS[mid]({k: v for k, v in spec.items() if k != "id"})
    try:
        n, k = int(obj["n"]), int(obj["k"])
        fields = obj["fields"]
    except KeyError as exc:
        raise InputError(f"structure file missing field {exc}") from exc
    if len(fields) != n:
        raise InputError(f"expected {n} fields, found {len(fields)}")
    field_fns = tuple(_poly_field(comp, n) for comp in fields)
    s = Structure(n, k, field_fns, None, name=str(obj.get("name", "user")))
    eta = None
    if "eta" in obj:
        eta = OneForm(_poly_field(obj["eta"], n), name="eta_user")
    return Model(s, eta)


def resolve_model_spec(path_or_id: str) -> dict:
    """Builtin id or JSON file path -> the JSON-able structure spec dict."""
    if path_or_id in BUILTINS:
        return {"model": {"id": path_or_id}}
    try:
        with open(path_or_id) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read structure file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in structure file: {exc}") from exc
    return obj


def load_model(path_or_id: str) -> Model:
    """Builtin id, or a path to a JSON structure file."""
    return model_from_dict(resolve_model_spec(path_or_id))


# ---------------------------------------------------------------------------
# volume specs

def volume_from_spec(model: Model, spec) -> VolumeForm:
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError:
            pass
    if spec in (None, "lebesgue"):
        return lebesgue()
    if spec == "popp":
        if model.eta is None or model.structure.k != model.structure.n - 1:
            raise InputError("'popp' volume needs a corank-1 model with eta")
        return popp_volume(model.structure, model.eta)
    if isinstance(spec, dict):
        base = volume_from_spec(model, spec.get("base", "lebesgue"))
        n = model.structure.n
        if "poly" in spec:
            fn = poly_fn(spec["poly"], n)
            base = VolumeForm(lambda q, _f=fn, _b=base: _f(q) * _b.density(q),
                              name="poly*" + base.name)
        if "exp_poly" in spec:
            fn = poly_fn(spec["exp_poly"], n)
            base = VolumeForm(lambda q, _f=fn, _b=base: np.exp(_f(q)) * _b.density(q),
                              name="exp(poly)*" + base.name)
        if "scale" in spec:
            base = scaled(base, float(spec["scale"]))
        return base
    raise InputError(f"unrecognized volume spec {spec!r}")
