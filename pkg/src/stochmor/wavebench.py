"""Spectral-Galerkin models of a controlled stochastic damped wave equation.

The string lives on [0, pi] with Dirichlet ends; sine modes diagonalize the
Laplacian, so the first-order form of the damped wave equation becomes a
block-diagonal drift with 2x2 oscillator blocks, and all input/output/noise
matrices reduce to sine-basis inner products of the coefficient functions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import QuadratureError
from .system import StateSpaceModel

__all__ = [
    "FunctionSpec",
    "function_spec",
    "WaveConfig",
    "galerkin_coefficient",
    "build_wave_model",
    "preset_config",
    "preset_input",
    "PRESETS",
]

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class FunctionSpec:
    """A scalar function on [0, pi], optionally a pure trigonometric mode.

    `mode` is ("sin", k) or ("cos", k) when the function is exactly that
    mode, enabling analytic inner products.
    """

    name: str
    fn: callable
    mode: tuple | None = None

    def __call__(self, z):
        return self.fn(z)


def function_spec(spec):
    """Build a FunctionSpec from a name string or a callable.

    Recognized names: ``sin(kz)``, ``cos(kz)``, ``gauss(a)`` meaning
    ``exp(-a (z - pi/2)^2)``, and products joined with ``*`` such as
    ``sin(z)*gauss(1)``.
    """
    if isinstance(spec, FunctionSpec):
        return spec
    if callable(spec):
        return FunctionSpec(name=getattr(spec, "__name__", "callable"), fn=spec)
    name = spec.replace(" ", "")
    factors = name.split("*")
    parsed = []
    for token in factors:
        m = re.fullmatch(r"(sin|cos)\((?:(\d+))?z\)", token)
        if m:
            kind, k = m.group(1), int(m.group(2) or 1)
            fn = (lambda z, k=k: np.sin(k * z)) if kind == "sin" \
                else (lambda z, k=k: np.cos(k * z))
            parsed.append((fn, (kind, k)))
            continue
        m = re.fullmatch(r"gauss\(([-+0-9.eE/]+)\)", token)
        if m:
            expr = m.group(1)
            if "/" in expr:
                num, den = expr.split("/")
                a = float(num) / float(den)
            else:
                a = float(expr)
            parsed.append((lambda z, a=a: np.exp(-a * (z - np.pi / 2) ** 2),
                           None))
            continue
        raise ValueError(f"unrecognized function spec {token!r}")
    if len(parsed) == 1:
        fn, mode = parsed[0]
        return FunctionSpec(name=name, fn=fn, mode=mode)

    def product(z, fns=[p[0] for p in parsed]):
        out = np.ones_like(np.asarray(z, dtype=float))
        for f in fns:
            out = out * f(z)
        return out

    return FunctionSpec(name=name, fn=product)


def _sine_inner_analytic(mode, ell):
    """Closed form of <f, sin(ell .)> on [0, pi] for a pure trig mode f."""
    kind, k = mode
    if kind == "sin":
        return np.pi / 2 if k == ell else 0.0
    # int_0^pi sin(ell z) cos(k z) dz
    if ell == k:
        return 0.0
    return (1 - (-1) ** (ell + k)) * ell / (ell ** 2 - k ** 2)


def _panel_quadrature(fn, panels):
    edges = np.linspace(0.0, np.pi, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    z = (mid[:, None] + half[:, None] * _GAUSS_NODES[None, :]).ravel()
    w = (half[:, None] * _GAUSS_WEIGHTS[None, :]).ravel()
    return float(np.dot(w, fn(z)))


def galerkin_coefficient(f, ell, weight_g=None, tol=1e-12, max_doublings=20):
    """Sine-basis inner product ``<f, sin(ell .)>`` on [0, pi].

    With `weight_g` the integrand becomes ``f(z) g(z) sin(ell z)``, covering
    the ``<sin(ell .), g sin(v .)>`` entries of the noise matrices.  Pure
    sine/cosine specs without a weight use the analytic value; everything
    else runs composite Gauss-Legendre quadrature with panel doubling until
    two successive levels agree to `tol`.
    """
    f = function_spec(f)
    if weight_g is None and f.mode is not None:
        return _sine_inner_analytic(f.mode, ell)
    g = function_spec(weight_g) if weight_g is not None else None

    def integrand(z):
        val = f(z) * np.sin(ell * z)
        if g is not None:
            val = val * g(z)
        return val

    panels = max(4, ell)
    prev = _panel_quadrature(integrand, panels)
    for _ in range(max_doublings):
        panels *= 2
        cur = _panel_quadrature(integrand, panels)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise QuadratureError(
        f"quadrature for mode {ell} did not settle to {tol:.0e} within "
        f"{max_doublings} panel doublings")


@dataclass(frozen=True)
class WaveConfig:
    """Configuration of a discretized stochastic damped wave equation.

    `f1` drives the control input; `f2_list` the additive noise channels;
    `g_list` the multiplicative noise coefficients.  Exactly the list
    matching `noise_kind` must be present.
    """

    n: int
    alpha: float
    f1: object
    f2_list: tuple = ()
    g_list: tuple = ()
    epsilon: float = 0.05
    output_kind: str = "position"
    noise_kind: str = "additive"
    K: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        if self.n % 2:
            raise ValueError("n must be even")
        if not 0.0 < self.epsilon < np.pi / 2:
            raise ValueError("epsilon must lie in (0, pi/2)")
        if self.output_kind not in ("position", "velocity"):
            raise ValueError(f"unknown output_kind {self.output_kind!r}")
        if self.noise_kind == "additive":
            if not self.f2_list or self.g_list:
                raise ValueError("additive noise requires f2_list and no g_list")
        elif self.noise_kind == "multiplicative":
            if not self.g_list or self.f2_list:
                raise ValueError(
                    "multiplicative noise requires g_list and no f2_list")
        else:
            raise ValueError(f"unknown noise_kind {self.noise_kind!r}")


def _input_vector(f, nhalf):
    f = function_spec(f)
    b = np.zeros(2 * nhalf)
    for ell in range(1, nhalf + 1):
        b[2 * ell - 1] = np.sqrt(2.0 / np.pi) * galerkin_coefficient(f, ell)
    return b


def _noise_matrix(g, nhalf, tol=1e-12):
    """N entries (2/(pi v)) <sin(ell .), g sin(v .)> at (even row, odd column).

    All entries come from one weighted sine-sine Gram matrix, evaluated on a
    shared composite Gauss-Legendre grid with panel doubling on the whole
    matrix at once.
    """
    g = function_spec(g)
    ells = np.arange(1, nhalf + 1)

    def gram(panels, chunk=4096):
        edges = np.linspace(0.0, np.pi, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1:] - edges[:-1])
        z = (mid[:, None] + half[:, None] * _GAUSS_NODES[None, :]).ravel()
        w = (half[:, None] * _GAUSS_WEIGHTS[None, :]).ravel()
        wg = w * g(z)
        out = np.zeros((nhalf, nhalf))
        for lo in range(0, z.size, chunk):  # chunked to bound memory
            S = np.sin(np.outer(ells, z[lo:lo + chunk]))
            out += (S * wg[lo:lo + chunk]) @ S.T
        return out

    panels = max(8, nhalf)
    prev = gram(panels)
    for _ in range(8):
        panels *= 2
        cur = gram(panels)
        if np.max(np.abs(cur - prev)) < tol:
            break
        prev = cur
    else:
        raise QuadratureError(
            "noise-matrix quadrature did not settle within the panel budget")
    N = np.zeros((2 * nhalf, 2 * nhalf))
    vs = np.arange(1, nhalf + 1)
    N[1::2, 0::2] = (2.0 / (np.pi * vs))[None, :] * cur
    return N


def _output_vector(output_kind, nhalf, eps):
    c = np.zeros(2 * nhalf)
    for ell in range(1, nhalf + 1):
        cosdiff = (np.cos(ell * (np.pi / 2 - eps)) -
                   np.cos(ell * (np.pi / 2 + eps)))
        if output_kind == "position":
            c[2 * ell - 2] = cosdiff / (np.sqrt(2.0 * np.pi) * ell ** 2 * eps)
        else:
            c[2 * ell - 1] = cosdiff / (np.sqrt(2.0 * np.pi) * ell * eps)
    return c


def build_wave_model(config):
    """Assemble the state-space model for a wave configuration.

    The drift is ``blkdiag(E_1, ..., E_{n/2})`` with
    ``E_l = [[0, l], [-l, -alpha]]``; input, noise and output matrices carry
    the sine-basis coefficients of the configured functions.
    """
    nhalf = config.n // 2
    A = np.zeros((config.n, config.n))
    for ell in range(1, nhalf + 1):
        i = 2 * (ell - 1)
        A[i, i + 1] = ell
        A[i + 1, i] = -ell
        A[i + 1, i + 1] = -config.alpha
    B1 = _input_vector(config.f1, nhalf).reshape(-1, 1)
    C = _output_vector(config.output_kind, nhalf, config.epsilon).reshape(1, -1)
    if config.noise_kind == "additive":
        B2 = np.column_stack([_input_vector(f, nhalf) for f in config.f2_list])
        return StateSpaceModel(A=A, B1=B1, C=C, B2=B2, K=config.K)
    N = tuple(_noise_matrix(g, nhalf) for g in config.g_list)
    return StateSpaceModel(A=A, B1=B1, C=C, N=N, K=config.K)


_WAVE_K = np.array([[1.0, 0.5], [0.5, 1.0]])

#: Benchmark presets: `mult` is the multiplicative-noise string with damping 2
#: and Gaussian noise profiles, `add` the lightly damped string with additive
#: noise; both use correlated noise channels and horizon T = 1.
PRESETS = {
    "mult": dict(
        n=1000, alpha=2.0, f1="sin(3z)",
        g_list=("gauss(1)", "gauss(1/2)"),
        noise_kind="multiplicative", K=_WAVE_K,
        u="exp:-0.1", T=1.0,
    ),
    "add": dict(
        n=1000, alpha=0.1, f1="cos(2z)",
        f2_list=("sin(z)", "sin(z)*gauss(1)"),
        noise_kind="additive", K=_WAVE_K,
        u="const:1", T=1.0,
    ),
}


def preset_config(name, n=None, output_kind="position", epsilon=0.05):
    """WaveConfig for a named preset, optionally overriding the dimension."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    p = PRESETS[name]
    return WaveConfig(
        n=n if n is not None else p["n"], alpha=p["alpha"], f1=p["f1"],
        f2_list=tuple(p.get("f2_list", ())), g_list=tuple(p.get("g_list", ())),
        epsilon=epsilon, output_kind=output_kind, noise_kind=p["noise_kind"],
        K=p["K"])


def preset_input(name):
    """The control signal used with a named preset, as (callable, spec string)."""
    spec = PRESETS[name]["u"]
    kind, _, value = spec.partition(":")
    val = float(value)
    if kind == "const":
        return (lambda t: val), spec
    if kind == "exp":
        return (lambda t: np.exp(val * t)), spec
    raise ValueError(f"unknown input spec {spec!r}")
