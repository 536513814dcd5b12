"""Neural density operator: a three-layer RBM purification of a mixed state.

Two amplitude/phase networks (lambda/mu) share a visible layer that one-hot
encodes the d basis states. Hidden units are marginalized analytically into
softplus terms; the ancilla layer purifies the state and is traced out in
closed form, giving every log density entry

    A(v, v') = Gamma_lam_plus(v, v') + i*Gamma_mu_minus(v, v') + Pi(v, v')

with rho = exp(A) / Z and Z = sum_v exp(A(v, v)). The same state is also
computable by brute-force enumeration of the 2^m_a ancilla configurations
(`purification_oracle`), which pins the closed form in tests.

The phase-network ancilla bias cancels between a purification amplitude and
its conjugate, so the parameter set carries only the lambda ancilla bias.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .kernels import _logistic, _logistic_c, _softplus, _softplus_c, param_offsets

ARRAY_NAMES = ("w_lam", "w_mu", "u_lam", "u_mu", "b_lam", "b_mu", "c_lam", "c_mu", "d_lam")

CHECKPOINT_FORMAT_VERSION = 1


def n_params(d: int, m_h: int, m_a: int) -> int:
    """Length of the flattened parameter vector."""
    return param_offsets(d, m_h, m_a)["total"]


def one_hot(d: int, index: int) -> np.ndarray:
    """Visible-layer encoding of basis state `index`."""
    if not 0 <= index < d:
        raise ValueError(f"index {index} out of range [0, {d})")
    vec = np.zeros(d)
    vec[index] = 1.0
    return vec


@dataclass(frozen=True)
class NdoParams:
    """The nine real parameter arrays of the amplitude (lam) and phase (mu) networks."""

    w_lam: np.ndarray  # (m_h, d) hidden weights
    w_mu: np.ndarray
    u_lam: np.ndarray  # (m_a, d) ancilla weights
    u_mu: np.ndarray
    b_lam: np.ndarray  # (d,) visible biases
    b_mu: np.ndarray
    c_lam: np.ndarray  # (m_h,) hidden biases
    c_mu: np.ndarray
    d_lam: np.ndarray  # (m_a,) ancilla bias (amplitude network only)

    def __post_init__(self):
        for name in ARRAY_NAMES:
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        m_h, d = self.w_lam.shape
        m_a = self.u_lam.shape[0]
        expected = {
            "w_lam": (m_h, d), "w_mu": (m_h, d),
            "u_lam": (m_a, d), "u_mu": (m_a, d),
            "b_lam": (d,), "b_mu": (d,),
            "c_lam": (m_h,), "c_mu": (m_h,), "d_lam": (m_a,),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def dim(self) -> int:
        return self.w_lam.shape[1]

    @property
    def m_h(self) -> int:
        return self.w_lam.shape[0]

    @property
    def m_a(self) -> int:
        return self.u_lam.shape[0]

    @property
    def n_params(self) -> int:
        return n_params(self.dim, self.m_h, self.m_a)

    def arrays(self) -> tuple[np.ndarray, ...]:
        """The nine arrays in flattening order."""
        return tuple(getattr(self, name) for name in ARRAY_NAMES)

    def to_vector(self) -> np.ndarray:
        """Flatten to the optimizer's parameter vector (row-major matrices)."""
        return np.concatenate([arr.ravel() for arr in self.arrays()])

    @classmethod
    def from_vector(cls, d: int, m_h: int, m_a: int, vec: np.ndarray) -> "NdoParams":
        expected = n_params(d, m_h, m_a)
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (expected,):
            raise ValueError(f"vector length {vec.shape}, expected ({expected},)")
        off = param_offsets(d, m_h, m_a)
        shapes = {
            "w_lam": (m_h, d), "w_mu": (m_h, d), "u_lam": (m_a, d), "u_mu": (m_a, d),
            "b_lam": (d,), "b_mu": (d,), "c_lam": (m_h,), "c_mu": (m_h,), "d_lam": (m_a,),
        }
        arrays = {}
        for name, shape in shapes.items():
            size = int(np.prod(shape))
            arrays[name] = vec[off[name] : off[name] + size].reshape(shape)
        return cls(**arrays)


def init_params(d: int, m_h: int, m_a: int, scale: float = 0.01, seed: int = 0) -> NdoParams:
    """Parameters drawn i.i.d. uniform on [-scale, scale]."""
    if scale < 0:
        raise ValueError(f"scale must be >= 0, got {scale}")
    rng = np.random.default_rng(seed)
    return NdoParams.from_vector(
        d, m_h, m_a, rng.uniform(-scale, scale, n_params(d, m_h, m_a))
    )


def a_entry(params: NdoParams, v: int, vp: int) -> complex:
    """Log density entry A(v, v') for basis indices v, v'."""
    hs_l_v = _softplus(params.w_lam[:, v] + params.c_lam).sum()
    hs_l_vp = _softplus(params.w_lam[:, vp] + params.c_lam).sum()
    hs_m_v = _softplus(params.w_mu[:, v] + params.c_mu).sum()
    hs_m_vp = _softplus(params.w_mu[:, vp] + params.c_mu).sum()
    gamma_plus = 0.5 * (hs_l_v + hs_l_vp + params.b_lam[v] + params.b_lam[vp])
    gamma_minus = 0.5 * (hs_m_v - hs_m_vp + params.b_mu[v] - params.b_mu[vp])
    z = (
        0.5 * (params.u_lam[:, v] + params.u_lam[:, vp])
        + 0.5j * (params.u_mu[:, v] - params.u_mu[:, vp])
        + params.d_lam
    ).astype(np.complex128)
    return complex(gamma_plus + 1j * gamma_minus + _softplus_c(z).sum())


def a_matrix(params: NdoParams) -> np.ndarray:
    """All log density entries as a (d, d) complex matrix."""
    a, _, _, _ = kernels.pair_cache(*params.arrays())
    return a


def log_z(params: NdoParams) -> float:
    """log sum_v exp(A(v, v)), evaluated as a log-sum-exp."""
    diag = a_matrix(params).diagonal().real
    peak = diag.max()
    return float(peak + np.log(np.exp(diag - peak).sum()))


def density_matrix(params: NdoParams) -> np.ndarray:
    """The normalized state exp(A) / Z; Hermitian, unit trace and PSD by construction."""
    a = a_matrix(params)
    diag = a.diagonal().real
    peak = diag.max()
    lz = peak + np.log(np.exp(diag - peak).sum())
    return np.exp(a - lz)


def purification_oracle(params: NdoParams, max_ancilla: int = 12) -> np.ndarray:
    """Brute-force state from the purified wavefunction, tracing the ancilla.

    Enumerates all 2^m_a binary ancilla configurations a and forms
    Psi(v, a) ~ sqrt(p_lam(v, a)) * exp(i log p_mu(v, a) / 2) with hidden
    units already marginalized inside p; the Gram sum over a, normalized to
    unit trace, must reproduce `density_matrix`.
    """
    if params.m_a > max_ancilla:
        raise ValueError(
            f"refusing to enumerate 2^{params.m_a} ancilla configurations "
            f"(limit m_a <= {max_ancilla})"
        )
    d = params.dim
    confs = (
        (np.arange(2 ** params.m_a)[:, None] >> np.arange(params.m_a)[None, :]) & 1
    ).astype(float)
    hs_lam = _softplus(params.w_lam + params.c_lam[:, None]).sum(axis=0)
    hs_mu = _softplus(params.w_mu + params.c_mu[:, None]).sum(axis=0)
    log_p_lam = hs_lam[None, :] + confs @ params.u_lam + params.b_lam[None, :] + (confs @ params.d_lam)[:, None]
    log_p_mu = hs_mu[None, :] + confs @ params.u_mu + params.b_mu[None, :]
    shift = log_p_lam.max()  # cancels in the trace normalization
    psi = np.exp(0.5 * (log_p_lam - shift) + 0.5j * log_p_mu)
    rho = psi.T @ psi.conj()
    return rho / np.trace(rho).real


def grad_a(params: NdoParams, v: int, vp: int) -> np.ndarray:
    """Derivative of A(v, v') w.r.t. the flattened parameters, complex length P.

    Reference implementation for the structured fast paths: the one-hot
    encoding confines weight derivatives to columns v and vp.
    """
    d, m_h, m_a = params.dim, params.m_h, params.m_a
    off = param_offsets(d, m_h, m_a)
    g = np.zeros(off["total"], dtype=np.complex128)
    rows_h = np.arange(m_h) * d
    rows_a = np.arange(m_a) * d
    sig_l_v = _logistic(params.w_lam[:, v] + params.c_lam)
    sig_l_vp = _logistic(params.w_lam[:, vp] + params.c_lam)
    sig_m_v = _logistic(params.w_mu[:, v] + params.c_mu)
    sig_m_vp = _logistic(params.w_mu[:, vp] + params.c_mu)
    g[off["w_lam"] + rows_h + v] += 0.5 * sig_l_v
    g[off["w_lam"] + rows_h + vp] += 0.5 * sig_l_vp
    g[off["w_mu"] + rows_h + v] += 0.5j * sig_m_v
    g[off["w_mu"] + rows_h + vp] -= 0.5j * sig_m_vp
    g[off["c_lam"] : off["c_lam"] + m_h] = 0.5 * (sig_l_v + sig_l_vp)
    g[off["c_mu"] : off["c_mu"] + m_h] = 0.5j * (sig_m_v - sig_m_vp)
    g[off["b_lam"] + v] += 0.5
    g[off["b_lam"] + vp] += 0.5
    g[off["b_mu"] + v] += 0.5j
    g[off["b_mu"] + vp] -= 0.5j
    s = _logistic_c(
        (
            0.5 * (params.u_lam[:, v] + params.u_lam[:, vp])
            + 0.5j * (params.u_mu[:, v] - params.u_mu[:, vp])
            + params.d_lam
        ).astype(np.complex128)
    )
    g[off["u_lam"] + rows_a + v] += 0.5 * s
    g[off["u_lam"] + rows_a + vp] += 0.5 * s
    g[off["u_mu"] + rows_a + v] += 0.5j * s
    g[off["u_mu"] + rows_a + vp] -= 0.5j * s
    g[off["d_lam"] : off["d_lam"] + m_a] = s
    return g


@dataclass(frozen=True)
class NdoEval:
    """One-pass evaluation of everything the cost, gradient and metric reuse."""

    a: np.ndarray          # (d, d) complex log density entries
    rho: np.ndarray        # (d, d) complex state
    log_z: float
    sig_lam: np.ndarray    # (m_h, d) hidden logistic, amplitude net
    sig_mu: np.ndarray
    s_pair: np.ndarray     # (m_a, d, d) complex ancilla logistic per index pair
    s_diag: np.ndarray     # (m_a, d) its real diagonal
    grad_log_z: np.ndarray  # (P,) real, zero on mu-group entries


def evaluate(params: NdoParams) -> NdoEval:
    """Compute the state plus the gradient caches in one pass."""
    d, m_h, m_a = params.dim, params.m_h, params.m_a
    a, sig_lam, sig_mu, s_pair = kernels.pair_cache(*params.arrays())
    diag = a.diagonal().real
    peak = diag.max()
    lz = float(peak + np.log(np.exp(diag - peak).sum()))
    rho = np.exp(a - lz)
    pd = rho.diagonal().real
    idx = np.arange(d)
    s_diag = s_pair[:, idx, idx].real
    off = param_offsets(d, m_h, m_a)
    z = np.zeros(off["total"])
    z[off["w_lam"] : off["w_lam"] + m_h * d] = (sig_lam * pd[None, :]).ravel()
    z[off["u_lam"] : off["u_lam"] + m_a * d] = (s_diag * pd[None, :]).ravel()
    z[off["b_lam"] : off["b_lam"] + d] = pd
    z[off["c_lam"] : off["c_lam"] + m_h] = sig_lam @ pd
    z[off["d_lam"] : off["d_lam"] + m_a] = s_diag @ pd
    return NdoEval(a, rho, lz, sig_lam, sig_mu, s_pair, s_diag, z)


def rho_jacobian(params: NdoParams) -> np.ndarray:
    """d(rho)/d(theta) flattened row-major over (alpha, beta): (d*d, P) complex."""
    ev = evaluate(params)
    return kernels.assemble_jacobian(ev.rho, ev.sig_lam, ev.sig_mu, ev.s_pair, ev.grad_log_z)


def save_checkpoint(params: NdoParams, path) -> None:
    """Write parameters as JSON; float repr keeps the round trip bit-exact."""
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "dim": params.dim,
        "m_h": params.m_h,
        "m_a": params.m_a,
        "arrays": {name: getattr(params, name).tolist() for name in ARRAY_NAMES},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> NdoParams:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"checkpoint is not valid JSON: {exc}") from exc
    for field in ("format_version", "dim", "m_h", "m_a", "arrays"):
        if field not in doc:
            raise ValueError(f"checkpoint missing field {field!r}")
    if doc["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {doc['format_version']}")
    arrays = {}
    for name in ARRAY_NAMES:
        if name not in doc["arrays"]:
            raise ValueError(f"checkpoint missing array {name!r}")
        arrays[name] = np.array(doc["arrays"][name], dtype=float)
    params = NdoParams(**arrays)
    if (params.dim, params.m_h, params.m_a) != (doc["dim"], doc["m_h"], doc["m_a"]):
        raise ValueError("checkpoint header dims do not match array shapes")
    return params
