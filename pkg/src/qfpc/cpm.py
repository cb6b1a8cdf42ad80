"""Density matrices and completely positive maps in finite dimension.

A map ``f : Mat_n -> Mat_m`` is stored by its Choi matrix

    J = sum_ij |i><j| (x) f(|i><j|)        (input factor first, size n*m)

and, lazily, by its natural (Liouville) matrix ``S`` of shape ``(m*m, n*n)``
acting on row-major vectorisations, ``vec(f(X)) = S vec(X)``. Composition
and tensor products are done on ``S``; positivity checks on ``J``.

Qubit registers are big-endian: in ``2**k`` dimensions, slot 0 is the most
significant bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from .errors import (DimMismatch, NotCP, NotHermitian, NotPositive,
                     NotUnitary, TraceExceedsOne)


@dataclass(frozen=True)
class Tolerance:
    eps_num: float = 1e-9
    eps_prune: float = 1e-12

    def __post_init__(self):
        if not (0 < self.eps_num < 1):
            raise ValueError("eps_num must lie in (0, 1)")
        if not (0 <= self.eps_prune < self.eps_num):
            raise ValueError("eps_prune must lie in [0, eps_num)")


DEFAULT_TOL = Tolerance()


def hermitize(m):
    m = np.asarray(m, dtype=complex)
    return (m + m.conj().T) / 2


def psd_eigvalsh(m, eps=DEFAULT_TOL.eps_num):
    """Eigenvalues of the symmetrised matrix, with tiny negatives clamped."""
    w = np.linalg.eigvalsh(hermitize(m))
    w[(w < 0) & (w >= -eps)] = 0.0
    return w


# ---------------------------------------------------------------- states

@dataclass(frozen=True)
class DensityMatrix:
    dim: int
    data: np.ndarray = field(repr=False)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.data)))


def mk_density(m, tol: Tolerance = DEFAULT_TOL) -> DensityMatrix:
    """Validate ``m`` as a subnormalised density matrix."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimMismatch(f"density matrix must be square, got shape {m.shape}")
    herm_err = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if herm_err > tol.eps_num:
        raise NotHermitian(f"max |m - m^dagger| = {herm_err:.3e}")
    if m.size:
        lo = float(np.min(np.linalg.eigvalsh(hermitize(m))))
        if lo < -tol.eps_num:
            raise NotPositive(f"minimum eigenvalue {lo:.3e}")
    tr = float(np.real(np.trace(m)))
    if tr > 1 + tol.eps_num or tr < -tol.eps_num:
        raise TraceExceedsOne(f"trace {tr:.6g} outside [0, 1]")
    return DensityMatrix(m.shape[0], hermitize(m))


# ---------------------------------------------- choi <-> natural conversion

def superop_to_choi(S, n, m):
    # S[(a,b),(i,j)] = f(E_ij)[a,b] ;  J[(i,a),(j,b)] = same
    return np.asarray(S).reshape(m, m, n, n).transpose(2, 0, 3, 1).reshape(n * m, n * m)


def choi_to_superop(J, n, m):
    return np.asarray(J).reshape(n, m, n, m).transpose(1, 3, 0, 2).reshape(m * m, n * n)


def kraus_to_superop(kraus):
    return sum(np.kron(K, K.conj()) for K in kraus)


def superop_tensor(S1, n1, m1, S2, n2, m2):
    """Natural matrix of f1 (x) f2 from those of f1 and f2."""
    T = np.einsum("abcd,efgh->aebfcgdh",
                  S1.reshape(m1, m1, n1, n1), S2.reshape(m2, m2, n2, n2))
    return T.reshape((m1 * m2) ** 2, (n1 * n2) ** 2)


class ChoiMap:
    """A completely positive map ``Mat_n -> Mat_m``.

    Construct with one of :meth:`from_choi`, :meth:`from_superop` or
    :meth:`from_kraus`. Instances are treated as immutable.
    """

    __slots__ = ("dim_in", "dim_out", "_choi", "_superop", "kraus")

    def __init__(self, dim_in, dim_out, choi=None, superop=None, kraus=None):
        self.dim_in = int(dim_in)
        self.dim_out = int(dim_out)
        self._choi = None if choi is None else np.asarray(choi, dtype=complex)
        self._superop = None if superop is None else np.asarray(superop, dtype=complex)
        self.kraus = None if kraus is None else [np.asarray(k, dtype=complex) for k in kraus]
        if self._choi is None and self._superop is None:
            if self.kraus is None:
                raise ValueError("need a choi matrix, a natural matrix or kraus operators")
            self._superop = kraus_to_superop(self.kraus)

    @classmethod
    def from_choi(cls, J, n, m):
        J = np.asarray(J, dtype=complex)
        if J.shape != (n * m, n * m):
            raise DimMismatch(f"choi shape {J.shape} does not match {n}->{m}")
        return cls(n, m, choi=J)

    @classmethod
    def from_superop(cls, S, n, m):
        S = np.asarray(S, dtype=complex)
        if S.shape != (m * m, n * n):
            raise DimMismatch(f"natural matrix shape {S.shape} does not match {n}->{m}")
        return cls(n, m, superop=S)

    @classmethod
    def from_kraus(cls, kraus):
        kraus = [np.atleast_2d(np.asarray(k, dtype=complex)) for k in kraus]
        m, n = kraus[0].shape
        for k in kraus:
            if k.shape != (m, n):
                raise DimMismatch("kraus operators of differing shapes")
        return cls(n, m, kraus=kraus)

    @classmethod
    def zero(cls, n, m):
        return cls(n, m, superop=np.zeros((m * m, n * n), dtype=complex))

    @classmethod
    def identity(cls, n):
        return cls.from_kraus([np.eye(n)])

    @property
    def choi(self) -> np.ndarray:
        if self._choi is None:
            self._choi = superop_to_choi(self._superop, self.dim_in, self.dim_out)
        return self._choi

    @property
    def superop(self) -> np.ndarray:
        if self._superop is None:
            self._superop = choi_to_superop(self._choi, self.dim_in, self.dim_out)
        return self._superop

    @property
    def shape(self):
        return (self.dim_in, self.dim_out)

    def __repr__(self):
        return f"ChoiMap({self.dim_in}->{self.dim_out})"

    def __call__(self, rho):
        return apply(self, rho)

    def __add__(self, other):
        return add(self, other)

    def __matmul__(self, other):
        return compose(self, other)

    def allclose(self, other, atol=DEFAULT_TOL.eps_num) -> bool:
        return self.shape == other.shape and max_entry_distance(self, other) <= atol


def max_entry_distance(f: ChoiMap, g: ChoiMap) -> float:
    if f.shape != g.shape:
        raise DimMismatch(f"{f.shape} vs {g.shape}")
    return float(np.max(np.abs(f.choi - g.choi)))


# ------------------------------------------------------------- operations

def apply(f: ChoiMap, rho, use_kraus=False):
    rho = np.asarray(rho, dtype=complex)
    n = f.dim_in
    if rho.shape != (n, n):
        raise DimMismatch(f"input of shape {rho.shape} to a map on Mat_{n}")
    if use_kraus and f.kraus is not None:
        return sum(K @ rho @ K.conj().T for K in f.kraus)
    return (f.superop @ rho.reshape(-1)).reshape(f.dim_out, f.dim_out)


def compose(g: ChoiMap, f: ChoiMap) -> ChoiMap:
    """``g o f``."""
    if f.dim_out != g.dim_in:
        raise DimMismatch(f"cannot compose {g.shape} after {f.shape}")
    kraus = None
    if f.kraus is not None and g.kraus is not None and len(f.kraus) * len(g.kraus) <= 16:
        kraus = [G @ F for G in g.kraus for F in f.kraus]
    return ChoiMap(f.dim_in, g.dim_out, superop=g.superop @ f.superop, kraus=kraus)


def tensor(f: ChoiMap, g: ChoiMap) -> ChoiMap:
    kraus = None
    if f.kraus is not None and g.kraus is not None and len(f.kraus) * len(g.kraus) <= 16:
        kraus = [np.kron(F, G) for F in f.kraus for G in g.kraus]
    S = superop_tensor(f.superop, f.dim_in, f.dim_out, g.superop, g.dim_in, g.dim_out)
    return ChoiMap(f.dim_in * g.dim_in, f.dim_out * g.dim_out, superop=S, kraus=kraus)


def tensor_all(maps: Sequence[ChoiMap]) -> ChoiMap:
    if not maps:
        return ChoiMap.identity(1)
    return reduce(tensor, maps)


def add(f: ChoiMap, g: ChoiMap) -> ChoiMap:
    if f.shape != g.shape:
        raise DimMismatch(f"cannot add {f.shape} and {g.shape}")
    kraus = None
    if f.kraus is not None and g.kraus is not None:
        kraus = f.kraus + g.kraus
    return ChoiMap(f.dim_in, f.dim_out, superop=f.superop + g.superop, kraus=kraus)


def scale(r: float, f: ChoiMap) -> ChoiMap:
    if r < 0:
        raise ValueError("scale factor must be nonnegative")
    kraus = None if f.kraus is None else [np.sqrt(r) * K for K in f.kraus]
    return ChoiMap(f.dim_in, f.dim_out, superop=r * f.superop, kraus=kraus)


def dual_superop(f: ChoiMap) -> np.ndarray:
    """Natural matrix of the Hilbert-Schmidt adjoint ``f^*``."""
    n, m = f.dim_in, f.dim_out
    # <Y, f(X)> = <f*(Y), X>  =>  S* = conj(S)^T up to the vec convention
    return f.superop.conj().T.reshape(n * n, m * m)


def is_cp(f: ChoiMap, tol: Tolerance = DEFAULT_TOL) -> bool:
    J = f.choi
    if np.max(np.abs(J - J.conj().T), initial=0.0) > tol.eps_num:
        return False
    return bool(np.min(np.linalg.eigvalsh(hermitize(J)), initial=0.0) >= -tol.eps_num)


def operator_norm(f: ChoiMap, tol: Tolerance = DEFAULT_TOL, check=True) -> float:
    """sup of tr f(x) over unit-trace states: the top eigenvalue of f^*(1)."""
    if check and not is_cp(f, tol):
        raise NotCP("operator_norm requires a completely positive map")
    n, m = f.dim_in, f.dim_out
    fstar_one = (dual_superop(f) @ np.eye(m).reshape(-1)).reshape(n, n)
    return float(max(np.max(np.linalg.eigvalsh(hermitize(fstar_one))), 0.0))


def operator_norm_sampled(f: ChoiMap, samples=10_000, rng=None) -> float:
    """Oracle: max of tr f(|v><v|) over random pure states."""
    rng = np.random.default_rng(rng)
    n = f.dim_in
    v = rng.normal(size=(samples, n)) + 1j * rng.normal(size=(samples, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    rhos = np.einsum("si,sj->sij", v, v.conj()).reshape(samples, -1)
    trace_row = np.eye(f.dim_out).reshape(-1) @ f.superop
    return float(np.max(np.real(rhos @ trace_row)))


def is_superoperator(f: ChoiMap, tol: Tolerance = DEFAULT_TOL) -> bool:
    return is_cp(f, tol) and operator_norm(f, tol, check=False) <= 1 + tol.eps_num


def trace_norm(m) -> float:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimMismatch("trace_norm expects a square matrix")
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def choi_from_kraus_check(f: ChoiMap, tol: Tolerance = DEFAULT_TOL) -> bool:
    """True when the Kraus form (if any) reproduces the stored representation."""
    if f.kraus is None:
        return True
    other = ChoiMap.from_kraus(f.kraus)
    return max_entry_distance(f, other) <= tol.eps_num


# ---------------------------------------------------------- standard maps

GATES = {
    "I": np.eye(2),
    "H": np.array([[1, 1], [1, -1]]) / np.sqrt(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.array([[1, 0], [0, -1]]),
    "S": np.array([[1, 0], [0, 1j]]),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]]),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
    "CZ": np.diag([1, 1, 1, -1]),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]]),
}


def check_unitary(U, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise NotUnitary(f"matrix of shape {U.shape} is not square")
    d = U.shape[0]
    if d & (d - 1) or d == 0:
        raise NotUnitary(f"dimension {d} is not a power of two")
    err = float(np.max(np.abs(U.conj().T @ U - np.eye(d))))
    if err > tol.eps_num:
        raise NotUnitary(f"max |U^dagger U - I| = {err:.3e}")
    return U


def phi0() -> ChoiMap:
    return ChoiMap.from_kraus([np.array([[1.0], [0.0]])])


def theta0() -> ChoiMap:
    return ChoiMap.from_kraus([np.array([[1.0, 0.0]])])


def theta1() -> ChoiMap:
    return ChoiMap.from_kraus([np.array([[0.0, 1.0]])])


def psi(U) -> ChoiMap:
    return ChoiMap.from_kraus([check_unitary(U)])


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    """Unitary sending qubit slot ``i`` to slot ``perm[i]``."""
    k = len(perm)
    if sorted(perm) != list(range(k)):
        raise ValueError(f"{perm} is not a permutation")
    d = 2 ** k
    P = np.zeros((d, d))
    for x in range(d):
        bits = [(x >> (k - 1 - i)) & 1 for i in range(k)]
        out = [0] * k
        for i, b in enumerate(bits):
            out[perm[i]] = b
        y = int("".join(map(str, out)), 2) if k else 0
        P[y, x] = 1
    return P


def permute(perm: Sequence[int]) -> ChoiMap:
    return ChoiMap.from_kraus([permutation_matrix(perm)])


def trace_out(slot: int, k: int) -> ChoiMap:
    """Partial trace of qubit ``slot`` out of ``k`` qubits."""
    kraus = []
    for b in (0, 1):
        e = np.zeros((1, 2))
        e[0, b] = 1
        ops = [np.eye(2)] * k
        ops[slot] = e
        kraus.append(reduce(np.kron, ops))
    return ChoiMap.from_kraus(kraus)


def transpose_map(n: int) -> ChoiMap:
    S = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            S[j * n + i, i * n + j] = 1
    return ChoiMap.from_superop(S, n, n)


def std_maps(name: str, *params) -> ChoiMap:
    """Factory for the standard maps by name."""
    if name == "phi0":
        return phi0()
    if name == "theta0":
        return theta0()
    if name == "theta1":
        return theta1()
    if name == "psi":
        (U,) = params
        return psi(GATES[U] if isinstance(U, str) else U)
    if name == "permute":
        return permute(params[0])
    if name == "trace_out":
        return trace_out(*params)
    if name == "identity":
        return ChoiMap.identity(params[0])
    if name == "trace":
        return add(theta0(), theta1())
    raise KeyError(name)


# ------------------------------------------------------------ JSON helpers

def matrix_to_json(m):
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(obj):
    """Entries are ``[re, im]`` pairs or plain real numbers."""
    def entry(z):
        return complex(*z) if isinstance(z, (list, tuple)) else complex(z)
    return np.array([[entry(z) for z in row] for row in obj], dtype=complex)
