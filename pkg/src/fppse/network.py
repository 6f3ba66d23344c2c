"""Grid model, bus admittance matrix, and Hermitian measurement matrices.

Every SCADA quantity handled here is a quadratic form ``z = v^H H v`` of the
complex bus-voltage vector ``v``.  The matrices are built from the standard
two-port branch model, so tap ratios and phase shifters in stock MATPOWER
cases are honoured; with unity taps the model reduces to the plain
pi-equivalent line.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class BusKind(enum.Enum):
    SLACK = "Slack"
    PV = "PV"
    PQ = "PQ"


class MeasurementKind(enum.Enum):
    VMAG2 = "Vmag2"
    PINJ = "Pinj"
    QINJ = "Qinj"
    PFLOW_F = "PflowF"
    QFLOW_F = "QflowF"
    PFLOW_T = "PflowT"
    QFLOW_T = "QflowT"

    @property
    def is_flow(self) -> bool:
        return self in FLOW_KINDS

    @property
    def is_voltage(self) -> bool:
        return self is MeasurementKind.VMAG2


FLOW_KINDS = frozenset(
    {
        MeasurementKind.PFLOW_F,
        MeasurementKind.QFLOW_F,
        MeasurementKind.PFLOW_T,
        MeasurementKind.QFLOW_T,
    }
)

#: Order in which measurement types are added in the types-vs-MSE experiment.
TYPE_ORDER = (
    MeasurementKind.VMAG2,
    MeasurementKind.PFLOW_F,
    MeasurementKind.PFLOW_T,
    MeasurementKind.QFLOW_F,
    MeasurementKind.QFLOW_T,
    MeasurementKind.PINJ,
    MeasurementKind.QINJ,
)

Location = Union[int, tuple[int, int]]


@dataclass(frozen=True)
class Bus:
    """A network node.

    ``id`` is the contiguous internal 1-based index; ``external_id`` is the
    bus number used in the source case file.
    """

    id: int
    kind: BusKind
    shunt_g: float = 0.0
    shunt_b: float = 0.0
    external_id: int | None = None

    @property
    def label(self) -> int:
        return self.id if self.external_id is None else self.external_id


@dataclass(frozen=True)
class Branch:
    """Two-port branch between internal buses ``from_bus`` and ``to_bus`` (1-based)."""

    from_bus: int
    to_bus: int
    series_admittance: complex
    shunt_from: complex = 0j
    shunt_to: complex = 0j
    tap_ratio: float = 0.0
    phase_shift: float = 0.0

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise ValueError(f"branch {self.from_bus}-{self.to_bus} is a self loop")
        y = complex(self.series_admittance)
        if not np.isfinite(y) or y == 0:
            raise ValueError(
                f"branch {self.from_bus}-{self.to_bus}: series admittance must be finite and nonzero"
            )
        if self.tap_ratio < 0:
            raise ValueError("tap ratio must be nonnegative")

    @property
    def complex_tap(self) -> complex:
        t = self.tap_ratio if self.tap_ratio != 0 else 1.0
        return t * np.exp(1j * self.phase_shift)

    def two_port(self) -> tuple[complex, complex, complex, complex]:
        """Return ``(Yff, Yft, Ytf, Ytt)`` so that ``I_f = Yff V_f + Yft V_t``."""
        y = complex(self.series_admittance)
        tau = self.complex_tap
        yff = (y + self.shunt_from) / (abs(tau) ** 2)
        yft = -y / np.conj(tau)
        ytf = -y / tau
        ytt = y + self.shunt_to
        return yff, yft, ytf, ytt


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    base_mva: float = 100.0
    name: str = "network"
    _slack: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        if self.base_mva <= 0:
            raise ValueError("base_mva must be positive")
        ids = [b.id for b in self.buses]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError("bus ids must be contiguous 1..N in order")
        slacks = [b.id for b in self.buses if b.kind is BusKind.SLACK]
        if len(slacks) != 1:
            raise ValueError(f"expected exactly one slack bus, found {len(slacks)}")
        object.__setattr__(self, "_slack", slacks[0] - 1)
        n = len(self.buses)
        for br in self.branches:
            if not (1 <= br.from_bus <= n and 1 <= br.to_bus <= n):
                raise ValueError(f"branch {br.from_bus}-{br.to_bus} references a missing bus")
        if n > 1 and not self.is_connected():
            warnings.warn(f"network {self.name!r} is not connected", RuntimeWarning, stacklevel=2)

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    @property
    def slack(self) -> int:
        """0-based internal index of the slack bus."""
        return self._slack

    def external_ids(self) -> list[int]:
        return [b.label for b in self.buses]

    def is_connected(self) -> bool:
        n = self.n_buses
        if not self.branches:
            return n <= 1
        f = np.array([b.from_bus - 1 for b in self.branches])
        t = np.array([b.to_bus - 1 for b in self.branches])
        adj = sp.coo_matrix((np.ones(len(f)), (f, t)), shape=(n, n))
        ncomp, _ = connected_components(adj, directed=False)
        return ncomp == 1

    def branches_between(self, m: int, n: int) -> list[Branch]:
        """Branches joining buses ``m`` and ``n`` (1-based), in either orientation."""
        return [b for b in self.branches if {b.from_bus, b.to_bus} == {m, n}]


@dataclass(frozen=True)
class AdmittanceMatrix:
    y: sp.csr_matrix

    def toarray(self) -> np.ndarray:
        return self.y.toarray()


def build_admittance(net: Network) -> AdmittanceMatrix:
    """Assemble the sparse bus admittance matrix, summing parallel branches."""
    n = net.n_buses
    rows, cols, vals = [], [], []
    for br in net.branches:
        f, t = br.from_bus - 1, br.to_bus - 1
        yff, yft, ytf, ytt = br.two_port()
        rows += [f, f, t, t]
        cols += [f, t, f, t]
        vals += [yff, yft, ytf, ytt]
    for bus in net.buses:
        if bus.shunt_g or bus.shunt_b:
            k = bus.id - 1
            rows.append(k)
            cols.append(k)
            vals.append(complex(bus.shunt_g, bus.shunt_b))
    y = sp.coo_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(n, n)).tocsr()
    y.sum_duplicates()
    return AdmittanceMatrix(y)


@dataclass(frozen=True)
class HermitianMeasurementMatrix:
    kind: MeasurementKind
    location: Location
    h: sp.csr_matrix

    def toarray(self) -> np.ndarray:
        return self.h.toarray()


def _hermitian_parts(k: sp.spmatrix) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Split ``v^H K v`` into the forms giving its real part and minus its imaginary part."""
    kh = k.conj().T
    p = ((k + kh) * 0.5).tocsr()
    q = ((k - kh) * 0.5j).tocsr()
    return p, q


def _flow_operator(net: Network, m: int, n: int, n_buses: int) -> sp.csr_matrix:
    """Matrix ``K`` with ``v^H K v = conj(S)`` for the power leaving bus ``m`` toward ``n``.

    Parallel branches between the two buses are aggregated.
    """
    branches = net.branches_between(m, n)
    if not branches:
        raise KeyError(f"no branch between buses {m} and {n}")
    rows, cols, vals = [], [], []
    for br in branches:
        yff, yft, ytf, ytt = br.two_port()
        if br.from_bus == m:
            own, other = yff, yft
        else:
            own, other = ytt, ytf
        rows += [m - 1, m - 1]
        cols += [m - 1, n - 1]
        vals += [own, other]
    return sp.coo_matrix((vals, (rows, cols)), shape=(n_buses, n_buses), dtype=complex).tocsr()


def measurement_matrix(
    net: Network, y: AdmittanceMatrix, kind: MeasurementKind | str, location: Location
) -> HermitianMeasurementMatrix:
    """Build ``H`` such that ``v^H H v`` equals the requested physical quantity.

    Bus quantities take a 1-based bus index; flow quantities take the branch
    endpoint pair ``(m, n)``.  ``*_F`` kinds are the power leaving ``m`` into
    the line, ``*_T`` kinds the power leaving ``n`` into the line (receiving-end
    flow in MATPOWER's sign convention).
    """
    kind = MeasurementKind(kind)
    nb = net.n_buses
    if kind.is_flow:
        try:
            m, n = (int(i) for i in location)  # type: ignore[union-attr]
        except TypeError:
            raise ValueError(f"{kind.value} needs a (from, to) bus pair, got {location!r}") from None
        for b in (m, n):
            if not 1 <= b <= nb:
                raise IndexError(f"bus {b} out of range 1..{nb}")
        if kind in (MeasurementKind.PFLOW_F, MeasurementKind.QFLOW_F):
            k = _flow_operator(net, m, n, nb)
        else:
            k = _flow_operator(net, n, m, nb)
        p, q = _hermitian_parts(k)
        h = p if kind in (MeasurementKind.PFLOW_F, MeasurementKind.PFLOW_T) else q
        loc: Location = (m, n)
    else:
        if isinstance(location, tuple):
            raise ValueError(f"{kind.value} needs a bus index, got {location!r}")
        b = int(location)
        if not 1 <= b <= nb:
            raise IndexError(f"bus {b} out of range 1..{nb}")
        if kind is MeasurementKind.VMAG2:
            h = sp.csr_matrix(([1.0 + 0j], ([b - 1], [b - 1])), shape=(nb, nb))
        else:
            sel = sp.csr_matrix(([1.0], ([b - 1], [b - 1])), shape=(nb, nb))
            yn = sel @ y.y
            p, q = _hermitian_parts(yn)
            h = p if kind is MeasurementKind.PINJ else q
        loc = b
    h = sp.csr_matrix(h)
    h.eliminate_zeros()
    return HermitianMeasurementMatrix(kind, loc, h)


def evaluate(h: HermitianMeasurementMatrix | sp.spmatrix | np.ndarray, v: np.ndarray) -> float:
    """Return the real quadratic form ``v^H H v``."""
    mat = h.h if isinstance(h, HermitianMeasurementMatrix) else h
    v = np.asarray(v, dtype=complex)
    if mat.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: H is {mat.shape}, v has {v.shape[0]} entries")
    return float(np.real(np.vdot(v, mat @ v)))


def bus_power_injections(y: AdmittanceMatrix, v: np.ndarray) -> np.ndarray:
    """Complex injections ``diag(v) conj(Y v)``."""
    v = np.asarray(v, dtype=complex)
    return v * np.conj(y.y @ v)


def all_locations(net: Network, kind: MeasurementKind) -> list[Location]:
    """Every location of ``kind`` in the network, buses first-to-last or branches in file order."""
    if kind.is_flow:
        return [(br.from_bus, br.to_bus) for br in net.branches]
    return [b.id for b in net.buses]


def matrices_for(
    net: Network, y: AdmittanceMatrix, items: Sequence[tuple[MeasurementKind, Location]]
) -> list[HermitianMeasurementMatrix]:
    return [measurement_matrix(net, y, k, loc) for k, loc in items]
