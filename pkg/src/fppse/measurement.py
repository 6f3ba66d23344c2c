"""Ground-truth sampling and measurement/specification sets."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .network import (
    TYPE_ORDER,
    AdmittanceMatrix,
    BusKind,
    HermitianMeasurementMatrix,
    Location,
    MeasurementKind,
    Network,
    all_locations,
    build_admittance,
    evaluate,
    measurement_matrix,
)

#: Weight given to noiseless records inside an otherwise noisy set.
ZERO_SIGMA_WEIGHT = 1e8


@dataclass(frozen=True)
class MeasurementRecord:
    kind: MeasurementKind
    location: Location
    z: float
    sigma: float = 0.0
    weight: float = 1.0


@dataclass(frozen=True)
class MeasurementSet:
    """Index-aligned measurement records and their Hermitian matrices.

    ``slack`` is the 0-based internal index of the reference bus; solvers use
    it to fix the global phase of their estimates.
    """

    records: tuple[MeasurementRecord, ...]
    matrices: tuple[HermitianMeasurementMatrix, ...]
    n_buses: int
    slack: int = 0

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "matrices", tuple(self.matrices))
        if not self.records:
            raise ValueError("a measurement set needs at least one record")
        if len(self.records) != len(self.matrices):
            raise ValueError("records and matrices must be index-aligned")
        for rec, mat in zip(self.records, self.matrices):
            if rec.kind is not mat.kind:
                raise ValueError(f"record kind {rec.kind} does not match matrix kind {mat.kind}")
            if rec.weight <= 0 or rec.sigma < 0:
                raise ValueError("weights must be positive and sigmas nonnegative")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def z(self) -> np.ndarray:
        return np.array([r.z for r in self.records])

    @property
    def sigma(self) -> np.ndarray:
        return np.array([r.sigma for r in self.records])

    @property
    def weights(self) -> np.ndarray:
        return np.array([r.weight for r in self.records])

    @property
    def kinds(self) -> tuple[MeasurementKind, ...]:
        return tuple(r.kind for r in self.records)

    def with_z(self, z: Sequence[float]) -> MeasurementSet:
        recs = tuple(replace(r, z=float(zi)) for r, zi in zip(self.records, z))
        return replace(self, records=recs)

    def with_weights(self, weights: Sequence[float]) -> MeasurementSet:
        recs = tuple(replace(r, weight=float(w)) for r, w in zip(self.records, weights))
        return replace(self, records=recs)

    def with_sigma(self, sigma: Sequence[float]) -> MeasurementSet:
        """Same values with noise levels ``sigma`` and weights ``1/sigma^2``.

        Zero entries get weight ``ZERO_SIGMA_WEIGHT``.
        """
        sig = np.asarray(sigma, dtype=float)
        if np.any(sig < 0):
            raise ValueError("noise standard deviations must be nonnegative")
        with np.errstate(divide="ignore"):
            w = np.where(sig > 0, 1.0 / sig**2, ZERO_SIGMA_WEIGHT)
        recs = tuple(replace(r, sigma=float(s), weight=float(wi)) for r, s, wi in zip(self.records, sig, w))
        return replace(self, records=recs)

    def stacked(self) -> sp.csr_matrix:
        """All matrices stacked vertically, shape ``(L*N, N)``; row block l is ``H_l``."""
        return sp.vstack([m.h for m in self.matrices], format="csr")

    def predict(self, v: np.ndarray) -> np.ndarray:
        """``v^H H_l v`` for every record."""
        v = np.asarray(v, dtype=complex)
        hv = (self.stacked() @ v).reshape(len(self), self.n_buses)
        return np.real(hv @ np.conj(v))


@dataclass(frozen=True)
class GroundTruth:
    v: np.ndarray
    rng_seed: int | None = None

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.v)

    @property
    def angles(self) -> np.ndarray:
        return np.angle(self.v)


def random_state(
    net: Network,
    theta_max: float,
    vmag_range: tuple[float, float] = (0.9, 1.1),
    rng: np.random.Generator | None = None,
    rng_seed: int | None = None,
) -> GroundTruth:
    """Draw i.i.d. uniform magnitudes and angles; the slack angle is exactly 0."""
    lo, hi = vmag_range
    if lo > hi or theta_max < 0:
        raise ValueError("invalid sampling ranges")
    rng = rng if rng is not None else np.random.default_rng(rng_seed)
    n = net.n_buses
    mag = rng.uniform(lo, hi, n)
    theta = rng.uniform(-theta_max, theta_max, n)
    theta[net.slack] = 0.0
    v = mag * np.exp(1j * theta)
    v[net.slack] = mag[net.slack]
    return GroundTruth(v, rng_seed)


def build_set(
    net: Network,
    items: Sequence[tuple[MeasurementKind, Location]],
    truth: GroundTruth | np.ndarray,
    y: AdmittanceMatrix | None = None,
) -> MeasurementSet:
    """Noiseless unit-weight set for ``items``, with z evaluated at the truth."""
    y = y if y is not None else build_admittance(net)
    v = truth.v if isinstance(truth, GroundTruth) else np.asarray(truth, dtype=complex)
    mats, recs = [], []
    for kind, loc in items:
        kind = MeasurementKind(kind)
        h = measurement_matrix(net, y, kind, loc)
        mats.append(h)
        recs.append(MeasurementRecord(kind, h.location, evaluate(h, v)))
    return MeasurementSet(tuple(recs), tuple(mats), net.n_buses, net.slack)


def classical_pf_items(net: Network) -> list[tuple[MeasurementKind, int]]:
    items: list[tuple[MeasurementKind, int]] = []
    for bus in net.buses:
        if bus.kind is BusKind.SLACK:
            items.append((MeasurementKind.VMAG2, bus.id))
        elif bus.kind is BusKind.PV:
            items += [(MeasurementKind.PINJ, bus.id), (MeasurementKind.VMAG2, bus.id)]
        else:
            items += [(MeasurementKind.PINJ, bus.id), (MeasurementKind.QINJ, bus.id)]
    return items


def type_prefix_items(net: Network, k: int) -> list[tuple[MeasurementKind, Location]]:
    if not 1 <= k <= len(TYPE_ORDER):
        raise ValueError(f"type count must lie in 1..{len(TYPE_ORDER)}, got {k}")
    items: list[tuple[MeasurementKind, Location]] = []
    for kind in TYPE_ORDER[:k]:
        items += [(kind, loc) for loc in all_locations(net, kind)]
    return items


def classical_pf_spec(net: Network, truth: GroundTruth, y: AdmittanceMatrix | None = None) -> MeasurementSet:
    """Slack |V|^2, PV (P, |V|^2), PQ (P, Q): the 2N-1 classical power-flow specifications."""
    return build_set(net, classical_pf_items(net), truth, y)


def type_prefix_spec(net: Network, truth: GroundTruth, k: int, y: AdmittanceMatrix | None = None) -> MeasurementSet:
    """Every location of the first ``k`` measurement types in the fixed type order."""
    return build_set(net, type_prefix_items(net, k), truth, y)


def sigma_for(kind: MeasurementKind, sigmas: Mapping[str, float] | float) -> float:
    """Look up the noise level of ``kind``: exact kind name, then voltage/power group, then ``all``."""
    if isinstance(sigmas, (int, float)):
        return float(sigmas)
    if kind.value in sigmas:
        return float(sigmas[kind.value])
    group = "voltage" if kind.is_voltage else "power"
    if group in sigmas:
        return float(sigmas[group])
    return float(sigmas.get("all", 0.0))


def add_awgn(
    mset: MeasurementSet, sigmas: Mapping[str, float] | float, rng: np.random.Generator
) -> MeasurementSet:
    """Corrupt every record with independent N(0, sigma^2) noise and reweight by 1/sigma^2.

    With all sigmas zero the set is returned unchanged.  Zero-sigma records in
    an otherwise noisy set get weight ``ZERO_SIGMA_WEIGHT``.
    """
    sig = np.array([sigma_for(r.kind, sigmas) for r in mset.records])
    if np.any(sig < 0):
        raise ValueError("noise standard deviations must be nonnegative")
    if not np.any(sig > 0):
        return mset
    noise = rng.standard_normal(len(sig)) * sig
    return mset.with_z(mset.z + noise).with_sigma(sig)


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one Monte-Carlo trial, derived from ``(seed, *key)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))
