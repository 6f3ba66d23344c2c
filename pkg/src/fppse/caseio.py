"""MATPOWER case files, experiment configuration, and result CSVs."""
from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .network import Branch, Bus, BusKind, MeasurementKind, Network

BUNDLED_CASES = ("case5", "case9", "case14", "case24_ieee_rts", "case30", "case39")

# MATPOWER column indices (0-based)
BUS_I, BUS_TYPE, GS, BS = 0, 1, 4, 5
F_BUS, T_BUS, BR_R, BR_X, BR_B, TAP, SHIFT, BR_STATUS = 0, 1, 2, 3, 4, 8, 9, 10

_BUS_TYPES = {1: BusKind.PQ, 2: BusKind.PV, 3: BusKind.SLACK}


class CaseParseError(ValueError):
    """Base class for malformed case files."""


class MalformedTableError(CaseParseError):
    pass


class NonNumericFieldError(CaseParseError):
    pass


class MissingSlackError(CaseParseError):
    pass


class ConfigError(ValueError):
    """Schema violation in an experiment config; ``pointer`` is a JSON pointer."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


def bundled_case(name: str) -> Path:
    """Path of a case file shipped with the package (``"case14"`` or ``"case14.m"``)."""
    stem = name[:-2] if name.endswith(".m") else name
    if stem not in BUNDLED_CASES:
        raise FileNotFoundError(f"no bundled case named {name!r}")
    return Path(str(resources.files("fppse") / "cases" / f"{stem}.m"))


def resolve_case(path_or_name: str | Path) -> Path:
    p = Path(path_or_name)
    if p.exists():
        return p
    return bundled_case(str(path_or_name))


_TABLES = ("bus", "gen", "branch")
_ASSIGN = re.compile(r"mpc\.(\w+)\s*=\s*(\[.*?\]|[^;\n]+)\s*;?", re.S)


def _strip_comments(text: str) -> str:
    return "\n".join(line.split("%", 1)[0] for line in text.splitlines())


def _parse_matrix(name: str, body: str) -> list[list[float]]:
    inner = body.strip()[1:-1]
    rows = []
    for raw in re.split(r"[;\n]", inner):
        cells = raw.replace(",", " ").split()
        if not cells:
            continue
        row = []
        for c, cell in enumerate(cells, start=1):
            try:
                row.append(float(cell))
            except ValueError:
                raise NonNumericFieldError(
                    f"mpc.{name}: row {len(rows) + 1}, column {c}: non-numeric value {cell!r}"
                ) from None
        rows.append(row)
    if rows:
        width = len(rows[0])
        for r, row in enumerate(rows, start=1):
            if len(row) != width:
                raise MalformedTableError(
                    f"mpc.{name}: row {r}, column {min(len(row), width) + 1}: "
                    f"expected {width} columns, found {len(row)}"
                )
    return rows


def _read_tables(text: str) -> dict[str, Any]:
    text = _strip_comments(text)
    out: dict[str, Any] = {}
    for m in _ASSIGN.finditer(text):
        name, body = m.group(1), m.group(2).strip()
        if body.startswith("["):
            if name in _TABLES:
                out[name] = _parse_matrix(name, body)
        else:
            out[name] = body.strip()
    return out


def _require_columns(name: str, rows: list[list[float]], ncols: int) -> None:
    for r, row in enumerate(rows, start=1):
        if len(row) < ncols:
            raise MalformedTableError(
                f"mpc.{name}: row {r}, column {len(row) + 1}: expected at least {ncols} columns"
            )


def parse_case_text(text: str, name: str = "case") -> Network:
    tables = _read_tables(text)
    for key in ("bus", "branch"):
        if key not in tables or not isinstance(tables[key], list):
            raise MalformedTableError(f"mpc.{key}: table missing")
    try:
        base_mva = float(tables.get("baseMVA", "100"))
    except ValueError:
        raise NonNumericFieldError(f"mpc.baseMVA: row 1, column 1: {tables['baseMVA']!r}") from None

    bus_rows, br_rows = tables["bus"], tables["branch"]
    _require_columns("bus", bus_rows, BS + 1)
    _require_columns("branch", br_rows, BR_B + 1)

    index: dict[int, int] = {}
    buses: list[Bus] = []
    for r, row in enumerate(bus_rows, start=1):
        ext = int(row[BUS_I])
        code = int(row[BUS_TYPE])
        if code == 4:
            continue  # isolated
        if code not in _BUS_TYPES:
            raise MalformedTableError(f"mpc.bus: row {r}, column {BUS_TYPE + 1}: unknown bus type {code}")
        if ext in index:
            raise MalformedTableError(f"mpc.bus: row {r}, column {BUS_I + 1}: duplicate bus {ext}")
        index[ext] = len(buses) + 1
        buses.append(
            Bus(
                id=len(buses) + 1,
                kind=_BUS_TYPES[code],
                shunt_g=row[GS] / base_mva,
                shunt_b=row[BS] / base_mva,
                external_id=ext,
            )
        )
    if not any(b.kind is BusKind.SLACK for b in buses):
        raise MissingSlackError(f"mpc.bus: column {BUS_TYPE + 1}: no slack (type 3) bus")

    branches: list[Branch] = []
    for r, row in enumerate(br_rows, start=1):
        status = row[BR_STATUS] if len(row) > BR_STATUS else 1.0
        if status == 0:
            continue
        f_ext, t_ext = int(row[F_BUS]), int(row[T_BUS])
        for col, ext in ((F_BUS, f_ext), (T_BUS, t_ext)):
            if ext not in index:
                raise MalformedTableError(f"mpc.branch: row {r}, column {col + 1}: unknown bus {ext}")
        z = complex(row[BR_R], row[BR_X])
        if z == 0:
            raise MalformedTableError(f"mpc.branch: row {r}, column {BR_X + 1}: zero impedance")
        ysh = 0.5j * row[BR_B]
        branches.append(
            Branch(
                from_bus=index[f_ext],
                to_bus=index[t_ext],
                series_admittance=1.0 / z,
                shunt_from=ysh,
                shunt_to=ysh,
                tap_ratio=row[TAP] if len(row) > TAP else 0.0,
                phase_shift=math.radians(row[SHIFT]) if len(row) > SHIFT else 0.0,
            )
        )
    try:
        return Network(tuple(buses), tuple(branches), base_mva=base_mva, name=name)
    except ValueError as exc:
        raise CaseParseError(str(exc)) from exc


def parse_case(path: str | Path) -> Network:
    """Read a MATPOWER ``.m`` case (path, or the name of a bundled case)."""
    p = resolve_case(path)
    return parse_case_text(p.read_text(), name=p.stem)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def serialize_case(net: Network) -> str:
    """Write ``net`` back as a minimal MATPOWER case (bus and branch tables only)."""
    codes = {v: k for k, v in _BUS_TYPES.items()}
    out = io.StringIO()
    out.write(f"function mpc = {net.name}\n")
    out.write("mpc.version = '2';\n")
    out.write(f"mpc.baseMVA = {_fmt(net.base_mva)};\n")
    out.write("mpc.bus = [\n")
    for b in net.buses:
        cells = [b.label, codes[b.kind], 0, 0, b.shunt_g * net.base_mva, b.shunt_b * net.base_mva,
                 1, 1, 0, 0, 1, 1.1, 0.9]
        out.write("\t" + "\t".join(_fmt(c) for c in cells) + ";\n")
    out.write("];\n")
    out.write("mpc.branch = [\n")
    labels = net.external_ids()
    for br in net.branches:
        if br.shunt_from != br.shunt_to or br.shunt_from.real != 0:
            raise ValueError("only symmetric, purely capacitive line charging can be serialized")
        z = 1.0 / complex(br.series_admittance)
        cells = [labels[br.from_bus - 1], labels[br.to_bus - 1], z.real, z.imag,
                 2.0 * br.shunt_from.imag, 0, 0, 0, br.tap_ratio, math.degrees(br.phase_shift),
                 1, -360, 360]
        out.write("\t" + "\t".join(_fmt(c) for c in cells) + ";\n")
    out.write("];\n")
    return out.getvalue()


# --------------------------------------------------------------------------
# experiment configuration

_KIND_NAMES = {k.value: k for k in MeasurementKind}


@dataclass(frozen=True)
class FppSettings:
    max_iter: int = 100
    obj_tol: float = 1e-5
    eps: float = 1e-6
    subproblem_tol: float = 1e-8


@dataclass(frozen=True)
class GnSettings:
    max_iter: int = 50
    step_tol: float = 1e-8
    cond_limit: float = 1e5


@dataclass(frozen=True)
class ExperimentConfig:
    case_path: tuple[str, ...] = ("case14",)
    seed: int = 0
    trials: int = 100
    theta_max: tuple[float, ...] = (0.1 * math.pi,)
    vmag_range: tuple[float, float] = (0.9, 1.1)
    measurement_selector: str | tuple[tuple[str, Any], ...] = "classical-pf"
    noise_sigmas: Mapping[str, float] = field(default_factory=dict)
    penalty: str = "l2"
    type_counts: tuple[int, ...] = (3, 4, 5, 6, 7)
    solvers: tuple[str, ...] = ("fpp", "gn")
    workers: int = 1
    fpp: FppSettings = field(default_factory=FppSettings)
    gn: GnSettings = field(default_factory=GnSettings)

    @property
    def case(self) -> str:
        return self.case_path[0]

    @property
    def theta(self) -> float:
        return self.theta_max[0]

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        d["case_path"] = list(self.case_path)
        d["theta_max"] = list(self.theta_max)
        d["vmag_range"] = list(self.vmag_range)
        sel = self.measurement_selector
        d["measurement_selector"] = sel if isinstance(sel, str) else [[k, _loc_json(l)] for k, l in sel]
        d["noise_sigmas"] = dict(self.noise_sigmas)
        d["type_counts"] = list(self.type_counts)
        d["solvers"] = list(self.solvers)
        return d


def _loc_json(loc):
    return list(loc) if isinstance(loc, tuple) else loc


_SIGMA_KEYS = set(_KIND_NAMES) | {"power", "voltage", "all"}
_SELECTOR = re.compile(r"^type-prefix:(\d+)$")


def _as_list(value, pointer: str) -> list:
    if isinstance(value, list):
        if not value:
            raise ConfigError(pointer, "must not be empty")
        return value
    return [value]


def _number(value, pointer: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(pointer, f"expected a number, got {value!r}")
    return float(value)


def _integer(value, pointer: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(pointer, f"expected an integer, got {value!r}")
    return value


def _check_keys(obj: Mapping, allowed: Iterable[str], pointer: str) -> None:
    if not isinstance(obj, Mapping):
        raise ConfigError(pointer, "expected an object")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{pointer}/{key}", "unknown key")


def _settings(cls, obj, pointer):
    if obj is None:
        return cls()
    names = [f for f in cls.__dataclass_fields__]
    _check_keys(obj, names, pointer)
    kwargs = {}
    for k, v in obj.items():
        default = getattr(cls(), k)
        kwargs[k] = _integer(v, f"{pointer}/{k}") if isinstance(default, int) else _number(v, f"{pointer}/{k}")
        if kwargs[k] <= 0:
            raise ConfigError(f"{pointer}/{k}", "must be positive")
    return cls(**kwargs)


def config_from_dict(doc: Mapping[str, Any]) -> ExperimentConfig:
    fields = ExperimentConfig.__dataclass_fields__
    _check_keys(doc, fields, "")
    kw: dict[str, Any] = {}
    if "case_path" in doc:
        cases = _as_list(doc["case_path"], "/case_path")
        for i, c in enumerate(cases):
            if not isinstance(c, str):
                raise ConfigError(f"/case_path/{i}", "expected a string")
        kw["case_path"] = tuple(cases)
    if "seed" in doc:
        seed = _integer(doc["seed"], "/seed")
        if not 0 <= seed < 2**64:
            raise ConfigError("/seed", "must be an unsigned 64-bit integer")
        kw["seed"] = seed
    if "trials" in doc:
        kw["trials"] = _integer(doc["trials"], "/trials")
        if kw["trials"] < 1:
            raise ConfigError("/trials", "must be >= 1")
    if "theta_max" in doc:
        thetas = _as_list(doc["theta_max"], "/theta_max")
        vals = []
        for i, t in enumerate(thetas):
            t = _number(t, f"/theta_max/{i}" if isinstance(doc["theta_max"], list) else "/theta_max")
            if not 0 <= t <= math.pi:
                raise ConfigError("/theta_max", "must lie in [0, pi]")
            vals.append(t)
        kw["theta_max"] = tuple(vals)
    if "vmag_range" in doc:
        vr = doc["vmag_range"]
        if not isinstance(vr, list) or len(vr) != 2:
            raise ConfigError("/vmag_range", "expected [lo, hi]")
        lo, hi = _number(vr[0], "/vmag_range/0"), _number(vr[1], "/vmag_range/1")
        if lo > hi or lo < 0:
            raise ConfigError("/vmag_range", "need 0 <= lo <= hi")
        kw["vmag_range"] = (lo, hi)
    if "measurement_selector" in doc:
        kw["measurement_selector"] = _selector(doc["measurement_selector"])
    if "noise_sigmas" in doc:
        ns = doc["noise_sigmas"]
        _check_keys(ns, _SIGMA_KEYS, "/noise_sigmas")
        sig = {}
        for k, v in ns.items():
            sig[k] = _number(v, f"/noise_sigmas/{k}")
            if sig[k] < 0:
                raise ConfigError(f"/noise_sigmas/{k}", "must be >= 0")
        kw["noise_sigmas"] = sig
    if "penalty" in doc:
        if doc["penalty"] not in ("l2", "l1"):
            raise ConfigError("/penalty", "expected 'l2' or 'l1'")
        kw["penalty"] = doc["penalty"]
    if "type_counts" in doc:
        counts = _as_list(doc["type_counts"], "/type_counts")
        for i, k in enumerate(counts):
            if not 1 <= _integer(k, f"/type_counts/{i}") <= 7:
                raise ConfigError(f"/type_counts/{i}", "must lie in 1..7")
        kw["type_counts"] = tuple(counts)
    if "solvers" in doc:
        solvers = _as_list(doc["solvers"], "/solvers")
        for i, s in enumerate(solvers):
            if s not in ("fpp", "gn"):
                raise ConfigError(f"/solvers/{i}", "expected 'fpp' or 'gn'")
        kw["solvers"] = tuple(solvers)
    if "workers" in doc:
        kw["workers"] = _integer(doc["workers"], "/workers")
        if kw["workers"] < 1:
            raise ConfigError("/workers", "must be >= 1")
    kw["fpp"] = _settings(FppSettings, doc.get("fpp"), "/fpp")
    kw["gn"] = _settings(GnSettings, doc.get("gn"), "/gn")
    return ExperimentConfig(**kw)


def _selector(sel) -> str | tuple:
    if isinstance(sel, str):
        if sel == "classical-pf":
            return sel
        m = _SELECTOR.match(sel)
        if m is None:
            raise ConfigError("/measurement_selector", f"unrecognized selector {sel!r}")
        if not 1 <= int(m.group(1)) <= 7:
            raise ConfigError("/measurement_selector", "type-prefix count must lie in 1..7")
        return sel
    if not isinstance(sel, list):
        raise ConfigError("/measurement_selector", "expected a string or a list")
    if not sel:
        raise ConfigError("/measurement_selector", "measurement list must not be empty")
    items = []
    for i, item in enumerate(sel):
        p = f"/measurement_selector/{i}"
        if not isinstance(item, list) or len(item) != 2:
            raise ConfigError(p, "expected [kind, location]")
        kind, loc = item
        if kind not in _KIND_NAMES:
            raise ConfigError(f"{p}/0", f"unknown measurement kind {kind!r}")
        if _KIND_NAMES[kind].is_flow:
            if not (isinstance(loc, list) and len(loc) == 2 and all(isinstance(b, int) for b in loc)):
                raise ConfigError(f"{p}/1", "flow location must be [from, to]")
            loc = (loc[0], loc[1])
        elif not isinstance(loc, int) or isinstance(loc, bool):
            raise ConfigError(f"{p}/1", "bus location must be an integer")
        items.append((kind, loc))
    return tuple(items)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from exc
    return config_from_dict(doc)


def save_config(path: str | Path, config: ExperimentConfig) -> None:
    Path(path).write_text(json.dumps(config.to_json(), indent=2) + "\n")


# --------------------------------------------------------------------------
# result CSVs

CSV_HEADERS = {
    "success": ("case", "theta", "solver", "trials", "successes", "rate"),
    "mse": ("case", "types_used", "solver", "mse", "crlb_trace", "diverged"),
    "perbus": ("case", "bus", "solver", "mag_err", "ang_err"),
}


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return _fmt(x)
    return str(x)


def write_results_csv(path: str | Path, rows: Sequence[Mapping[str, Any]], kind: str | None = None) -> None:
    """Write result rows under the fixed header for ``kind`` (inferred from the filename)."""
    path = Path(path)
    kind = kind or path.stem
    if kind not in CSV_HEADERS:
        raise ValueError(f"unknown results kind {kind!r}")
    header = CSV_HEADERS[kind]
    for i, row in enumerate(rows):
        if set(row) != set(header):
            raise ValueError(f"row {i} keys {sorted(row)} do not match header {header}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(row[h]) for h in header])
    try:
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


_INT_COLUMNS = {"trials", "successes", "types_used", "bus", "diverged"}
_STR_COLUMNS = {"case", "solver"}


def read_results_csv(path: str | Path) -> list[dict[str, Any]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row: dict[str, Any] = {}
            for k, v in raw.items():
                if k in _STR_COLUMNS:
                    row[k] = v
                elif k in _INT_COLUMNS:
                    row[k] = int(v)
                else:
                    row[k] = float(v)
            rows.append(row)
    return rows
