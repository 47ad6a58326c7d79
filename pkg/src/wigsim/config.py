"""JSON experiment descriptions: parsing, validation, serialization and compilation.

Example document::

    {
      "modes": 1,
      "states": [{"kind": "spats", "params": {"nbar": 1.0, "efficiency": 0.4}}],
      "gates": [{"kind": "phase_shifter", "params": {"theta": 0.628}, "targets": [0]}],
      "measurement": "heterodyne",
      "epsilon": 0.1, "gamma": 0.25, "samples": 1000, "seed": 0,
      "discretization": {"mode": "practical", "delta": 0.05, "side": 16.0}
    }

``measurement`` is ``"heterodyne"``, ``{"preset": "heterodyne"}`` or a list of
per-mode 2x2 covariance matrices.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from . import phase_space as ps
from . import states as st
from .discretization import DiscretizationParams, select_parameters
from .errors import ConfigError, WigsimError
from .measurement import GaussianMeasurementSpec
from .sampler import RunConfig

DEFAULTS = {"epsilon": 0.1, "gamma": 0.25, "samples": 1000, "seed": 0}
TOP_KEYS = {"modes", "states", "gates", "measurement", "epsilon", "gamma", "samples", "seed", "discretization",
            "description"}
STATE_PARAMS = {
    "vacuum": (set(), {}),
    "coherent": ({"q", "p"}, {}),
    "thermal": ({"nbar"}, {}),
    "squeezed": ({"r"}, {"phi": 0.0}),
    "gaussian": ({"mean", "cov"}, {}),
    "spats": ({"nbar", "efficiency"}, {}),
}
GATE_PARAMS = {
    "phase_shifter": ({"theta"}, 1),
    "beam_splitter": ({"theta"}, 2),
    "squeezer": ({"r"}, 1),
    "displacement": ({"dq", "dp"}, 1),
}
DISC_KEYS = {"mode", "delta", "area", "side", "beta", "lambda"}


@dataclass(frozen=True, eq=True)
class StateEntry:
    kind: str
    params: dict = field(default_factory=dict)

    def spec(self):
        p = self.params
        if self.kind == "vacuum":
            return st.vacuum()
        if self.kind == "coherent":
            return st.coherent(p["q"], p["p"])
        if self.kind == "thermal":
            return st.thermal(p["nbar"])
        if self.kind == "squeezed":
            return st.squeezed(p["r"], p.get("phi", 0.0))
        if self.kind == "gaussian":
            return st.GaussianStateSpec(p["mean"], p["cov"])
        return st.SpatsSpec(p["nbar"], p["efficiency"])


@dataclass(frozen=True, eq=True)
class GateEntry:
    kind: str
    params: dict
    targets: tuple

    def to_map(self, n: int) -> ps.AffineSymplecticMap:
        p, t = self.params, self.targets
        if self.kind == "phase_shifter":
            return ps.phase_shifter(p["theta"], t[0], n)
        if self.kind == "beam_splitter":
            return ps.beam_splitter(p["theta"], t[0], t[1], n)
        if self.kind == "squeezer":
            return ps.squeezer(p["r"], t[0], n)
        return ps.displacement(p["dq"], p["dp"], t[0], n)


@dataclass(frozen=True, eq=True)
class ExperimentConfig:
    modes: int
    states: tuple
    gates: tuple
    measurement: GaussianMeasurementSpec
    epsilon: float = DEFAULTS["epsilon"]
    gamma: float = DEFAULTS["gamma"]
    samples: int = DEFAULTS["samples"]
    seed: int = DEFAULTS["seed"]
    discretization: dict = field(default_factory=lambda: {"mode": "certified"})
    measurement_preset: str | None = None
    description: str | None = None


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _number(x, path):
    if not _is_number(x):
        raise ConfigError(f"expected a finite number, got {x!r}", path=path)
    return float(x)


def _integer(x, path, lo=None):
    if not isinstance(x, int) or isinstance(x, bool):
        raise ConfigError(f"expected an integer, got {x!r}", path=path)
    if lo is not None and x < lo:
        raise ConfigError(f"must be >= {lo}, got {x}", path=path)
    return x


def _matrix(x, path):
    try:
        arr = np.array(x, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("expected a 2x2 numeric matrix", path=path) from None
    if arr.shape != (2, 2) or not np.all(np.isfinite(arr)):
        raise ConfigError("expected a finite 2x2 matrix", path=path)
    return arr.tolist()


def _check_keys(obj, allowed, path, required=()):
    if not isinstance(obj, dict):
        raise ConfigError("expected an object", path=path)
    extra = set(obj) - set(allowed)
    if extra:
        raise ConfigError(f"unknown field(s) {sorted(extra)}", path=path)
    missing = [k for k in required if k not in obj]
    if missing:
        raise ConfigError(f"missing field(s) {missing}", path=path)


def _parse_state(doc, i):
    path = f"states[{i}]"
    _check_keys(doc, {"kind", "params"}, path, ("kind",))
    kind = doc["kind"]
    if kind not in STATE_PARAMS:
        raise ConfigError(f"unknown state kind {kind!r}; expected one of {sorted(STATE_PARAMS)}", path=f"{path}.kind")
    required, optional = STATE_PARAMS[kind]
    raw = doc.get("params", {})
    _check_keys(raw, required | set(optional), f"{path}.params", sorted(required))
    params = {}
    for key, value in raw.items():
        kp = f"{path}.params.{key}"
        if key == "mean":
            if not (isinstance(value, list) and len(value) == 2):
                raise ConfigError("expected two numbers", path=kp)
            params[key] = [_number(value[j], f"{kp}[{j}]") for j in (0, 1)]
        elif key == "cov":
            params[key] = _matrix(value, kp)
        else:
            params[key] = _number(value, kp)
    if kind == "spats" and params["efficiency"] > 0.5:
        raise ConfigError(
            f"efficiency {params['efficiency']} > 0.5 gives a negative Wigner function; "
            "phase-space sampling requires efficiency <= 0.5 (eta <= 0.5)",
            path=f"{path}.params.efficiency",
        )
    entry = StateEntry(kind, params)
    try:
        entry.spec()
    except WigsimError as exc:
        raise ConfigError(str(exc), path=f"{path}.params") from None
    return entry


def _parse_gate(doc, i, n):
    path = f"gates[{i}]"
    _check_keys(doc, {"kind", "params", "targets"}, path, ("kind", "targets"))
    kind = doc["kind"]
    if kind not in GATE_PARAMS:
        raise ConfigError(f"unknown gate kind {kind!r}; expected one of {sorted(GATE_PARAMS)}", path=f"{path}.kind")
    required, arity = GATE_PARAMS[kind]
    raw = doc.get("params", {})
    _check_keys(raw, required, f"{path}.params", sorted(required))
    params = {k: _number(v, f"{path}.params.{k}") for k, v in raw.items()}
    targets = doc["targets"]
    if isinstance(targets, int) and not isinstance(targets, bool):
        targets = [targets]
    if not isinstance(targets, list) or len(targets) != arity:
        raise ConfigError(f"{kind} needs {arity} target mode(s)", path=f"{path}.targets")
    for j, t in enumerate(targets):
        _integer(t, f"{path}.targets[{j}]")
        if not 0 <= t < n:
            raise ConfigError(f"mode index {t} out of range for {n} modes", path=f"{path}.targets[{j}]")
    if arity == 2 and targets[0] == targets[1]:
        raise ConfigError("beam splitter needs two distinct modes", path=f"{path}.targets")
    return GateEntry(kind, params, tuple(targets))


def _parse_measurement(doc, n):
    if doc == "heterodyne" or (isinstance(doc, dict) and doc.get("preset") == "heterodyne"):
        if isinstance(doc, dict):
            _check_keys(doc, {"preset"}, "measurement")
        return GaussianMeasurementSpec.heterodyne(n), "heterodyne"
    if isinstance(doc, dict):
        raise ConfigError(f"unknown measurement preset {doc.get('preset')!r}", path="measurement.preset")
    if isinstance(doc, str):
        raise ConfigError(f"unknown measurement preset {doc!r}", path="measurement")
    if not isinstance(doc, list) or len(doc) != n:
        raise ConfigError(f"expected 'heterodyne' or a list of {n} covariance matrices", path="measurement")
    covs = [_matrix(V, f"measurement[{j}]") for j, V in enumerate(doc)]
    return GaussianMeasurementSpec(tuple(np.array(V) for V in covs)), None


def _parse_discretization(doc):
    if doc is None:
        return {"mode": "certified"}
    _check_keys(doc, DISC_KEYS, "discretization")
    out = {"mode": doc.get("mode", "certified")}
    if out["mode"] not in ("certified", "practical"):
        raise ConfigError(f"unknown mode {out['mode']!r}", path="discretization.mode")
    for key in ("delta", "area", "side", "beta", "lambda"):
        if key in doc:
            value = _number(doc[key], f"discretization.{key}")
            if value <= 0:
                raise ConfigError("must be positive", path=f"discretization.{key}")
            out[key] = value
    if "area" in out and "side" in out:
        raise ConfigError("give either area or side, not both", path="discretization")
    if out["mode"] == "practical" and ("delta" not in out or not ({"area", "side"} & set(out))):
        raise ConfigError("practical mode needs delta and area (or side)", path="discretization")
    if ("beta" in out) != ("lambda" in out):
        raise ConfigError("beta and lambda must be given together", path="discretization")
    return out


def parse_config(document) -> ExperimentConfig:
    """Validate a JSON document (text or already-decoded object)."""
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
    else:
        doc = document
    _check_keys(doc, TOP_KEYS, "config", ("modes", "states", "measurement"))
    n = _integer(doc["modes"], "modes", lo=1)
    states = doc["states"]
    if not isinstance(states, list) or len(states) != n:
        raise ConfigError(f"expected exactly {n} state entries", path="states")
    state_entries = tuple(_parse_state(s, i) for i, s in enumerate(states))
    gates = doc.get("gates", [])
    if not isinstance(gates, list):
        raise ConfigError("expected a list", path="gates")
    gate_entries = tuple(_parse_gate(g, i, n) for i, g in enumerate(gates))
    measurement, preset = _parse_measurement(doc["measurement"], n)
    epsilon = _number(doc.get("epsilon", DEFAULTS["epsilon"]), "epsilon")
    if not 0 < epsilon < 1:
        raise ConfigError("epsilon must be in (0,1)", path="epsilon")
    gamma = _number(doc.get("gamma", DEFAULTS["gamma"]), "gamma")
    if gamma <= 0:
        raise ConfigError("must be positive", path="gamma")
    samples = _integer(doc.get("samples", DEFAULTS["samples"]), "samples", lo=1)
    seed = _integer(doc.get("seed", DEFAULTS["seed"]), "seed", lo=0)
    if seed >= 1 << 64:
        raise ConfigError("must be below 2^64", path="seed")
    description = doc.get("description")
    if description is not None and not isinstance(description, str):
        raise ConfigError("expected a string", path="description")
    return ExperimentConfig(
        modes=n, states=state_entries, gates=gate_entries, measurement=measurement, epsilon=epsilon,
        gamma=gamma, samples=samples, seed=seed, discretization=_parse_discretization(doc.get("discretization")),
        measurement_preset=preset, description=description,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    doc = {"modes": cfg.modes}
    if cfg.description is not None:
        doc["description"] = cfg.description
    doc["states"] = [{"kind": s.kind, "params": dict(s.params)} if s.params else {"kind": s.kind} for s in cfg.states]
    doc["gates"] = [{"kind": g.kind, "params": dict(g.params), "targets": list(g.targets)} for g in cfg.gates]
    if cfg.measurement_preset:
        doc["measurement"] = cfg.measurement_preset
    else:
        doc["measurement"] = [V.tolist() for V in cfg.measurement.covs]
    doc.update(epsilon=cfg.epsilon, gamma=cfg.gamma, samples=cfg.samples, seed=cfg.seed,
               discretization=dict(cfg.discretization))
    return doc


def serialize_config(cfg: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2)


def compile_circuit(cfg: ExperimentConfig) -> ps.AffineSymplecticMap:
    """Compose the gates in listed order (the first gate acts first)."""
    maps = [g.to_map(cfg.modes) for g in cfg.gates]
    return reduce(lambda acc, m: ps.compose(m, acc), maps, ps.identity(cfg.modes))


def build_states(cfg: ExperimentConfig):
    return tuple(st.make_evaluator(s.spec()) for s in cfg.states)


def build_parameters(cfg: ExperimentConfig, states=None, circuit=None) -> DiscretizationParams:
    states = states if states is not None else build_states(cfg)
    circuit = circuit if circuit is not None else compile_circuit(cfg)
    d = cfg.discretization
    return select_parameters(
        cfg.epsilon, cfg.gamma, states, cfg.measurement, circuit, d.get("mode", "certified"),
        delta=d.get("delta"), area=d.get("area"), side=d.get("side"), beta=d.get("beta"), lam=d.get("lambda"),
    )


def build_run_config(cfg: ExperimentConfig, seed: int | None = None) -> RunConfig:
    states = build_states(cfg)
    circuit = compile_circuit(cfg)
    params = build_parameters(cfg, states, circuit)
    return RunConfig(states, circuit, cfg.measurement, params, cfg.samples, cfg.seed if seed is None else seed)
