"""Run configuration: parsing, canonical form and file discovery.

A run configuration is a single JSON-compatible document with the blocks
``model``, ``timing``, ``analysis`` and ``simulation``. Unknown keys are
rejected and every failure names the offending field path.
"""

import hashlib
import json
import os
import platform
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np
import yaml

from trade_tails.errors import ConfigError, ModelError, TimingError
from trade_tails.process import (
    DegenerateJump,
    GaussianJump,
    JumpLaw,
    ModulatedModel,
    RegimeExponent,
    TransitionJump,
    TwoPointJump,
)
from trade_tails.spectral import DEFAULT_ALPHA_MAX
from trade_tails.tail_analysis import SIDES, UPPER
from trade_tails.tailstat import Tolerances
from trade_tails.timing import IIM, ITM, TimingModel

ENV_VAR = "TRADE_TAILS_CONFIG"
CONFIG_NAME = "config.json"
MAX_COUNT = 10**9
MAX_STREAMS = 4096


def _get_config_dir() -> Path:
    """Per-user configuration directory for trade_tails."""
    if platform.system() == "Windows":
        return Path(os.environ.get("APPDATA", Path.home())) / "trade_tails"
    return Path.home() / ".config" / "trade_tails"


def default_config_path() -> Optional[Path]:
    """Locate a config file when none is given explicitly.

    Checks in order:
    1. Environment variable TRADE_TAILS_CONFIG
    2. config.json in the per-user config directory

    Returns:
        Path of the first existing candidate, or None.
    """
    env_path = os.environ.get(ENV_VAR)
    if env_path and os.path.exists(env_path):
        return Path(env_path).absolute()
    candidate = _get_config_dir() / CONFIG_NAME
    if candidate.exists():
        return candidate.absolute()
    return None


@dataclass(frozen=True)
class AnalysisSettings:
    alpha_max: float = DEFAULT_ALPHA_MAX
    tail: str = UPPER
    tolerances: Tolerances = field(default_factory=Tolerances)


@dataclass(frozen=True)
class SimulationSettings:
    count: int = 100_000
    seed: int = 0
    streams: int = 1
    grid_spacing: float = 1.0


@dataclass(frozen=True, eq=False)
class RunConfig:
    model: ModulatedModel
    timing: TimingModel
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RunConfig):
            return NotImplemented
        return config_to_dict(self) == config_to_dict(other)

    def __hash__(self) -> int:
        return hash(config_hash(self))


# Field readers


def _mapping(
    value: Any, path: str, allowed: set, required: frozenset = frozenset()
) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise ConfigError(path, f"expected an object, got {type(value).__name__}")
    for key in value:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else str(key), "unknown key")
    for key in sorted(required):
        if key not in value:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
    return value


def _number(
    value: Any,
    path: str,
    minimum: Optional[float] = None,
    maximum: Optional[float] = None,
    strict_minimum: bool = False,
    strict_maximum: bool = False,
) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    number = float(value)
    if not np.isfinite(number):
        raise ConfigError(path, f"expected a finite number, got {value!r}")
    if minimum is not None:
        if number < minimum or (strict_minimum and number == minimum):
            relation = ">" if strict_minimum else ">="
            raise ConfigError(path, f"must be {relation} {minimum:g}, got {number:g}")
    if maximum is not None:
        if number > maximum or (strict_maximum and number == maximum):
            relation = "<" if strict_maximum else "<="
            raise ConfigError(path, f"must be {relation} {maximum:g}, got {number:g}")
    return number


def _integer(
    value: Any, path: str, minimum: Optional[int] = None, maximum: Optional[int] = None
) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ConfigError(path, f"must be <= {maximum}, got {value}")
    return int(value)


def _sequence(value: Any, path: str, allow_empty: bool = False) -> List[Any]:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(path, f"expected a list, got {type(value).__name__}")
    if not value and not allow_empty:
        raise ConfigError(path, "must not be empty")
    return list(value)


# Blocks


def _parse_jump(data: Any, path: str) -> JumpLaw:
    if data is None:
        return DegenerateJump()
    if not isinstance(data, Mapping) or "kind" not in data:
        raise ConfigError(f"{path}.kind", "jump law needs a kind")
    kind = data["kind"]
    if kind == "degenerate":
        data = _mapping(data, path, {"kind", "size"})
        return DegenerateJump(_number(data.get("size", 0.0), f"{path}.size"))
    if kind == "gaussian":
        data = _mapping(data, path, {"kind", "mean", "variance"})
        return GaussianJump(
            _number(data.get("mean", 0.0), f"{path}.mean"),
            _number(data.get("variance", 0.0), f"{path}.variance", minimum=0.0),
        )
    if kind == "two_point":
        data = _mapping(
            data,
            path,
            {"kind", "first", "second", "probability"},
            frozenset({"first", "second"}),
        )
        return TwoPointJump(
            _number(data["first"], f"{path}.first"),
            _number(data["second"], f"{path}.second"),
            _number(data.get("probability", 0.5), f"{path}.probability", 0.0, 1.0),
        )
    raise ConfigError(
        f"{path}.kind", f"must be one of degenerate, gaussian, two_point, got {kind!r}"
    )


def _parse_regime(data: Any, path: str) -> RegimeExponent:
    data = _mapping(data, path, {"drift", "variance", "jump_intensity", "jump"})
    return RegimeExponent(
        drift=_number(data.get("drift", 0.0), f"{path}.drift"),
        variance=_number(data.get("variance", 0.0), f"{path}.variance", minimum=0.0),
        jump_intensity=_number(
            data.get("jump_intensity", 0.0), f"{path}.jump_intensity", minimum=0.0
        ),
        jump=_parse_jump(data.get("jump"), f"{path}.jump"),
    )


def _parse_matrix(data: Any, path: str, size: int) -> List[List[Any]]:
    rows = _sequence(data, path)
    if len(rows) != size:
        raise ConfigError(path, f"expected {size} rows, got {len(rows)}")
    matrix = []
    for i, row in enumerate(rows):
        row = _sequence(row, f"{path}[{i}]")
        if len(row) != size:
            raise ConfigError(f"{path}[{i}]", f"expected {size} entries, got {len(row)}")
        matrix.append(row)
    return matrix


def _parse_model(data: Any) -> ModulatedModel:
    data = _mapping(
        data,
        "model",
        {"regimes", "generator", "transition_jumps", "initial"},
        frozenset({"regimes", "generator"}),
    )
    regimes = [
        _parse_regime(item, f"model.regimes[{i}]")
        for i, item in enumerate(_sequence(data["regimes"], "model.regimes"))
    ]
    n = len(regimes)
    generator = [
        [_number(v, f"model.generator[{i}][{j}]") for j, v in enumerate(row)]
        for i, row in enumerate(_parse_matrix(data["generator"], "model.generator", n))
    ]
    transition_jumps = None
    if data.get("transition_jumps") is not None:
        table = _parse_matrix(data["transition_jumps"], "model.transition_jumps", n)
        transition_jumps = []
        for i, row in enumerate(table):
            parsed_row = []
            for j, entry in enumerate(row):
                entry_path = f"model.transition_jumps[{i}][{j}]"
                if entry is None:
                    parsed_row.append(TransitionJump())
                    continue
                entry = _mapping(entry, entry_path, {"probability", "jump"})
                parsed_row.append(
                    TransitionJump(
                        _number(
                            entry.get("probability", 0.0),
                            f"{entry_path}.probability",
                            0.0,
                            1.0,
                        ),
                        _parse_jump(entry.get("jump"), f"{entry_path}.jump"),
                    )
                )
            transition_jumps.append(parsed_row)
    initial = None
    if data.get("initial") is not None:
        initial = [
            _number(v, f"model.initial[{i}]", minimum=0.0)
            for i, v in enumerate(_sequence(data["initial"], "model.initial"))
        ]
    try:
        return ModulatedModel(
            regimes=tuple(regimes),
            generator=np.array(generator),
            transition_jumps=transition_jumps,
            initial=initial,
        )
    except ModelError as exc:
        raise ConfigError("model", str(exc)) from exc


def _parse_weights(data: Any, count: int) -> Optional[List[float]]:
    if data is None:
        return None
    weights = _sequence(data, "timing.weights")
    if len(weights) != count:
        raise ConfigError("timing.weights", f"expected {count} weights, got {len(weights)}")
    return [
        _number(v, f"timing.weights[{i}]", minimum=0.0, strict_minimum=True)
        for i, v in enumerate(weights)
    ]


def _parse_timing(data: Any, grid_spacing: float) -> TimingModel:
    kind = _mapping(
        data,
        "timing",
        {"kind", "probabilities", "weights", "successes", "arrival_rates", "completion_rates"},
        frozenset({"kind"}),
    )["kind"]
    try:
        if kind == "iim":
            data = _mapping(
                data,
                "timing",
                {"kind", "probabilities", "weights", "successes"},
                frozenset({"probabilities"}),
            )
            probabilities = [
                _number(v, f"timing.probabilities[{i}]", 0.0, 1.0, True, True)
                for i, v in enumerate(_sequence(data["probabilities"], "timing.probabilities"))
            ]
            return IIM(
                probabilities=tuple(probabilities),
                weights=_parse_weights(data.get("weights"), len(probabilities)),
                successes=_integer(data.get("successes", 1), "timing.successes", minimum=1),
                grid_spacing=grid_spacing,
            )
        if kind == "itm":
            data = _mapping(
                data,
                "timing",
                {"kind", "arrival_rates", "weights", "completion_rates"},
                frozenset({"arrival_rates"}),
            )
            if grid_spacing != 1.0:
                raise ConfigError(
                    "simulation.grid_spacing", "ITM timing requires grid_spacing 1.0"
                )
            arrivals = [
                _number(v, f"timing.arrival_rates[{i}]", minimum=0.0, strict_minimum=True)
                for i, v in enumerate(_sequence(data["arrival_rates"], "timing.arrival_rates"))
            ]
            completions = [
                _number(v, f"timing.completion_rates[{i}]", minimum=0.0, strict_minimum=True)
                for i, v in enumerate(
                    _sequence(
                        data.get("completion_rates", []),
                        "timing.completion_rates",
                        allow_empty=True,
                    )
                )
            ]
            return ITM(
                arrival_rates=tuple(arrivals),
                weights=_parse_weights(data.get("weights"), len(arrivals)),
                completion_rates=tuple(completions),
            )
    except TimingError as exc:
        raise ConfigError("timing", str(exc)) from exc
    raise ConfigError("timing.kind", f"must be iim or itm, got {kind!r}")


def parse_tolerances(data: Any, base: Optional[Tolerances] = None, path: str = "analysis.tolerances") -> Tolerances:
    base = base or Tolerances()
    if data is None:
        return base
    data = _mapping(data, path, {"alpha", "scale", "log_order"})
    values = {
        key: _number(data[key], f"{path}.{key}", minimum=0.0, strict_minimum=True)
        for key in data
    }
    return replace(base, **values)


def _parse_analysis(data: Any) -> AnalysisSettings:
    if data is None:
        return AnalysisSettings()
    data = _mapping(data, "analysis", {"alpha_max", "tail", "tolerances"})
    tail = data.get("tail", UPPER)
    if tail not in SIDES:
        raise ConfigError("analysis.tail", f"must be upper or lower, got {tail!r}")
    return AnalysisSettings(
        alpha_max=_number(
            data.get("alpha_max", DEFAULT_ALPHA_MAX),
            "analysis.alpha_max",
            minimum=0.0,
            strict_minimum=True,
        ),
        tail=tail,
        tolerances=parse_tolerances(data.get("tolerances")),
    )


def _parse_simulation(data: Any) -> SimulationSettings:
    if data is None:
        return SimulationSettings()
    data = _mapping(data, "simulation", {"count", "seed", "streams", "grid_spacing"})
    return SimulationSettings(
        count=_integer(data.get("count", 100_000), "simulation.count", 1, MAX_COUNT),
        seed=_integer(data.get("seed", 0), "simulation.seed", minimum=0),
        streams=_integer(data.get("streams", 1), "simulation.streams", 1, MAX_STREAMS),
        grid_spacing=_number(
            data.get("grid_spacing", 1.0),
            "simulation.grid_spacing",
            minimum=0.0,
            strict_minimum=True,
        ),
    )


def parse_config(data: Any) -> RunConfig:
    """Build a RunConfig from a decoded document.

    Raises:
        ConfigError: With the dotted path of the first offending field.
    """
    data = _mapping(
        data,
        "",
        {"model", "timing", "analysis", "simulation"},
        frozenset({"model", "timing"}),
    )
    simulation = _parse_simulation(data.get("simulation"))
    return RunConfig(
        model=_parse_model(data["model"]),
        timing=_parse_timing(data["timing"], simulation.grid_spacing),
        analysis=_parse_analysis(data.get("analysis")),
        simulation=simulation,
    )


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """Read and parse a config file (JSON or YAML).

    Args:
        path: Config file; if None, the default locations are searched.

    Raises:
        ConfigError: If no file is found or its content is invalid.
    """
    if path is None:
        path = default_config_path()
        if path is None:
            raise ConfigError("", f"no config given and none found via ${ENV_VAR}")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"cannot parse {path}: {exc}") from exc
    return parse_config(data)


# Canonical form


def _jump_to_dict(jump: JumpLaw) -> Dict[str, Any]:
    if isinstance(jump, DegenerateJump):
        return {"kind": jump.kind, "size": jump.size}
    if isinstance(jump, GaussianJump):
        return {"kind": jump.kind, "mean": jump.mean, "variance": jump.variance}
    return {
        "kind": jump.kind,
        "first": jump.first,
        "second": jump.second,
        "probability": jump.probability,
    }


def _timing_to_dict(timing: TimingModel) -> Dict[str, Any]:
    if isinstance(timing, IIM):
        return {
            "kind": timing.kind,
            "probabilities": list(timing.probabilities),
            "weights": timing.weights.tolist(),
            "successes": timing.successes,
        }
    return {
        "kind": timing.kind,
        "arrival_rates": list(timing.arrival_rates),
        "weights": timing.weights.tolist(),
        "completion_rates": list(timing.completion_rates),
    }


def config_to_dict(config: RunConfig) -> Dict[str, Any]:
    """Canonical document with every default materialized."""
    model = config.model
    transition_jumps = None
    if model.transition_jumps is not None:
        transition_jumps = [
            [
                None
                if tj.is_null
                else {"probability": tj.probability, "jump": _jump_to_dict(tj.jump)}
                for tj in row
            ]
            for row in model.transition_jumps
        ]
    tolerances = config.analysis.tolerances
    return {
        "model": {
            "regimes": [
                {
                    "drift": r.drift,
                    "variance": r.variance,
                    "jump_intensity": r.jump_intensity,
                    "jump": _jump_to_dict(r.jump),
                }
                for r in model.regimes
            ],
            "generator": model.generator.tolist(),
            "transition_jumps": transition_jumps,
            "initial": model.initial.tolist(),
        },
        "timing": _timing_to_dict(config.timing),
        "analysis": {
            "alpha_max": float(config.analysis.alpha_max),
            "tail": config.analysis.tail,
            "tolerances": {
                "alpha": float(tolerances.alpha),
                "scale": float(tolerances.scale),
                "log_order": float(tolerances.log_order),
            },
        },
        "simulation": {
            "count": config.simulation.count,
            "seed": config.simulation.seed,
            "streams": config.simulation.streams,
            "grid_spacing": float(config.simulation.grid_spacing),
        },
    }


def canonical_json(config: RunConfig) -> str:
    return json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON form."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def with_overrides(
    config: RunConfig,
    seed: Optional[int] = None,
    samples: Optional[int] = None,
    tolerance_json: Optional[str] = None,
) -> RunConfig:
    """Apply command-line overrides, validated like the file itself."""
    simulation = config.simulation
    if seed is not None:
        simulation = replace(simulation, seed=_integer(seed, "simulation.seed", minimum=0))
    if samples is not None:
        simulation = replace(
            simulation, count=_integer(samples, "simulation.count", 1, MAX_COUNT)
        )
    analysis = config.analysis
    if tolerance_json is not None:
        try:
            overrides = json.loads(tolerance_json)
        except json.JSONDecodeError as exc:
            raise ConfigError("analysis.tolerances", f"invalid JSON: {exc}") from exc
        analysis = replace(
            analysis, tolerances=parse_tolerances(overrides, analysis.tolerances)
        )
    return replace(config, analysis=analysis, simulation=simulation)
