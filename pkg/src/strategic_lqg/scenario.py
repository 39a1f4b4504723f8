"""Scenario JSON parsing and validation."""
import json
from dataclasses import dataclass

from .lqg import AgentParams, MarketModel, ModelError, validate_model
from .sim import Strategy
from .static import StaticQuadraticBid

_TOP = {"horizon", "agents", "h_function", "seed", "episodes", "strategies", "static_bids", "x0"}
_AGENT = {"a", "b", "q", "r", "sigma", "zeta"}
_STRATEGY = {"kind", "stage", "delta", "gamma"}
_STATIC = {"curvature", "linear"}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    model: MarketModel
    h_function: str = "zero"
    seed: int = 0
    episodes: int = 1
    strategies: tuple = ()
    static_bids: tuple | None = None
    x0: tuple | None = None


def _check_keys(obj, allowed, where, required=()):
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where}: expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ScenarioError(f"{where}: unknown field(s) {', '.join(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ScenarioError(f"{where}: missing field(s) {', '.join(missing)}")


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{where}: expected a number")
    return float(v)


def _int(v, where, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(f"{where}: expected an integer")
    if lo is not None and v < lo:
        raise ScenarioError(f"{where}: must be >= {lo}")
    return v


def parse_scenario(data):
    """Build a :class:`ScenarioConfig` from decoded JSON, rejecting unknown fields."""
    _check_keys(data, _TOP, "scenario", required=("horizon", "agents"))
    horizon = _int(data["horizon"], "horizon", 1)
    agents = []
    if not isinstance(data["agents"], list) or not data["agents"]:
        raise ScenarioError("agents: expected a non-empty list")
    for i, ag in enumerate(data["agents"]):
        _check_keys(ag, _AGENT, f"agents[{i}]", required=("a", "b", "q", "r"))
        agents.append(AgentParams(**{k: _number(v, f"agents[{i}].{k}") for k, v in ag.items()}))
    model = MarketModel(agents, horizon)
    try:
        validate_model(model)
    except ModelError as exc:
        raise ScenarioError(str(exc)) from None

    h = data.get("h_function", "zero")
    if h not in ("zero", "pivot"):
        raise ScenarioError("h_function: expected 'zero' or 'pivot'")
    seed = _int(data.get("seed", 0), "seed", 0)
    if seed >= 2**64:
        raise ScenarioError("seed: must fit in 64 bits")
    episodes = _int(data.get("episodes", 1), "episodes", 1)

    strategies = [Strategy.truthful()] * len(agents)
    if "strategies" in data:
        raw = data["strategies"]
        if not isinstance(raw, list) or len(raw) != len(agents):
            raise ScenarioError("strategies: need one entry per agent")
        strategies = [_strategy(s, i, horizon) for i, s in enumerate(raw)]

    static_bids = None
    if "static_bids" in data:
        raw = data["static_bids"]
        if not isinstance(raw, list) or not raw:
            raise ScenarioError("static_bids: expected a non-empty list")
        static_bids = []
        for i, b in enumerate(raw):
            _check_keys(b, _STATIC, f"static_bids[{i}]", required=("curvature",))
            try:
                static_bids.append(StaticQuadraticBid(**{k: _number(v, f"static_bids[{i}].{k}") for k, v in b.items()}))
            except ModelError as exc:
                raise ScenarioError(f"static_bids[{i}]: {exc}") from None
        static_bids = tuple(static_bids)

    x0 = None
    if "x0" in data:
        raw = data["x0"]
        if not isinstance(raw, list) or len(raw) != len(agents):
            raise ScenarioError("x0: need one initial state per agent")
        x0 = tuple(_number(v, f"x0[{i}]") for i, v in enumerate(raw))

    return ScenarioConfig(model, h, seed, episodes, tuple(strategies), static_bids, x0)


def _strategy(raw, i, horizon):
    where = f"strategies[{i}]"
    _check_keys(raw, _STRATEGY, where, required=("kind",))
    kind = raw["kind"]
    if kind == "truthful":
        return Strategy.truthful()
    if kind not in ("additive", "scaling"):
        raise ScenarioError(f"{where}: kind must be truthful, additive or scaling")
    stage = _int(raw.get("stage", 0), f"{where}.stage", 0)
    if stage >= horizon:
        raise ScenarioError(f"{where}.stage: must be < horizon")
    if kind == "additive":
        return Strategy.additive(_number(raw.get("delta", 0.0), f"{where}.delta"), stage)
    return Strategy.scaling(_number(raw.get("gamma", 1.0), f"{where}.gamma"), stage)


def load_scenario(path):
    """Read and validate a scenario file; JSON errors carry line and column."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_scenario(data)
