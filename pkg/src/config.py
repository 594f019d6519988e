"""
Run configuration: environment defaults, numeric settings and the validated
RunConfig built from the command line.
"""
import os
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

from dotenv import load_dotenv

from tools.errors import InputError

load_dotenv()

COMMANDS = ("validate", "select", "check", "transform", "simulate", "identify", "montecarlo")
SELECTION_MODES = ("full", "min", "user")
CRITERIA = ("wls", "ml")


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{name} must be an integer, got {raw!r}", position=name)


def default_threads() -> int:
    return max(1, _env_int("NETIDENT_THREADS", min(8, os.cpu_count() or 1)))


def default_grid() -> int:
    return _env_int("NETIDENT_GRID", 256)


def default_seed() -> int:
    return _env_int("NETIDENT_SEED", 0)


def default_log_level() -> str:
    return os.getenv("NETIDENT_LOG_LEVEL", "WARNING").upper()


@dataclass(frozen=True)
class SimulationConfig:
    burn_in: int = 1000
    nperseg: int = 512
    overlap: float = 0.5
    window: str = "hann"
    informativity_fraction: float = 1.0
    informativity_tol: float = 1e-8


@dataclass(frozen=True)
class EstimatorConfig:
    starts: int = 8
    arx_order: int = 20
    fir_length: int = 30
    max_nfev: int = 400
    gradient_tol: float = 1e-8
    step_tol: float = 1e-10
    ml_max_iter: int = 20
    ml_tol: float = 1e-10
    barrier_margin: float = 1e-3
    threads: int = 1


@dataclass(frozen=True)
class MonteCarloConfig:
    replicas: int = 50
    N: int = 50000
    seed: int = 0
    criterion: str = "wls"
    threads: int = 1
    burn_in: int = 1000
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)

    def __post_init__(self):
        if self.replicas < 2:
            raise InputError("montecarlo needs at least 2 replicas", position="replicas")
        if self.N < 1:
            raise InputError("N must be at least 1", position="N")
        if self.criterion not in CRITERIA:
            raise InputError(f"unknown criterion '{self.criterion}'", position="criterion")


def _parse_labels(text: Optional[str], what: str) -> Optional[Tuple[int, ...]]:
    if text is None:
        return None
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise InputError(f"'{what}' must be a comma-separated list of integers, got {text!r}", position=what)


@dataclass
class RunConfig:
    """Everything one CLI invocation needs, validated on construction."""

    command: str
    network: str
    output: Optional[str] = None
    target: Optional[Tuple[int, int]] = None
    mode: str = "full"
    accessible: Optional[Tuple[int, ...]] = None
    selection: Optional[str] = None
    data: Optional[str] = None
    informativity: Optional[str] = None
    criterion: str = "wls"
    orders: Tuple[int, int, int, int] = (1, 1, 1, 1)
    N: int = 10000
    seed: int = field(default_factory=default_seed)
    replicas: int = 50
    starts: int = 8
    grid: int = field(default_factory=default_grid)
    tol: float = 1e-6
    threads: int = field(default_factory=default_threads)
    miso: Optional[Tuple[int, ...]] = None
    text: bool = False
    dump: bool = False
    csv: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command '{self.command}'", position="command")
        if self.mode not in SELECTION_MODES:
            raise InputError(f"unknown selection mode '{self.mode}'", position="--mode")
        if self.criterion not in CRITERIA:
            raise InputError(f"unknown criterion '{self.criterion}'", position="--criterion")
        if self.accessible is not None and self.mode != "user":
            raise InputError("--accessible is only valid with --mode user", position="--accessible")
        if self.mode == "user" and self.command == "select" and not self.accessible:
            raise InputError("--mode user needs --accessible", position="--accessible")
        if self.command == "select" and self.target is None:
            raise InputError("select needs --target j i", position="--target")
        if self.command in ("check", "transform") and self.selection is None and self.target is None:
            raise InputError(f"{self.command} needs --selection or --target", position="--selection")
        if self.command == "identify" and self.data is None:
            raise InputError("identify needs --data", position="--data")
        if self.command == "simulate" and self.output is None:
            raise InputError("simulate needs --output for the dataset file", position="--output")
        if self.miso is not None and (self.command not in ("identify", "montecarlo") or self.target is None):
            raise InputError("--miso needs --target and the identify or montecarlo command", position="--miso")
        if self.command == "montecarlo" and self.selection is None and self.target is None:
            raise InputError("montecarlo needs --selection or --target", position="--target")
        if self.command == "identify" and self.selection is None and self.target is None:
            raise InputError("identify needs --selection or --target", position="--target")
        if self.informativity == "data" and self.data is None:
            raise InputError("--informativity data needs --data", position="--informativity")
        if self.informativity not in (None, "model", "data"):
            raise InputError(f"unknown informativity mode '{self.informativity}'", position="--informativity")
        if self.tol <= 0:
            raise InputError("tolerances must be > 0", position="--tol")
        if self.N < 1:
            raise InputError("N must be at least 1", position="--N")
        if self.grid < 2:
            raise InputError("grid must have at least 2 points", position="--grid")
        if self.command == "montecarlo" and self.replicas < 2:
            raise InputError("montecarlo needs at least 2 replicas", position="--replicas")
        if self.starts < 1:
            raise InputError("starts must be at least 1", position="--starts")
        if len(self.orders) != 4 or any(o < 0 for o in self.orders):
            raise InputError("--orders takes four non-negative integers nb,nf,nc,nd", position="--orders")
        if self.orders[0] == 0:
            raise InputError("order 0 requested for the target entry", position="--orders")
        if self.threads < 1:
            raise InputError("threads must be at least 1", position="NETIDENT_THREADS")

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        """Build from an argparse namespace."""
        target = tuple(args.target) if getattr(args, "target", None) else None
        orders = _parse_labels(getattr(args, "orders", None), "--orders") or (1, 1, 1, 1)
        return cls(
            command=args.command,
            network=args.network,
            output=getattr(args, "output", None),
            target=target,
            mode=getattr(args, "mode", "full") or "full",
            accessible=_parse_labels(getattr(args, "accessible", None), "--accessible"),
            selection=getattr(args, "selection", None),
            data=getattr(args, "data", None),
            informativity=getattr(args, "informativity", None),
            criterion=getattr(args, "criterion", "wls") or "wls",
            orders=orders,
            N=getattr(args, "N", None) or 10000,
            seed=args.seed if getattr(args, "seed", None) is not None else default_seed(),
            replicas=getattr(args, "replicas", None) or 50,
            starts=getattr(args, "starts", None) or 8,
            grid=getattr(args, "grid", None) or default_grid(),
            tol=getattr(args, "tol", None) or 1e-6,
            threads=default_threads(),
            miso=_parse_labels(getattr(args, "miso", None), "--miso"),
            text=bool(getattr(args, "text", False)),
            dump=bool(getattr(args, "dump", False)),
            csv=getattr(args, "csv", None),
        )

    def estimator(self) -> EstimatorConfig:
        return EstimatorConfig(starts=self.starts, threads=self.threads)

    def montecarlo(self) -> MonteCarloConfig:
        return MonteCarloConfig(replicas=self.replicas, N=self.N, seed=self.seed, criterion=self.criterion,
                                threads=self.threads, estimator=self.estimator())

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("target", "accessible", "orders", "miso"):
            if out[key] is not None:
                out[key] = list(out[key])
        return out
