import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Mapping, Optional, Union

from lpcoreset.exceptions import ConfigError
from lpcoreset.generators import GeneratorSpec

logger = logging.getLogger(__name__)

COMMANDS = ("scores", "flatten", "sample", "recursive", "verify", "bench", "regress")
SCORE_KINDS = ("leverage", "sensitivity", "lewis")
SAMPLE_METHODS = ("sensitivity", "rootlev", "lewis", "half")
FLATTEN_KINDS = ("sensitivity", "uniform", "senslev")
CHECKS = ("embedding", "total_sens", "perturbation", "gaussian")
RECURSIVE_KINDS = ("sensitivity", "rootlev", "senslev")


@dataclass
class RunConfig:
    """
    Parameters of one CLI run. Keys of the key=value config file match the field names.

    Attributes:
    - command (str): scores, flatten, sample, recursive, verify, bench or regress.
    - input (str, optional): Matrix CSV; exclusive with gen (neither for the gaussian check).
    - gen (str, optional): Generator family; exclusive with input.
    - n, d, k, q, s (int): Generator parameters.
    - p (float): Exponent.
    - eps (float): Target distortion in (0, 1).
    - delta (float): Failure probability recorded with the run.
    - method (str): Sampling rule: sensitivity, rootlev, lewis or half.
    - kind (str): Score kind for the scores command.
    - recursive (str): Scheme for the recursive command: sensitivity, rootlev or senslev.
    - alpha (float or 'auto'): Oversampling parameter, or calibrate it.
    - C (float): Flattening threshold factor.
    - flatten (str, optional): Flattening transform applied by flatten / bench.
    - seed (int): Top-level seed; trial i uses seed + i.
    - trials (int): Repetitions for bench.
    - probes, restarts (int): Distortion estimator effort.
    - budget (int): Halvings allowed to alpha calibration.
    - eps_grid (list of float): Epsilons for bench.
    - draw (str, optional): Draw JSON consumed by verify.
    - check (str): Check run by verify.
    - target_col (int): Column used as b by regress; -1 is the last.
    - compare_lewis (bool): Whether bench adds the Lewis sample size comparison.
    - out (str): Output directory.
    """

    command: str = "scores"
    input: Optional[str] = None
    gen: Optional[str] = None
    n: int = 0
    d: int = 1
    k: int = 0
    q: int = 1
    s: int = 0
    p: float = 2.0
    eps: float = 0.5
    delta: float = 0.1
    method: str = "sensitivity"
    kind: str = "sensitivity"
    recursive: str = "sensitivity"
    alpha: Union[float, str] = "auto"
    C: float = 4.0
    flatten: Optional[str] = None
    seed: int = 0
    trials: int = 1
    probes: int = 128
    restarts: int = 4
    budget: int = 20
    eps_grid: List[float] = field(default_factory=list)
    draw: Optional[str] = None
    check: str = "embedding"
    target_col: int = -1
    compare_lewis: bool = False
    out: str = "out"

    def validate(self) -> "RunConfig":
        """
        Checks field ranges and the input / generator exclusivity.

        Returns:
        - RunConfig: self, for chaining.
        """
        if self.command not in COMMANDS:
            raise ConfigError(f"Command {self.command!r} not supported! Choose from {COMMANDS}.")
        if self.command == "verify" and self.check == "gaussian":
            if self.input is not None:
                raise ConfigError("The gaussian check generates its own matrix; drop input.")
        elif (self.input is None) == (self.gen is None):
            raise ConfigError("Exactly one of input and gen must be given.")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}.")
        if not 0 < self.eps < 1:
            raise ConfigError(f"eps must lie in (0, 1), got {self.eps}.")
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}.")
        if not self.p >= 1:
            raise ConfigError(f"p must be at least 1, got {self.p}.")
        if self.method not in SAMPLE_METHODS:
            raise ConfigError(f"Method {self.method!r} not supported! Choose from {SAMPLE_METHODS}.")
        if self.kind not in SCORE_KINDS:
            raise ConfigError(f"Score kind {self.kind!r} not supported! Choose from {SCORE_KINDS}.")
        if self.recursive not in RECURSIVE_KINDS:
            raise ConfigError(f"Recursive scheme {self.recursive!r} not supported! Choose from {RECURSIVE_KINDS}.")
        if self.flatten is not None and self.flatten not in FLATTEN_KINDS:
            raise ConfigError(f"Flattening {self.flatten!r} not supported! Choose from {FLATTEN_KINDS}.")
        if self.check not in CHECKS:
            raise ConfigError(f"Check {self.check!r} not supported! Choose from {CHECKS}.")
        if self.alpha != "auto" and not (isinstance(self.alpha, float) and self.alpha > 0):
            raise ConfigError(f"alpha must be 'auto' or a positive number, got {self.alpha!r}.")
        if any(not 0 < e < 1 for e in self.eps_grid):
            raise ConfigError(f"Every eps_grid entry must lie in (0, 1), got {self.eps_grid}.")
        if self.command == "verify" and self.check == "embedding" and self.draw is None:
            raise ConfigError("verify needs a draw file for the embedding check.")
        return self

    def generator_spec(self) -> Optional[GeneratorSpec]:
        if self.gen is None:
            return None
        return GeneratorSpec(
            family=self.gen, n=self.n, d=self.d, k=self.k, q=self.q, s=self.s, p=self.p, seed=self.seed
        )

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


_TYPE_NAMES = {int: "int", float: "float", bool: "bool"}
_FIELD_TYPES = {f.name: _TYPE_NAMES.get(f.type, "str") for f in fields(RunConfig)}
TRUE_WORDS = ("1", "true", "yes", "on")


def _convert(name: str, raw: object) -> object:
    if raw is None:
        return None
    kind = _FIELD_TYPES[name]
    try:
        if name == "alpha":
            return "auto" if str(raw).strip() == "auto" else float(raw)
        if name == "eps_grid":
            if isinstance(raw, (list, tuple)):
                return [float(v) for v in raw]
            return [float(v) for v in str(raw).split(",") if v.strip()]
        if kind == "bool":
            return raw if isinstance(raw, bool) else str(raw).strip().lower() in TRUE_WORDS
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError as e:
        raise ConfigError(f"Bad value {raw!r} for {name}: {e}") from e
    return str(raw)


def parse_config_text(text: str) -> Dict[str, str]:
    """
    Parses flat key=value lines; '#' starts a comment and blank lines are skipped.
    """
    values: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Line {lineno}: expected key=value, got {line!r}.")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"Line {lineno}: unknown key {key!r}.")
        values[key] = value
    return values


def load_config(path: str) -> Dict[str, str]:
    """
    Reads a key=value config file.

    Parameters:
    - path (str): Config file path.

    Returns:
    - dict: Raw string values by key.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            return parse_config_text(f.read())
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e


def build_config(file_values: Mapping[str, object], flag_values: Mapping[str, object]) -> RunConfig:
    """
    Merges defaults, config file values and CLI flags (flags win) into a validated RunConfig.

    Parameters:
    - file_values (mapping): Values from load_config.
    - flag_values (mapping): Flags that were given explicitly (None entries are ignored).

    Returns:
    - RunConfig: Validated configuration.
    """
    merged: Dict[str, object] = {}
    for source in (file_values, flag_values):
        for key, value in source.items():
            if value is None:
                continue
            if key not in _FIELD_TYPES:
                raise ConfigError(f"Unknown config key {key!r}.")
            merged[key] = _convert(key, value)
    logger.debug("Resolved configuration: %s", merged)
    return RunConfig(**merged).validate()
