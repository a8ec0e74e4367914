"""
實驗設定：ExperimentSpec 與 JSON 設定檔載入

每個子命令有自己的預設表；設定檔只需列出要覆寫的鍵，未知鍵一律拒絕。
"""
import copy
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from lattice.algebra import random_element
from lattice.errors import ConfigError, NCTorusError
from lattice.nc_element import NCElement, ThetaMatrix
from nonlinear.polynomial import NCPolynomial, load_polynomial, parse_element_spec
from solver.mild_solution import SolverConfig

RATE_CASES = [[[1], 0], [[2], 0], [[0], 1], [[1], 1]]

SOLVER_DEFAULTS: Dict[str, Any] = {
    "k": 1,
    "cutoff": 2,
    "ball_radius": None,
    "picard_step": 1e-3,
    "picard_tol": 1e-12,
    "picard_max_iter": 60,
    "min_window_steps": 32,
    "interpolation": "linear",
    "initial_guess": "heat",
    "scheme": "picard",
    "h": 1e-3,
    "h_min": 1e-12,
    "growth_tol": 0.01,
    "T_end": 1.0,
    "threshold": 1e3,
    "polynomial": {"power": 2, "coefficient": 1.0},
    "initial_datum": None,
}

NONCONSTANT_DATUM = {"random": {"radius": 4, "sigma": 6.0, "amplitude": 0.05}}

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "rates": {
        "dims": [1, 2], "cases": RATE_CASES, "t_exponents": [6, 16],
        "slope_tol": 0.05, "r2_min": 0.999,
    },
    "sharpness": {
        "dims": [1, 2], "cases": RATE_CASES, "t_exponents": {"1": [2, 7], "2": [3, 8]},
        "min_decades": 5, "band_factor": 10.0,
    },
    "kernel-scaling": {
        "alpha": [1], "t_values": [1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
        "scaling_t_max": 1e-2, "scaling_tol": 0.02, "gaussian_tol": 1e-6,
    },
    "bracket": {
        "dims": [1, 2], "orders": [1, 2], "t_values": [1e-3, 1e-2, 1e-1],
    },
    "algebra": {
        "cases": [{"n": 1, "k": 1, "radius": 6}, {"n": 2, "k": 2, "radius": 3}],
        "thetas": ["zero", "golden"], "samples": 10000, "sigma_range": [0.5, 4.0], "chunk": 500,
    },
    "embedding": {
        "cases": [{"n": 1, "k": 1, "radius": 6}, {"n": 2, "k": 2, "radius": 3}],
        "thetas": ["zero", "golden"], "samples": 10000, "sigma_range": [0.5, 4.0], "chunk": 2000,
    },
    "laws": {
        "dims": [2, 3], "cases": 1000, "radius": 2, "tol": 1e-12, "chunk": 250,
    },
    "regularize": {
        "n": 2, "theta": "golden", "orders": [[1, 1], [1, 2]], "samples": 20, "radius": 4, "sigma": 2.0,
        "t_values": [1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0],
        "envelope_radius": 32, "envelope_tol": 1e-9,
    },
    "solve": dict(SOLVER_DEFAULTS, **{
        "n": 1, "theta": "zero", "picard_T_end": 0.9, "blowup_T_end": 2.0,
        "oracle": "constant-quadratic", "oracle_tol": 1e-6, "contraction_max": 0.55,
    }),
    "blowup": dict(SOLVER_DEFAULTS, **{
        "n": 1, "theta": "zero", "T_end": 2.0, "thresholds": [1e2, 1e3, 1e4],
        "oracle_t_max": 1.0, "bound_slack": 1e-3,
    }),
    "smoothing": dict(SOLVER_DEFAULTS, **{
        "n": 2, "theta": "golden", "k": 2, "cutoff": 6, "initial_datum": NONCONSTANT_DATUM,
        "refinements": [32, 64], "trend_tol": 0.1,
    }),
    "bootstrap": dict(SOLVER_DEFAULTS, **{
        "n": 1, "theta": "zero", "k": 1, "cutoff": 8, "initial_datum": NONCONSTANT_DATUM,
        "r": 2, "epsilon": 1e-3, "refinements": [32, 64], "refinement_tol": 0.1,
    }),
    "dependence": dict(SOLVER_DEFAULTS, **{
        "n": 1, "theta": "zero", "k": 1, "cutoff": 6, "initial_datum": NONCONSTANT_DATUM,
        "pairs": 100, "perturbation": 1e-3, "contraction_max": 0.55, "chunk": 10,
    }),
    "convergence": dict(SOLVER_DEFAULTS, **{
        "n": 2, "theta": "golden", "k": 2, "cutoff": 4, "initial_datum": NONCONSTANT_DATUM,
        "refinements": [8, 16, 32], "reference_steps": 512, "order_tol": 0.2,
    }),
}

COMMANDS = tuple(DEFAULTS)

SOLVER_KEYS = ("k", "cutoff", "ball_radius", "picard_step", "picard_tol", "picard_max_iter",
               "min_window_steps", "interpolation", "initial_guess", "scheme", "h", "h_min",
               "growth_tol", "T_end", "threshold")


def parse_theta(value: Any, n: int) -> ThetaMatrix:
    """θ：'zero'、'golden' 或 row-major 的 n×n 清單"""
    if value == "zero":
        return ThetaMatrix.zero(n)
    if value == "golden":
        return ThetaMatrix.golden(n)
    if isinstance(value, list):
        try:
            theta = ThetaMatrix.from_rows(value)
        except (NCTorusError, TypeError) as e:
            raise ConfigError("theta", str(e))
        if theta.n != n:
            raise ConfigError("theta", f"θ 為 {theta.n}×{theta.n}，與 n={n} 不一致")
        return theta
    raise ConfigError("theta", f"必須是 'zero'、'golden' 或 row-major 矩陣，收到 {value!r}")


@dataclass
class ExperimentSpec:
    command: str
    params: Dict[str, Any]
    out_dir: str = "output"
    seed: int = 0
    base_dir: str = "."
    config_path: Optional[str] = None
    threads: int = 1
    max_mem_mb: int = 1024
    extra: Dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        if key not in self.params:
            raise ConfigError(key, f"子命令 '{self.command}' 沒有這個設定鍵")
        return self.params[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.params.get(key, default)

    @property
    def spec_hash(self) -> str:
        """sha256(command, params, seed) 的前 16 碼"""
        payload = json.dumps({"command": self.command, "params": self.params, "seed": self.seed},
                             sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def theta(self, n: Optional[int] = None) -> ThetaMatrix:
        n = self["n"] if n is None else n
        return parse_theta(self.get("theta", "zero"), n)

    def polynomial(self, theta: ThetaMatrix) -> NCPolynomial:
        return load_polynomial(self["polynomial"], theta, self.base_dir)

    def initial_datum(self, theta: ThetaMatrix, seed_offset: int = 0) -> NCElement:
        """預設 U^0；{"random": {...}} 依 seed 產生；其餘同多項式係數描述"""
        value = self.get("initial_datum")
        if value is None:
            return NCElement.identity(theta)
        if isinstance(value, dict) and "random" in value:
            options = value["random"]
            unknown = set(options) - {"radius", "sigma", "amplitude"}
            if unknown:
                raise ConfigError("initial_datum.random", f"未知的鍵 {sorted(unknown)}")
            return random_element(theta, int(options.get("radius", 4)), float(options.get("sigma", 6.0)),
                                  seed=self.seed + seed_offset, amplitude=float(options.get("amplitude", 0.05)))
        return parse_element_spec(value, theta, self.base_dir, "initial_datum")

    def solver_config(self, **overrides) -> SolverConfig:
        values = {key: self.params[key] for key in SOLVER_KEYS if key in self.params}
        values.update(overrides)
        try:
            return SolverConfig(**values)
        except NCTorusError as e:
            raise ConfigError("solver", str(e))

    def to_dict(self) -> Dict[str, Any]:
        return {"command": self.command, "params": self.params, "seed": self.seed,
                "base_dir": self.base_dir, "out_dir": self.out_dir}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentSpec":
        return cls(command=data["command"], params=data["params"], seed=data["seed"],
                   base_dir=data.get("base_dir", "."), out_dir=data.get("out_dir", "output"))


def load_spec(command: str, config_path: Optional[str] = None, out_dir: str = "output",
              seed: Optional[int] = None, threads: int = 1, max_mem_mb: int = 1024) -> ExperimentSpec:
    """
    合併預設表與設定檔；設定檔可含 "command"（必須一致）與 "seed"（CLI 的 --seed 優先）
    """
    if command not in DEFAULTS:
        raise ConfigError("command", f"未知的子命令 '{command}'，可用: {', '.join(COMMANDS)}")
    params = copy.deepcopy(DEFAULTS[command])
    base_dir = "."
    file_seed = 0
    if config_path:
        if not os.path.exists(config_path):
            raise ConfigError("config", f"找不到設定檔 {config_path}")
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"JSON 格式錯誤: {e}")
        if not isinstance(data, dict):
            raise ConfigError("config", "設定檔最外層必須是物件")
        base_dir = os.path.dirname(os.path.abspath(config_path))
        declared = data.pop("command", command)
        if declared != command:
            raise ConfigError("command", f"設定檔屬於 '{declared}'，但執行的是 '{command}'")
        file_seed = data.pop("seed", 0)
        for key, value in data.items():
            if key not in params:
                raise ConfigError(key, f"子命令 '{command}' 沒有這個設定鍵")
            params[key] = value

    final_seed = int(seed if seed is not None else file_seed)
    if final_seed < 0:
        raise ConfigError("seed", f"必須為非負整數，收到 {final_seed}")
    if "n" in params and (not isinstance(params["n"], int) or params["n"] < 1):
        raise ConfigError("n", f"必須為正整數，收到 {params['n']!r}")
    return ExperimentSpec(command=command, params=params, out_dir=out_dir, seed=final_seed,
                          base_dir=base_dir, config_path=config_path, threads=threads,
                          max_mem_mb=max_mem_mb)
