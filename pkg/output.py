"""Writers for the CSV tables and JSON reports every command emits."""

import json
import math
import platform
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd
import scipy

TOOL_VERSION = "1.0.0"
SIGNIFICANT_DIGITS = 6
FLOAT_FORMAT = f"%.{SIGNIFICANT_DIGITS}g"


def package_versions() -> Dict[str, str]:
    return {
        "spikeslab_ar": TOOL_VERSION,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


def round_sig(value: Any, digits: int = SIGNIFICANT_DIGITS) -> Any:
    """Round floats to ``digits`` significant digits, recursing into containers.

    NaN and infinities become None so the JSON stays standard.
    """
    if isinstance(value, dict):
        return {str(k): round_sig(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_sig(v, digits) for v in value]
    if isinstance(value, np.ndarray):
        return [round_sig(v, digits) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return None
        return float(f"{value:.{digits}g}")
    return value


def write_json(data: Any, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(round_sig(data), f, indent=2, ensure_ascii=False)
        f.write("\n")
    return path


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
    return path
