from datetime import datetime
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import pandas as pd
from pydantic import BaseModel

from core.config_loader import RunConfig, Settings, dump_run_config
from core.config_validator import SettingsValidator
from core.errors import ParameterError

settings = Settings()
SettingsValidator(settings).validate()

CSV_FLOAT_FORMAT = "%.12g"


# Create output directory; an explicit folder is used as-is so reruns overwrite in place
def get_or_create_output_dir(output_folder: Optional[str] = None, label: str = "run") -> Path:
    if output_folder:
        output_dir = Path(output_folder).resolve()
    else:
        base_name = getattr(settings, "OUTPUT_DIR", "output")
        timestamp = datetime.now().strftime("on_%Y-%m-%d_at_%I_%M_%p")
        output_dir = Path(f"{base_name}_{label}_{timestamp}").resolve()
    output_dir.mkdir(parents=True, exist_ok=True)
    return output_dir


def write_csv(
    rows: Iterable[Union[BaseModel, dict]],
    path: Path,
    columns: Optional[Sequence[str]] = None,
) -> Path:
    records = [r.model_dump() if isinstance(r, BaseModel) else dict(r) for r in rows]
    frame = pd.DataFrame.from_records(records, columns=columns)
    if columns is not None:
        frame = frame[list(columns)]
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    return path


def write_resolved_config(config: RunConfig, output_dir: Path) -> Path:
    path = output_dir / "resolved_config.yaml"
    path.write_text(dump_run_config(config), encoding="utf-8")
    return path


def write_report(text: str, output_dir: Path, name: str = "report.md") -> Path:
    path = output_dir / name
    path.write_text(text, encoding="utf-8")
    return path


def read_rate_pairs(path: Union[str, Path]) -> List[Tuple[float, float]]:
    """Read (ε, y) pairs from the first two columns of a CSV; a header row is skipped."""
    try:
        frame = pd.read_csv(path, header=None, comment="#", skip_blank_lines=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParameterError(f"Cannot read pairs from {path}: {e}") from e
    if frame.shape[1] < 2:
        raise ParameterError(f"{path} needs two columns (eps, value)")
    numeric = frame.iloc[:, :2].apply(pd.to_numeric, errors="coerce")
    if numeric.iloc[0].isna().all():
        numeric = numeric.iloc[1:]
    if numeric.isna().any().any():
        raise ParameterError(f"{path} contains non-numeric entries")
    return [(float(e), float(y)) for e, y in numeric.itertuples(index=False)]
