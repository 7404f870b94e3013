#################################
# Store Results on the local FS #
#################################

import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from tunneling.domain.config import ExperimentConfig
from tunneling.domain.model import WaveField
from tunneling.utils import ConfigError, ExtendedEnum, format_number, logger, print_message

CONFIG_FILE = "config.json"
HASH_PREFIX = "# config-sha256: "
TABLE_SUFFIX = ".dat"


class OutputKind(ExtendedEnum):
    SNAPSHOTS       = 1
    AMPLITUDES      = 2
    DISTRIBUTIONS   = 3
    STATISTICS      = 4
    PROFILES        = 5
    MOMENTA         = 6
    DELTAS          = 7
    TRANSMISSION    = 8
    COUNTING        = 9
    PATHS           = 10
    DRIFT           = 11
    HISTOGRAMS      = 12


class Loader:

    # HELPER FUNCTIONS ------------------------------------------------------------------------------------------- #

    def _get_related_file_path(out_dir: Path, kind: OutputKind, name: str) -> Path:
        return Path(out_dir).joinpath(str(kind), f"{name}{TABLE_SUFFIX}")

    def _write_atomically(path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, 'w') as fp:
                fp.write(text)
            os.replace(tmp_name, path)
        except BaseException:
            Path(tmp_name).unlink(missing_ok=True)
            raise

    def _format_row(row: Sequence[Any]) -> str:
        return ",".join(format_number(value) for value in row)

    # CONFIGURATION ---------------------------------------------------------------------------------------------- #

    @staticmethod
    def load_config_from_fs(config_file: Optional[Path]) -> ExperimentConfig:
        if config_file is None:
            return ExperimentConfig()
        if not Path(config_file).exists():
            print_message(f"Configuration file '{config_file}' does not exist", "error", FileNotFoundError)
        return ExperimentConfig.load(Path(config_file))

    @staticmethod
    def load_config_to_fs(out_dir: Path, config: ExperimentConfig) -> Path:
        config_file = Path(out_dir).joinpath(CONFIG_FILE)
        Loader._write_atomically(config_file, config.to_json() + "\n")
        return config_file

    # TABLES ----------------------------------------------------------------------------------------------------- #

    @staticmethod
    def load_table_to_fs(out_dir: Path, kind: OutputKind, name: str,
                         header: Sequence[str], rows: Iterable[Sequence[Any]], config_hash: str) -> Path:
        lines = [f"{HASH_PREFIX}{config_hash}", ",".join(header)]
        for row in rows:
            if len(row) != len(header):
                print_message(f"Row of {len(row)} values under a header of {len(header)} columns in '{name}'", "error", ValueError)
            lines.append(Loader._format_row(row))

        table_file = Loader._get_related_file_path(out_dir, kind, name)
        Loader._write_atomically(table_file, "\n".join(lines) + "\n")
        logger.debug("Wrote %d rows to %s", len(lines) - 2, table_file)
        return table_file

    @staticmethod
    def load_table_from_fs(table_file: Path) -> tuple[str, list[str], np.ndarray]:
        with Path(table_file).open('r') as fp:
            hash_line = fp.readline().rstrip("\n")
            header = fp.readline().rstrip("\n").split(",")
            if not hash_line.startswith(HASH_PREFIX):
                print_message(f"'{table_file}' carries no configuration hash", "error", ConfigError)
            data = np.loadtxt(fp, delimiter=",", ndmin=2)
        return hash_line[len(HASH_PREFIX):], header, data

    @staticmethod
    def load_columns_to_fs(out_dir: Path, kind: OutputKind, name: str,
                           columns: dict[str, np.ndarray], config_hash: str) -> Path:
        values = [np.asarray(c) for c in columns.values()]
        return Loader.load_table_to_fs(out_dir, kind, name, list(columns), zip(*values), config_hash)

    # WAVE FIELDS ------------------------------------------------------------------------------------------------ #

    @staticmethod
    def load_snapshot_to_fs(out_dir: Path, field: WaveField, name: str, config_hash: str) -> Path:
        return Loader.load_columns_to_fs(
            out_dir, OutputKind.SNAPSHOTS, name, {"x": field.grid.x, "density": field.density}, config_hash
        )

    @staticmethod
    def load_amplitudes_to_fs(out_dir: Path, field: WaveField, name: str, config_hash: str) -> Path:
        psi = field.amplitudes
        return Loader.load_columns_to_fs(
            out_dir, OutputKind.AMPLITUDES, name, {"x": field.grid.x, "re": psi.real, "im": psi.imag}, config_hash
        )
