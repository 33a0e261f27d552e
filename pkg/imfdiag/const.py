"""Constants."""

# region #-- imports --#
from enum import Enum, StrEnum, unique

# endregion

DOMAIN: str = "imfdiag"

# region #-- signal / EMD --#
DEF_SAMPLE_RATE_HZ: int = 40000
DEF_SD_THRESHOLD: float = 0.2
DEF_MAX_SIFTS_PER_IMF: int = 50
DEF_MIN_EXTREMA: int = 4
DEF_MAX_TOTAL_IMFS: int = 16
RECONSTRUCTION_RTOL: float = 1e-9
# endregion

# region #-- CEEMDAN --#
CEEMDAN_MIN_LENGTH: int = 100
DEF_NR: int = 50
DEF_MAX_ITER: int = 250
DEF_SNR_FLAG: int = 1
DEF_EPSILON: float = 0.2
DEF_K: int = 10
DEF_SEED: int = 0
U64_MASK: int = 0xFFFFFFFFFFFFFFFF
# endregion

# region #-- dataset --#
CHANNEL_MAGIC: bytes = b"VIB1"
CHANNEL_HEADER_FORMAT: str = "<4sIII"  # magic, sample rate, sample count, reserved
DEF_WINDOW_LEN: int = 20000
DEF_WINDOWS_PER_RECORD: int = 10
DEF_TRAIN_FRAC: float = 0.7
DEF_VAL_FRAC: float = 0.1
CACHE_INDEX_FILENAME: str = "index.csv"
NREL_CHANNELS: tuple[str, ...] = ("AN3", "AN4", "AN5", "AN6", "AN7", "AN9", "AN10")
# endregion

# region #-- network --#
CHECKPOINT_MAGIC: bytes = b"MSC1"
CHECKPOINT_VERSION: int = 1
KERNEL_WIDTH: int = 5
POOL_WIDTH: int = 2
MIN_INPUT_LEN: int = 24
STD_FLOOR: float = 1e-12
DEF_ADAM_BETA1: float = 0.9
DEF_ADAM_BETA2: float = 0.999
DEF_ADAM_EPS: float = 1e-8
# endregion

# region #-- training --#
DEF_LR: float = 1e-5
DEF_BATCH_SIZE: int = 16
DEF_MAX_EPOCHS: int = 100
DEF_PATIENCE: int = 15
MIN_VAL_IMPROVEMENT: float = 1e-6
# endregion

# region #-- harness --#
DEF_DURATIONS_S: tuple[float, ...] = (0.10, 0.15, 0.20, 0.25)
# CEEMDAN tuning grid rows: (NR, MaxIter, SNRFlag)
DEF_PARAM_GRID: tuple[tuple[int, int, int], ...] = (
    (25, 250, 1),
    (50, 250, 1),
    (75, 250, 1),
    (100, 250, 1),
    (50, 100, 1),
    (50, 250, 1),
    (50, 500, 1),
    (50, 250, 0),
)
HISTORY_CSV_COLUMNS: tuple[str, ...] = (
    "epoch",
    "train_loss",
    "val_loss",
    "val_acc",
    "seconds",
)
# endregion


@unique
class Condition(StrEnum):
    """Gearbox condition of a recording."""

    HEALTHY = "healthy"
    DAMAGED = "damaged"

    @property
    def label(self) -> int:
        """Class label; damaged is the positive class."""
        return 1 if self is Condition.DAMAGED else 0


@unique
class ChannelFormat(StrEnum):
    """On-disk formats for a single channel."""

    CSV = "csv"
    F64LE = "f64le"


@unique
class Side(StrEnum):
    """Envelope side."""

    UPPER = "upper"
    LOWER = "lower"


@unique
class Activation(StrEnum):
    """Layer activations."""

    NONE = "none"
    RELU = "relu"


@unique
class Mode(StrEnum):
    """Network execution mode."""

    TRAIN = "train"
    INFER = "infer"


@unique
class ExitCode(Enum):
    """CLI exit codes."""

    SUCCESS = 0
    USAGE = 1
    DATA = 2
    NUMERIC = 3
