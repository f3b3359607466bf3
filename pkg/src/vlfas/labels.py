"""Class labels shared across the package.

Score conventions treat the bonafide ("real") class as the positive class:
class index 0 is real, index 1 is spoof, and a model score is p_real.
"""

REAL = "real"
SPOOF = "spoof"
LABELS = (REAL, SPOOF)

REAL_INDEX = 0
SPOOF_INDEX = 1

_LABEL_TO_INDEX = {REAL: REAL_INDEX, SPOOF: SPOOF_INDEX}
_INDEX_TO_LABEL = {REAL_INDEX: REAL, SPOOF_INDEX: SPOOF}


def label_to_index(label: str) -> int:
    try:
        return _LABEL_TO_INDEX[label]
    except KeyError:
        raise ValueError(f"unknown class label {label!r}; expected one of {LABELS}") from None


def index_to_label(index: int) -> str:
    try:
        return _INDEX_TO_LABEL[int(index)]
    except (KeyError, TypeError):
        raise ValueError(f"unknown class index {index!r}; expected 0 (real) or 1 (spoof)") from None
