"""
Shared field types for numpy-backed models
"""

from typing import Annotated, Any

import numpy as np
from pydantic import PlainSerializer


def _to_list(value: np.ndarray) -> list[Any]:
    return np.asarray(value).tolist()


# Serialized as nested lists in JSON reports
Array = Annotated[np.ndarray, PlainSerializer(_to_list, return_type=list, when_used="json")]
