"""Type hints for semattack."""

from typing import Union

import numpy as np
import numpy.typing as npt

ArrayLike = Union[np.ndarray, list, tuple, int, float]

# Dense float64 containers. A Vector is 1-D, a Matrix is 2-D row-major.
Vector = npt.NDArray[np.float64]
Matrix = npt.NDArray[np.float64]
Labels = npt.NDArray[np.int64]
