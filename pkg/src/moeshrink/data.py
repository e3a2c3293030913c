"""Data containers and CSV ingestion."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataValidationError(ValueError):
    """Raised when input data violates the model's requirements."""


@dataclass
class Dataset:
    """Response matrix plus covariate design matrix.

    responses: (N, J) array; binary {0,1} entries for the Bernoulli family,
        real entries for the Gaussian family (J = dimension).  For supervised
        multinomial fits the observed labels are carried in ``labels`` and the
        responses array is unused (shape (N, 0) is fine).
    covariates: (N, P) design matrix.  If ``intercept_included``, column 0 is
        all ones.
    labels: optional observed class labels in 1..K (supervised fits, truth).
    """

    responses: np.ndarray
    covariates: np.ndarray
    intercept_included: bool = False
    labels: np.ndarray | None = None
    response_names: list[str] = field(default_factory=list)
    covariate_names: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.responses = np.atleast_2d(np.asarray(self.responses, dtype=float))
        self.covariates = np.atleast_2d(np.asarray(self.covariates, dtype=float))
        if self.responses.shape[0] not in (0, self.covariates.shape[0]):
            raise DataValidationError(
                f"responses have {self.responses.shape[0]} rows, "
                f"covariates have {self.covariates.shape[0]}"
            )
        if self.n_obs < 2:
            raise DataValidationError("need at least 2 observations")
        if np.isnan(self.responses).any() or np.isnan(self.covariates).any():
            raise DataValidationError("missing entries are not supported")
        if self.intercept_included and not np.all(self.covariates[:, 0] == 1.0):
            raise DataValidationError("intercept_included set but column 0 is not all ones")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (self.n_obs,):
                raise DataValidationError("labels must be one integer per observation")
            if self.labels.min() < 1:
                raise DataValidationError("labels must be in 1..K")

    @property
    def n_obs(self) -> int:
        return self.covariates.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_responses(self) -> int:
        return self.responses.shape[1]

    def validate_binary(self) -> None:
        """Require every response column to be 0/1 (Bernoulli family)."""
        for j in range(self.n_responses):
            col = self.responses[:, j]
            if not np.all((col == 0.0) | (col == 1.0)):
                name = self.response_names[j] if self.response_names else f"column {j + 1}"
                raise DataValidationError(
                    f"response {name} is not binary; Bernoulli family requires 0/1 entries"
                )

    def with_intercept(self) -> "Dataset":
        """Return a copy with a leading all-ones column prepended."""
        if self.intercept_included:
            return self
        ones = np.ones((self.n_obs, 1))
        return Dataset(
            responses=self.responses,
            covariates=np.hstack([ones, self.covariates]),
            intercept_included=True,
            labels=self.labels,
            response_names=list(self.response_names),
            covariate_names=["intercept"] + list(self.covariate_names),
        )


def _read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise DataValidationError(f"{path}: empty file")
        names = [h.strip() for h in header.split(",")]
    try:
        values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise DataValidationError(f"{path}: {exc}") from exc
    if values.shape[1] != len(names):
        raise DataValidationError(
            f"{path}: header has {len(names)} columns, rows have {values.shape[1]}"
        )
    return names, values


def load_dataset(
    responses_path: str | Path,
    covariates_path: str | Path,
    add_intercept: bool = False,
    supervised: bool = False,
) -> Dataset:
    """Load row-aligned responses and covariates CSV files (header required).

    With ``supervised`` the responses file must hold a single integer label
    column; labels are stored and the response matrix is left empty.
    """
    resp_names, resp = _read_csv(Path(responses_path))
    cov_names, cov = _read_csv(Path(covariates_path))
    if resp.shape[0] != cov.shape[0]:
        raise DataValidationError(
            f"row mismatch: {resp.shape[0]} response rows vs {cov.shape[0]} covariate rows"
        )
    labels = None
    if supervised:
        if resp.shape[1] != 1:
            raise DataValidationError("supervised fit expects a single label column")
        labels = resp[:, 0]
        if not np.all(labels == np.round(labels)):
            raise DataValidationError("labels must be integers")
        resp = np.empty((cov.shape[0], 0))
        resp_names = []
    ds = Dataset(
        responses=resp,
        covariates=cov,
        labels=labels,
        response_names=resp_names,
        covariate_names=cov_names,
    )
    return ds.with_intercept() if add_intercept else ds


def write_matrix_csv(path: str | Path, names: list[str], values: np.ndarray, fmt: str = "%.10g") -> None:
    values = np.atleast_2d(values)
    header = ",".join(names)
    np.savetxt(path, values, delimiter=",", header=header, comments="", fmt=fmt)
