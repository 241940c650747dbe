"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or inconsistent input data (files, schemas, invariants)."""


class NumericalError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, batch: int, lr: float):
        self.epoch = epoch
        self.batch = batch
        self.lr = lr
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch}, lr {lr:.6g}"
        )
