"""Exception types shared across the laboratory."""


class FbrlError(Exception):
    """Root of every error raised deliberately by fbrl_lab."""


class RejectedInputError(FbrlError, ValueError):
    """An argument has the wrong shape, range or provenance."""


class RejectedConfigError(FbrlError, ValueError):
    """A configuration file or object is malformed or inconsistent."""


class TrainingError(FbrlError, RuntimeError):
    """An optimizer step produced non-finite gradients or parameters."""


class InsufficientDataError(FbrlError, RuntimeError):
    """The replay buffer holds fewer transitions than requested."""


class ExperimentError(FbrlError, RuntimeError):
    """A trial failed; the experiment is aborted rather than averaged short."""

    def __init__(self, trial, seed, cause):
        self.trial = trial
        self.seed = seed
        self.cause = cause
        super().__init__(f"trial {trial} (seed {seed}) failed: {cause}")
