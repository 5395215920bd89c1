"""Exception hierarchy mapped to process exit codes."""


class SkillArenaError(Exception):
    """Base class; exit code 1 unless a subclass narrows it."""

    exit_code = 1


class UsageError(SkillArenaError):
    """Bad arguments, malformed config, or a violated call contract."""

    exit_code = 2


class MissingArtifactError(SkillArenaError):
    """A referenced checkpoint, manifest, or metrics file does not exist."""

    exit_code = 3


class IntegrityError(SkillArenaError):
    """An artifact exists but fails its hash or format check."""

    exit_code = 4


class NumericalError(SkillArenaError):
    """Training aborted on non-finite loss or parameters."""

    exit_code = 5
