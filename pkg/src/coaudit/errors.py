"""Exceptions raised by the co-auditing toolchain."""


class CoAuditError(Exception):
    """Base class for every error raised by coaudit."""


# Ingest


class MissingEntryError(CoAuditError, FileNotFoundError):
    """The entry contract file does not exist under the project root."""


class UnreadableFileError(CoAuditError, OSError):
    """A Solidity file could not be read from disk."""


class UnresolvedImportError(CoAuditError, LookupError):
    """An import string matches no file and no remapping."""


class DuplicateContractError(CoAuditError, ValueError):
    """Two source files declare a contract with the same name."""


# Parser and call graph


class SoliditySyntaxError(CoAuditError, ValueError):
    """Unbalanced braces, parentheses, strings or comments.

    Attributes:
        line: 1-based line of the offending character.
    """

    def __init__(self, message: str, line: int) -> None:
        """Store the line number next to the message."""
        super().__init__(f"{message} (line {line})")
        self.line = line


class UnknownContractError(CoAuditError, LookupError):
    """The requested contract is not declared in the parsed unit."""


class UnknownFunctionError(CoAuditError, LookupError):
    """The requested FunctionId is not a node of the call graph."""


class BudgetTooSmallError(CoAuditError, ValueError):
    """The target function alone does not fit in the token budget."""


# Prompts and gateway


class EmptyCatalogError(CoAuditError, ValueError):
    """A CWE plan was requested with an empty vulnerability catalog."""


class ReplayMissError(CoAuditError, LookupError):
    """Strict replay found no cassette entry for the request hash."""


class TransportError(CoAuditError, RuntimeError):
    """The live backend failed after all retries."""


class QuotaError(CoAuditError, RuntimeError):
    """The live backend answered HTTP 429."""


# Audit


class MixedContractsError(CoAuditError, ValueError):
    """Findings passed to one report belong to different contracts."""


# Evaluation


class UnresolvedGroundTruthError(CoAuditError, LookupError):
    """A ground-truth location maps to no function."""


class ZeroTotalError(CoAuditError, ValueError):
    """A detection rate was requested over zero labeled vulnerabilities."""


class NoDiscordantPairsError(CoAuditError, ValueError):
    """McNemar's statistic is undefined when b + c = 0."""


class NegativeStatisticError(CoAuditError, ValueError):
    """A chi-squared statistic below zero was given."""


class LengthMismatchError(CoAuditError, ValueError):
    """Two paired vectors do not have the same length."""


class ZeroPooledSdError(CoAuditError, ValueError):
    """Cohen's d is undefined when both samples are constant."""


class DegenerateCountsError(CoAuditError, ValueError):
    """Precision or recall has a zero denominator."""


class PerfectExpectedAgreementError(CoAuditError, ValueError):
    """Cohen's Kappa is undefined when chance agreement equals one."""


# Pipeline


class ConfigError(CoAuditError, ValueError):
    """The run configuration is invalid for the requested stage."""


class StageInputMissingError(CoAuditError, FileNotFoundError):
    """A stage could not find the artifact written by the stage before it."""
