"""Exception hierarchy shared by the solvers, the simulator and the CLI."""


class RuinError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(RuinError, ValueError):
    """Market or consumption parameters violate a model inequality."""


class ConfigError(RuinError, ValueError):
    """A configuration document or simulation config is malformed."""


class DomainError(RuinError, ValueError):
    """A function was evaluated outside the wealth range it is defined on."""


class IntegrationError(RuinError):
    """The Riccati integration failed or produced an inadmissible solution."""


class RootError(RuinError):
    """A bracketed root search could not locate a sign change."""


class InversionError(RuinError):
    """Inverting the dual marginal h~'(v) = w failed."""


class CaseSelectionError(RuinError):
    """No (or more than one) proportional-consumption case condition holds."""


class StrategyError(RuinError):
    """An allocation rule is inadmissible for the requested regime."""
