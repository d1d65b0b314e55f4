"""Exception types, each mapped to a CLI exit status."""


class LamsaError(Exception):
    exit_code = 3
    kind = "error"

    def to_dict(self):
        return {"error": self.kind, "message": str(self)}


class ConfigError(LamsaError):
    exit_code = 2
    kind = "config_error"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)

    def to_dict(self):
        d = super().to_dict()
        d["line"] = self.line
        return d


class SimulationError(LamsaError):
    exit_code = 3
    kind = "simulation_failure"

    def __init__(self, message, **details):
        self.details = details
        super().__init__(message)

    def to_dict(self):
        d = super().to_dict()
        d.update({k: _plain(v) for k, v in self.details.items()})
        return d


class InfeasibleDesign(LamsaError):
    exit_code = 4
    kind = "infeasible_design"

    def __init__(self, message, violated=()):
        self.violated = list(violated)
        super().__init__(message)

    def to_dict(self):
        d = super().to_dict()
        d["violated"] = self.violated
        return d


def _plain(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return str(v)
