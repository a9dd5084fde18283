from ._riskmin import *  # noqa: F401,F403
