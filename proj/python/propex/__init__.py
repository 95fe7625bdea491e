from propex._core import *  # noqa: F401,F403
from propex._core import __version__, pipeline  # noqa: F401
