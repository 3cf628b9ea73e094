# Import peconsensus objects
from .utils import *
from .exceptions import *
from .kernels import *
from .dynamics import *
from .schedules import *
from .integrator import *
from .observables import *
from .experiments import *
from .plotting import *
from .datasets import *
from .cli import *
from .config import *

# Current version
__version__ = "0.1.0"

# load default options
set_default_options()
