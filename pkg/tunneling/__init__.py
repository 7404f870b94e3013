from tunneling.domain import *
from tunneling.engine import *
from tunneling.storage import *
from tunneling.experiments import COMMANDS, RunSummary, run_analysis1, run_analysis2, run_analysis3, run_nelson, run_snapshots, run_sweep
from tunneling.utils import *
