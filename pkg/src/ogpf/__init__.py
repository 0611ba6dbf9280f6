"""Two-stage solver toolkit for multi-area optimal gas-power flow."""

from .convexsolve import (ConsensusOptions, SolveOptions, Solution,
                          solve_consensus, solve_convex)
from .errors import (AllInfeasible, CapExceeded, CertificationBug,
                     ConfigError, MissingBounds, NonConvergence, OgpfError,
                     OutOfRange, ParseError, ValidationError)
from .mipbuild import (StandardModel, VarIndex, area_views, build_model,
                       check_point, dump_model, fit_all_curves, fix_columns,
                       relax)
from .netmodel import (Bus, GasNode, GasSource, Generator, NetworkInstance,
                       Pipeline, PowerLine, classify_edges, load_instance,
                       save_instance, scale_demands)
from .oracle import OracleResult, enumerate_solve
from .pwa import MldBlock, PwaConfig, PwaCurve, PwaSegment, emit_mld, fit_pwa, max_region_error
from .recovery import (BinaryAssignment, Certificate, PressureLp,
                       RecoveryResult, assemble_and_certify,
                       build_pressure_lp, recover_binaries, solve_pressure_lp,
                       update_aux, weymouth_deviation)
from .twostage import TwoStageResult, solve_two_stage

__version__ = "0.1.0"


def instance_path(name: str):
    """Filesystem path of a bundled example instance (e.g. ``small2area``)."""
    from importlib.resources import files

    path = files("ogpf") / "instances" / f"{name}.json"
    return str(path)
