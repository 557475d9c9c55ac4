import logging

from argparse import ArgumentParser

from circlift.config import LoadConfig
from circlift.exceptions import (BudgetError, ConfigError, DomainViolationError, InconsistentCutsError,
                                 InvalidLiftingError, ParameterError, SolverError)
from circlift.logger import set_log_cfg
from circlift.utils import VERSION

__version__ = VERSION

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARAMETER = 2
EXIT_LIFTING = 3
EXIT_BUDGET = 4
EXIT_SOLVER = 5

EXAMPLE_NAMES = ('constant', 'vortex', 'perturbed-vortex', 'gsbv', 'dipole')


class UsageParser(ArgumentParser):
    """
    ArgumentParser that exits 1 on usage errors.
    """
    def error(self, message):
        self.print_usage()
        logging.getLogger('circlift').error(f"{self.prog}: error: {message}")
        raise SystemExit(EXIT_USAGE)


def _eps_list(text):
    try:
        return [float(e) for e in text.split(',') if e.strip()]
    except ValueError:
        raise ParameterError(f"invalid eps list {text}")


def parse_args(argv=None):
    """
    Function that parses the args passed on the command line.

    Args:
        argv (list): Arguments, sys.argv[1:] when None.

    Returns:
        opts (obj): Argparse object.
    """
    parser = UsageParser(prog='circlift', allow_abbrev=False, description="""Ambrosio-Tortorelli approximation of circle valued
                                                       maps, and their jump minimizing liftings.""")
    parser.add_argument("-c", "--config", help="Config file to read instead of the default.", action='store', type=str)
    parser.add_argument("-v", "--verbose", help="Add verbosity.", action='store_true')
    parser.add_argument("--version", action='version', version=f"circlift {VERSION}")

    sub = parser.add_subparsers(dest='command', parser_class=UsageParser)

    ex = sub.add_parser('example', help="Write an example field with a sidecar of analytic values.")
    ex.add_argument("--name", help="Example to build.", choices=EXAMPLE_NAMES, required=True)
    ex.add_argument("--grid", help="Grid resolution, nodes across the longest side.", type=int)
    ex.add_argument("--shape", help="Domain shape tag, disk(cx,cy,r), square(side) or rect(w,h).", type=str)
    ex.add_argument("--sigma", help="Cutoff of the perturbed vortex.", type=float, default=0.4)
    ex.add_argument("--angle", help="Angle of the constant example.", type=float, default=0.0)
    ex.add_argument("--nmax", help="Truncation level of the GSBV construction.", type=int, default=12)
    ex.add_argument("--p", help="Exponent of the GSBV gradient norm.", type=float, default=2.0)
    ex.add_argument("--strict", help="Fail when the grid can't resolve --nmax.", action='store_true')
    ex.add_argument("--out", help="Output field file.", type=str, required=True)

    for name, text in (('solve', "Warm started minimization over the eps schedule."),
                       ('sweep', "Independent minimization at every eps of the schedule.")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--input", help="Input angle field.", type=str, required=True)
        sp.add_argument("--regime", help="relaxed or constrained.", choices=('relaxed', 'constrained'),
                        default='relaxed')
        sp.add_argument("--eps", help="Comma separated, strictly decreasing eps schedule.", type=str, required=True)
        sp.add_argument("--su", help="Sidecar JSON listing the fractional jump edges of the input.", type=str)
        sp.add_argument("--out", help="Output prefix.", type=str, required=True)
        if name == 'sweep':
            sp.add_argument("--jobs", help="Worker threads.", type=int, default=1)

    lf = sub.add_parser('lift', help="Jump minimizing lifting of an angle field.")
    lf.add_argument("--input", help="Input angle field.", type=str, required=True)
    lf.add_argument("--su", help="Sidecar JSON listing the fractional jump edges of the input.", type=str)
    lf.add_argument("--bounded", help="Build the bounded lifting instead.", action='store_true')
    lf.add_argument("--out", help="Output prefix.", type=str, required=True)

    cn = sub.add_parser('connect', help="Minimal connection of a charge configuration.")
    cn.add_argument("--charges", help="JSON with positives and negatives point lists.", type=str, required=True)
    cn.add_argument("--shape", help="Domain shape tag.", type=str)
    cn.add_argument("--steiner", help="Connect one positive point to every negative with a Steiner tree.",
                    action='store_true')
    cn.add_argument("--out", help="Output JSON.", type=str, required=True)

    en = sub.add_parser('energy', help="Evaluate the energies of a (u, v) pair.")
    en.add_argument("--u", help="Angle field, or lifting with --lifted.", type=str, required=True)
    en.add_argument("--v", help="Phase field.", type=str, required=True)
    en.add_argument("--eps", help="Phase field width.", type=float, required=True)
    en.add_argument("--lifted", help="Read --u as a real valued lifting.", action='store_true')
    en.add_argument("--out", help="Output JSON.", type=str, required=True)

    opts = parser.parse_args(argv)

    if not opts.command:
        parser.print_help()
        raise SystemExit(EXIT_USAGE)

    if opts.command == 'sweep' and opts.jobs < 1:
        parser.error("--jobs has to be at least 1.")

    if opts.command == 'lift' and opts.bounded and opts.su:
        parser.error("--su can't be specified with --bounded.")

    return opts


def main(argv=None):
    """
    Main function, returns the exit code.
    """
    from circlift import cli

    try:
        opts = parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    except ParameterError as e:
        logging.getLogger('circlift').error(str(e))
        return EXIT_PARAMETER

    try:
        cfg = LoadConfig(opts.config)
    except ConfigError as e:
        logging.getLogger('circlift').error(str(e))
        return EXIT_PARAMETER

    log = set_log_cfg(opts, cfg)
    log.debug(f"circlift: main: cfg: {dict(cfg.__dict__)}")

    commands = {
        'example': cli.cmd_example,
        'solve': cli.cmd_solve,
        'sweep': cli.cmd_sweep,
        'lift': cli.cmd_lift,
        'connect': cli.cmd_connect,
        'energy': cli.cmd_energy,
    }

    try:
        if opts.command in ('solve', 'sweep'):
            opts.eps = _eps_list(opts.eps)
        commands[opts.command](opts, cfg)
    except InconsistentCutsError as e:
        log.error(f"{e}, offending edge: {e.edge}")
        return EXIT_LIFTING
    except InvalidLiftingError as e:
        log.error(str(e))
        return EXIT_LIFTING
    except BudgetError as e:
        log.error(str(e))
        return EXIT_BUDGET
    except SolverError as e:
        log.error(f"{e}, residual: {e.residual}")
        return EXIT_SOLVER
    except (ParameterError, ConfigError, DomainViolationError) as e:
        log.error(str(e))
        return EXIT_PARAMETER

    return EXIT_OK
