import logging

from configparser import BasicInterpolation, ConfigParser, Error as ParserError
from os import environ
from os.path import exists, expanduser, expandvars

from circlift.exceptions import ConfigError

DEFAULT_CFG_PATH = "~/.config/circlift/circlift.conf"


class EnvironmentExpansion(BasicInterpolation):
    """
    Override interpolation to expand environment variables in config parser.
    """
    def before_get(self, parser, section, option, value, defaults):
        value = super().before_get(parser, section, option, value, defaults)
        return expandvars(value)


def cfg_path(path=None):
    """
    Work out which config file to read.

    Args:
        path (str): Path passed on the command line, if any.

    Returns:
        (str): Expanded path of the config file, it may not exist.
    """
    if path:
        return expanduser(path)
    return expanduser(environ.get('CIRCLIFT_CONFIG', DEFAULT_CFG_PATH))


class LoadConfig(object):
    def __init__(self, path=None):
        """
        Load and parse the config file into a class. A missing file leaves every option at its default.

        Args:
            path (str): Optional config file path, overrides $CIRCLIFT_CONFIG.
        """
        logger = logging.getLogger('circlift')

        self.path = cfg_path(path)
        cfg = ConfigParser(interpolation=EnvironmentExpansion())

        if path and not exists(self.path):
            logger.error(f"The config file {self.path} doesn't exist.")
            raise ConfigError(f"missing config file {self.path}")

        try:
            cfg.read(self.path)
            for section in ('App', 'Solver', 'Lifting', 'Transport'):
                if not cfg.has_section(section):
                    cfg.add_section(section)

            self.log_verbosity = cfg['App'].get('log_verbosity', 'info')
            self.log_file = cfg['App'].get('log_file', '')

            if self.log_verbosity not in ('info', 'debug'):
                logger.error("The log_verbosity set isn't supported, please set to either info or debug.")
                raise ConfigError(f"unsupported log_verbosity {self.log_verbosity}")

            self.max_outer_iters = int(cfg['Solver'].get('max_outer_iters', "50"))
            self.energy_tol = float(cfg['Solver'].get('energy_tol', "1e-6"))
            self.cg_tol = float(cfg['Solver'].get('cg_tol', "1e-8"))
            self.cg_max_iters = int(cfg['Solver'].get('cg_max_iters', "20000"))
            self.u_sweeps = int(cfg['Solver'].get('u_sweeps', "10"))
            self.pin_boundary = cfg['Solver'].getboolean('pin_boundary', True)
            self.shared_start = cfg['Solver'].getboolean('shared_start', True)

            self.residual_tol = float(cfg['Lifting'].get('residual_tol', "1e-9"))
            self.integer_tol = float(cfg['Lifting'].get('integer_tol', "1e-6"))
            self.bounded_levels = int(cfg['Lifting'].get('bounded_levels', "64"))

            self.max_charges = int(cfg['Transport'].get('max_charges', "8"))
            self.max_terminals = int(cfg['Transport'].get('max_terminals', "5"))
            self.steiner_tol = float(cfg['Transport'].get('steiner_tol', "1e-8"))
            self.steiner_restarts = int(cfg['Transport'].get('steiner_restarts', "3"))
            self.seed = int(cfg['Transport'].get('seed', "0"))
        except (ValueError, ParserError) as e:
            logger.error(f"Parsing the cfg file {self.path} failed: {e}")
            raise ConfigError(str(e))

        for name in ('energy_tol', 'cg_tol', 'steiner_tol'):
            if getattr(self, name) <= 0:
                logger.error(f"The {name} option has to be positive.")
                raise ConfigError(f"{name} must be positive")
