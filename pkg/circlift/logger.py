import logging
import sys


def set_log_cfg(opts, cfg):
    """
    Set the logging configuration.

    Args:
        opts (obj): Argparse object.
        cfg (obj): Config file variables.

    Returns:
        logger (obj): Logging object.
    """
    # Create the main logger.
    logger = logging.getLogger('circlift')

    # Drop handlers from a previous call, main() can run more than once in a process.
    for handler in list(logger.handlers):
        logger.removeHandler(handler)

    log_con = logging.StreamHandler(sys.stderr)

    # Set the format.
    if opts.verbose:
        con_format = logging.Formatter('%(asctime)s - %(levelname)s: %(message)s')
    else:
        con_format = logging.Formatter('%(message)s')

    log_con.setFormatter(con_format)

    log_file = None
    if cfg.log_file:
        log_file = logging.FileHandler(cfg.log_file, mode='a')
        log_file.setFormatter(logging.Formatter('%(asctime)s - CIRCLIFT - %(levelname)s: %(message)s'))

    # Set the log level based on cfg file and arguments.
    if cfg.log_verbosity == "debug" or opts.verbose:
        logger.setLevel(logging.DEBUG)
        log_con.setLevel(logging.DEBUG if opts.verbose else logging.INFO)
        if log_file:
            log_file.setLevel(logging.DEBUG)
    else:
        logger.setLevel(logging.INFO)
        log_con.setLevel(logging.INFO)
        if log_file:
            log_file.setLevel(logging.INFO)

    logger.addHandler(log_con)
    if log_file:
        logger.addHandler(log_file)

    return logger
