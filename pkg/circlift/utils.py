import csv
import json
import logging

from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from circlift.exceptions import ConfigError
from circlift.grid import AngleField, GridDomain, ScalarField, ShapeTag, make_domain

VERSION = "0.1.0"
SCHEMA_VERSION = 1
FIELD_MAGIC = "CFAT1"
SWEEP_HEADER = ['eps', 'iters', 'bulk', 'grad_v', 'well', 'total', 'converged']

logger = logging.getLogger('circlift')


def write_field(path, fld):
    """
    Write a field in the CFAT1 text format: one header line, then the nodal values
    row by row with 17 significant digits and nan for inactive nodes.

    Args:
        path (str): Output file path.
        fld (obj): AngleField or ScalarField.
    """
    domain = fld.domain
    vals = fld.theta if isinstance(fld, AngleField) else fld.values
    vals = np.where(domain.mask, vals, np.nan)

    with open(path, 'w') as f:
        f.write(f"{FIELD_MAGIC} {domain.nx} {domain.ny} {'%.17g' % domain.h} {domain.shape_tag}\n")
        f.write(",\n".join(",".join('%.17g' % x for x in row) for row in vals))
        f.write("\n")

    logger.debug(f"utils: write_field: path: {path} nx: {domain.nx} ny: {domain.ny}")


def read_field(path, kind='angle'):
    """
    Read a CFAT1 field file back, the active mask is recovered from the nan entries.

    Args:
        path (str): Input file path.
        kind (str): angle for an AngleField, scalar for a ScalarField.

    Returns:
        (obj): AngleField or ScalarField.
    """
    try:
        with open(path, 'r') as f:
            header = f.readline().split()
            body = f.read()
    except OSError as e:
        logger.error(f"Failed to read the field file {path}: {e}")
        raise ConfigError(f"can't read {path}: {e}")

    if len(header) != 5 or header[0] != FIELD_MAGIC:
        logger.error(f"The file {path} isn't a {FIELD_MAGIC} field file.")
        raise ConfigError(f"bad field header in {path}")

    try:
        nx, ny, h = int(header[1]), int(header[2]), float(header[3])
        vals = np.array([float(x) for x in body.replace("\n", "").split(",") if x.strip()])
    except ValueError as e:
        raise ConfigError(f"malformed field file {path}: {e}")

    if vals.size != nx * ny:
        raise ConfigError(f"field file {path} has {vals.size} values, expected {nx * ny}")

    tag = ShapeTag.parse(header[4])
    lattice = make_domain(tag, nx if tag.kind == 'disk' else max(nx, ny))
    if lattice.shape != (ny, nx) or not np.isclose(lattice.h, h, rtol=1e-12, atol=0.0):
        logger.error(f"The header of {path} doesn't describe a lattice of {tag}.")
        raise ConfigError(f"field file {path} doesn't match its shape tag")

    vals = vals.reshape(ny, nx)
    mask = ~np.isnan(vals)
    domain = GridDomain(nx, ny, lattice.h, mask, tag, (lattice.x0, lattice.y0))
    vals = np.where(mask, vals, 0.0)

    if kind == 'angle':
        return AngleField(domain, vals)
    return ScalarField(domain, vals)


def write_json(path, data):
    """
    Dump a dict as JSON, stamped with the schema version.
    """
    data = dict(data)
    data.setdefault('schema_version', SCHEMA_VERSION)
    with open(path, 'w') as f:
        json.dump(data, f, indent=4)
    logger.debug(f"utils: write_json: path: {path}\n{json.dumps(data, indent=4)}")


def read_json(path):
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except (OSError, ValueError) as e:
        logger.error(f"Failed to load the json file {path}: {e}")
        raise ConfigError(f"can't load {path}: {e}")


def write_sweep_csv(path, records):
    """
    Write sweep records, one row per eps in the order given.

    Args:
        path (str): Output CSV path.
        records (list): SweepRecord objects.
    """
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(SWEEP_HEADER)
        for rec in records:
            r = rec.report
            writer.writerow(['%.17g' % rec.eps, rec.iters, '%.17g' % r.bulk, '%.17g' % r.grad_v,
                             '%.17g' % r.well, '%.17g' % r.total, str(rec.converged).lower()])


@dataclass
class RunManifest:
    """
    Everything needed to reproduce one command run.
    """
    command: str
    parameters: dict
    inputs: list = dc_field(default_factory=list)
    outputs: list = dc_field(default_factory=list)
    wall_time: float = 0.0
    version: str = VERSION
    seed: int = 0

    def add_output(self, path):
        if path not in self.outputs:
            self.outputs.append(path)

    def to_dict(self):
        data = asdict(self)
        data['schema_version'] = SCHEMA_VERSION
        return data

    def write(self, path):
        write_json(path, self.to_dict())
