import csv
import json

import numpy as np
import pytest

from circlift.energy import EnergyReport
from circlift.examples import vortex_field
from circlift.exceptions import ConfigError
from circlift.grid import ScalarField, make_domain
from circlift.solver import SweepRecord
from circlift.utils import (SWEEP_HEADER, RunManifest, read_field, read_json, write_field, write_json,
                            write_sweep_csv)


def test_angle_field_file(tmp_path, disk_33):
    u = vortex_field(disk_33)
    path = str(tmp_path / 'u.cfat')
    write_field(path, u)
    back = read_field(path)
    assert back.domain == disk_33
    assert np.array_equal(back.theta, u.theta)


def test_scalar_field_file(tmp_path):
    domain = make_domain("rect(2,1)", 21)
    X, Y = domain.node_coords()
    phi = ScalarField(domain, np.sin(X) * Y + 1.0 / 3.0)
    path = str(tmp_path / 'phi.cfat')
    write_field(path, phi)
    back = read_field(path, kind='scalar')
    assert back.domain.shape == domain.shape
    assert np.array_equal(back.values, phi.values)

    with open(path) as f:
        assert f.readline().split()[0] == 'CFAT1'


def test_bad_field_files(tmp_path):
    path = tmp_path / 'bad.cfat'
    path.write_text("CFAT9 3 3 0.5 square(1)\n0,0,0,\n0,0,0,\n0,0,0\n")
    with pytest.raises(ConfigError):
        read_field(str(path))

    path.write_text("CFAT1 3 3 0.5 square(1)\n0,0,0,\n0,0,0\n")
    with pytest.raises(ConfigError):
        read_field(str(path))

    path.write_text("CFAT1 3 3 0.25 square(1)\n0,0,0,\n0,0,0,\n0,0,0\n")
    with pytest.raises(ConfigError):
        read_field(str(path))

    with pytest.raises(ConfigError):
        read_field(str(tmp_path / 'missing.cfat'))


def test_json_is_stamped(tmp_path):
    path = str(tmp_path / 'x.json')
    write_json(path, {'a': 1})
    assert read_json(path) == {'a': 1, 'schema_version': 1}

    (tmp_path / 'broken.json').write_text("{")
    with pytest.raises(ConfigError):
        read_json(str(tmp_path / 'broken.json'))


def test_sweep_csv(tmp_path):
    report = EnergyReport(bulk=1.5, grad_v=0.25, well=0.25, total=2.0, eps=0.1)
    records = [SweepRecord(0.1, 4, report, True), SweepRecord(0.05, 30, report, False)]
    path = str(tmp_path / 'sweep.csv')
    write_sweep_csv(path, records)

    with open(path) as f:
        rows = list(csv.reader(f))
    assert rows[0] == SWEEP_HEADER
    assert rows[1][0] == '0.10000000000000001'
    assert rows[1][5] == '2'
    assert [r[-1] for r in rows[1:]] == ['true', 'false']


def test_run_manifest(tmp_path):
    manifest = RunManifest(command='lift', parameters={'input': 'u.cfat'}, inputs=['u.cfat'], seed=3)
    manifest.add_output('l.phi')
    manifest.add_output('l.phi')
    path = str(tmp_path / 'm.json')
    manifest.write(path)

    with open(path) as f:
        data = json.load(f)
    assert data['outputs'] == ['l.phi']
    assert data['seed'] == 3
    assert data['version'] == '0.1.0'
    assert data['schema_version'] == 1
