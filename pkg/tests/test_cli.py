import csv
import json

import pytest

from circlift import EXIT_BUDGET, EXIT_OK, EXIT_PARAMETER, EXIT_USAGE, main
from circlift.utils import read_field


@pytest.fixture(autouse=True)
def _no_user_config(tmp_path, monkeypatch):
    monkeypatch.setenv('CIRCLIFT_CONFIG', str(tmp_path / 'missing.conf'))


def load(path):
    with open(path) as f:
        return json.load(f)


def write_charges(path, positives, negatives):
    with open(path, 'w') as f:
        json.dump({'positives': positives, 'negatives': negatives}, f)
    return str(path)


def test_usage_errors(tmp_path):
    assert main([]) == EXIT_USAGE
    assert main(['solve', '--input', 'x']) == EXIT_USAGE
    assert main(['example', '--name', 'spiral', '--out', str(tmp_path / 'f')]) == EXIT_USAGE
    assert main(['sweep', '--input', 'x', '--eps', '0.1', '--out', 'o', '--jobs', '0']) == EXIT_USAGE


def test_version():
    assert main(['--version']) == EXIT_OK


def test_missing_config_file(tmp_path):
    out = str(tmp_path / 'c.json')
    charges = write_charges(tmp_path / 'q.json', [], [])
    assert main(['-c', str(tmp_path / 'nope.conf'), 'connect', '--charges', charges, '--out', out]) == EXIT_PARAMETER


def test_example_perturbed_vortex(tmp_path):
    out = str(tmp_path / 'pv')
    assert main(['example', '--name', 'perturbed-vortex', '--sigma', '0.4', '--grid', '129', '--out', out]) == EXIT_OK

    side = load(f"{out}.json")
    assert side['m2_expected'] == pytest.approx(0.9)
    assert side['su_length'] == pytest.approx(0.2, abs=2.0 / 64.0)
    assert side['shape'] == 'disk(0,0,1)'
    assert [c['q'] for c in side['charges']] == [1]

    manifest = load(f"{out}.manifest.json")
    assert manifest['command'] == 'example'
    assert out in manifest['outputs']
    assert manifest['version'] == '0.1.0'
    assert read_field(out).domain.nx == 129


def test_example_parameter_errors(tmp_path):
    out = str(tmp_path / 'pv')
    assert main(['example', '--name', 'perturbed-vortex', '--sigma', '0.4', '--grid', '33', '--out', out]) \
        == EXIT_PARAMETER
    assert main(['example', '--name', 'perturbed-vortex', '--sigma', '1.5', '--out', out]) == EXIT_PARAMETER
    assert main(['example', '--name', 'gsbv', '--grid', '257', '--nmax', '12', '--strict', '--out', out]) \
        == EXIT_PARAMETER


def test_example_gsbv(tmp_path):
    out = str(tmp_path / 'g')
    assert main(['example', '--name', 'gsbv', '--grid', '257', '--nmax', '8', '--out', out]) == EXIT_OK
    side = load(f"{out}.json")
    assert side['N_max'] == 8
    assert side['grid_jump_length'] > 0.0


def test_solve_rejects_bad_schedule(tmp_path):
    field = str(tmp_path / 'c')
    assert main(['example', '--name', 'constant', '--grid', '33', '--out', field]) == EXIT_OK
    for eps in ('0.05,0.1', '0.1,0.1', '0.1,abc', '2.0'):
        assert main(['solve', '--input', field, '--eps', eps, '--out', str(tmp_path / 's')]) == EXIT_PARAMETER


def test_solve_constant_and_energy(tmp_path):
    field = str(tmp_path / 'c')
    out = str(tmp_path / 's')
    assert main(['example', '--name', 'constant', '--angle', '1.0', '--grid', '33', '--out', field]) == EXIT_OK
    assert main(['solve', '--input', field, '--eps', '0.2,0.1', '--out', out]) == EXIT_OK

    with open(f"{out}.csv") as f:
        rows = list(csv.DictReader(f))
    assert [float(r['eps']) for r in rows] == [0.2, 0.1]
    assert all(float(r['total']) == pytest.approx(0.0, abs=1e-12) for r in rows)
    assert load(f"{out}.json")['report']['total'] == pytest.approx(0.0, abs=1e-12)

    energy = str(tmp_path / 'e.json')
    assert main(['energy', '--u', f"{out}.u", '--v', f"{out}.v", '--eps', '0.1', '--out', energy]) == EXIT_OK
    assert load(energy)['total'] == pytest.approx(0.0, abs=1e-12)
    assert load(energy)['mm'] == pytest.approx(0.0, abs=1e-12)


def test_sweep_with_workers(tmp_path):
    field = str(tmp_path / 'c')
    out = str(tmp_path / 'w')
    assert main(['example', '--name', 'constant', '--grid', '33', '--out', field]) == EXIT_OK
    assert main(['sweep', '--input', field, '--eps', '0.2,0.1,0.05', '--jobs', '2', '--out', out]) == EXIT_OK
    with open(f"{out}.csv") as f:
        rows = list(csv.DictReader(f))
    assert [float(r['eps']) for r in rows] == [0.2, 0.1, 0.05]
    assert all(r['converged'] == 'true' for r in rows)


def test_lift_vortex(tmp_path):
    field = str(tmp_path / 'v')
    out = str(tmp_path / 'l')
    assert main(['example', '--name', 'vortex', '--grid', '65', '--out', field]) == EXIT_OK
    assert main(['lift', '--input', field, '--out', out]) == EXIT_OK

    data = load(f"{out}.json")
    assert data['jump_length'] == pytest.approx(1.0, abs=2.0 / 32.0)
    assert data['su_length'] == 0.0
    assert data['max_residual'] < 1e-9
    assert data['connection']['total_length'] == pytest.approx(1.0, abs=1.0 / 32.0)


def test_lift_perturbed_vortex_with_sidecar(tmp_path):
    field = str(tmp_path / 'pv')
    out = str(tmp_path / 'l')
    assert main(['example', '--name', 'perturbed-vortex', '--grid', '129', '--out', field]) == EXIT_OK
    assert main(['lift', '--input', field, '--su', f"{field}.json", '--out', out]) == EXIT_OK

    data = load(f"{out}.json")
    assert data['jump_length'] == pytest.approx(0.9, abs=3.0 / 64.0)
    assert data['su_length'] == pytest.approx(0.2, abs=2.0 / 64.0)


def test_lift_bounded(tmp_path):
    field = str(tmp_path / 'v')
    out = str(tmp_path / 'b')
    assert main(['example', '--name', 'vortex', '--grid', '65', '--out', field]) == EXIT_OK
    assert main(['lift', '--input', field, '--bounded', '--out', out]) == EXIT_OK
    assert load(f"{out}.json")['bv_check']['passed']
    assert main(['lift', '--input', field, '--bounded', '--su', 'x.json', '--out', out]) == EXIT_USAGE


def test_connect(tmp_path):
    out = str(tmp_path / 'c.json')

    charges = write_charges(tmp_path / 'dipole.json', [[0.3, 0.0]], [[-0.3, 0.0]])
    assert main(['connect', '--charges', charges, '--out', out]) == EXIT_OK
    data = load(out)
    assert data['total_length'] == pytest.approx(0.6)
    assert data['boundary_ok']

    charges = write_charges(tmp_path / 'single.json', [[0.5, 0.0]], [])
    assert main(['connect', '--charges', charges, '--out', out]) == EXIT_OK
    assert load(out)['total_length'] == pytest.approx(0.5)

    charges = write_charges(tmp_path / 'empty.json', [], [])
    assert main(['connect', '--charges', charges, '--out', out]) == EXIT_OK
    assert load(out)['total_length'] == 0.0
    assert load(f"{out}.manifest.json")['command'] == 'connect'


def test_connect_steiner(tmp_path):
    out = str(tmp_path / 's.json')
    star = [[0.1, 0.0], [-0.05, 0.0866025403784], [-0.05, -0.0866025403784]]
    charges = write_charges(tmp_path / 'star.json', [[0.0, 0.0]], star)
    assert main(['connect', '--charges', charges, '--steiner', '--out', out]) == EXIT_OK
    assert load(out)['total_length'] == pytest.approx(0.3, rel=1e-6)


def test_connect_budget(tmp_path):
    out = str(tmp_path / 'c.json')
    pts = [[0.1 * k - 0.45, 0.0] for k in range(9)]
    charges = write_charges(tmp_path / 'many.json', pts[:5], pts[5:])
    assert main(['connect', '--charges', charges, '--out', out]) == EXIT_BUDGET


def test_connect_charge_outside(tmp_path):
    charges = write_charges(tmp_path / 'out.json', [[2.0, 0.0]], [])
    assert main(['connect', '--charges', charges, '--out', str(tmp_path / 'c.json')]) == EXIT_PARAMETER


def final_total(path):
    with open(path) as f:
        return float(list(csv.DictReader(f))[-1]['total'])


@pytest.mark.slow
def test_solve_both_regimes_on_the_perturbed_vortex(tmp_path):
    field = str(tmp_path / 'pv')
    assert main(['example', '--name', 'perturbed-vortex', '--sigma', '0.4', '--grid', '257', '--out', field]) == EXIT_OK

    totals = {}
    for regime in ('relaxed', 'constrained'):
        out = str(tmp_path / regime)
        assert main(['solve', '--input', field, '--su', f"{field}.json", '--regime', regime, '--eps', '0.1,0.05',
                     '--out', out]) == EXIT_OK
        totals[regime] = final_total(f"{out}.csv")

    assert 0.05 < totals['constrained'] - totals['relaxed'] < 0.84
