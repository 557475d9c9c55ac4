import logging

from concurrent.futures import ThreadPoolExecutor
from time import perf_counter

from circlift.energy import at_energy, mm_energy, ms_lift_value
from circlift.examples import (constant_field, dipole_field, gsbv_example, m2_expected, perturbed_vortex,
                               vortex_field)
from circlift.exceptions import ParameterError
from circlift.grid import EdgeSet, ShapeTag, make_domain
from circlift.lifting import (bounded_lifting, classify_jumps, davila_ignat_check, detect_vortices,
                              jump_min_lifting)
from circlift.solver import Regime, SolveConfig, solve_at
from circlift.transport import ChargeConfig, charge_steiner, minimal_connection, verify_boundary
from circlift.utils import RunManifest, read_field, read_json, write_field, write_json, write_sweep_csv

logger = logging.getLogger('circlift')

DISK = "disk(0,0,1)"
UNIT_SQUARE = "square(1)"


def _manifest(opts, cfg, command, inputs=()):
    params = {k: v for k, v in vars(opts).items() if k not in ('func', 'command')}
    return RunManifest(command=command, parameters=params, inputs=[p for p in inputs if p], seed=cfg.seed)


def _finish(manifest, out, start):
    manifest.wall_time = perf_counter() - start
    path = f"{out}.manifest.json"
    manifest.write(path)
    logger.debug(f"cli: _finish: manifest: {path} outputs: {manifest.outputs}")
    return manifest


def _load_su(path, domain):
    """
    Declared fractional jump edges from a sidecar JSON, the su_edges list of (axis, j, i).
    """
    if not path:
        return None
    data = read_json(path)
    if 'su_edges' not in data:
        raise ParameterError(f"{path} has no su_edges entry")
    return EdgeSet.from_edges(domain, [tuple(e) for e in data['su_edges']])


def cmd_example(opts, cfg):
    """
    Write an example field and its JSON sidecar of analytic values.
    """
    start = perf_counter()
    manifest = _manifest(opts, cfg, 'example')
    sidecar = {'name': opts.name}

    if opts.name == 'gsbv':
        domain = make_domain(opts.shape or UNIT_SQUARE, opts.grid or 513)
        fld, summary = gsbv_example(domain, opts.nmax, p=opts.p, strict=opts.strict)
        sidecar.update(summary.to_dict())
        logger.info(f"GSBV construction to N_max {opts.nmax}: jump variation {summary.partial_jump_variation:.6g}, "
                    f"jump length {summary.partial_jump_length:.6g}")
    else:
        domain = make_domain(opts.shape or DISK, opts.grid or 129)
        if opts.name == 'vortex':
            fld = vortex_field(domain)
        elif opts.name == 'perturbed-vortex':
            fld, _, su = perturbed_vortex(domain, opts.sigma)
            sidecar.update({'sigma': opts.sigma, 'm2_expected': m2_expected(opts.sigma), 'su_edges': su.to_list(),
                            'su_length': su.length()})
        elif opts.name == 'dipole':
            fld = dipole_field(domain)
        else:
            fld = constant_field(domain, opts.angle)
        sidecar['charges'] = detect_vortices(fld).to_dict()['charges']

    sidecar['shape'] = str(domain.shape_tag)
    sidecar['grid'] = [domain.nx, domain.ny]
    sidecar['h'] = domain.h

    write_field(opts.out, fld)
    write_json(f"{opts.out}.json", sidecar)
    manifest.add_output(opts.out)
    manifest.add_output(f"{opts.out}.json")
    logger.info(f"Wrote the {opts.name} example to {opts.out}")
    return _finish(manifest, opts.out, start)


def _write_state(out, state, manifest):
    write_field(f"{out}.u", state.u)
    write_field(f"{out}.v", state.v)
    manifest.add_output(f"{out}.u")
    manifest.add_output(f"{out}.v")
    if state.phi is not None:
        write_field(f"{out}.phi", state.phi)
        manifest.add_output(f"{out}.phi")


def cmd_solve(opts, cfg):
    """
    Warm started run over the eps schedule, one CSV row per eps plus the final fields.
    """
    start = perf_counter()
    manifest = _manifest(opts, cfg, 'solve', [opts.input, opts.su])
    scfg = SolveConfig.from_cfg(cfg, opts.eps)
    regime = Regime.parse(opts.regime)

    u0 = read_field(opts.input)
    declared = _load_su(opts.su, u0.domain)
    state, records = solve_at(u0, regime, scfg, declared_su=declared)

    write_sweep_csv(f"{opts.out}.csv", records)
    manifest.add_output(f"{opts.out}.csv")
    _write_state(opts.out, state, manifest)
    write_json(f"{opts.out}.json", {'regime': regime.value, 'eps': state.eps, 'report': state.report.to_dict()})
    manifest.add_output(f"{opts.out}.json")
    return _finish(manifest, opts.out, start)


def cmd_sweep(opts, cfg):
    """
    Solve every eps of the schedule independently from the same input.
    """
    start = perf_counter()
    manifest = _manifest(opts, cfg, 'sweep', [opts.input, opts.su])
    schedule = SolveConfig.from_cfg(cfg, opts.eps).eps_schedule
    regime = Regime.parse(opts.regime)

    u0 = read_field(opts.input)
    declared = _load_su(opts.su, u0.domain)

    def run(eps):
        _, records = solve_at(u0, regime, SolveConfig.from_cfg(cfg, [eps]), declared_su=declared)
        return records[0]

    if opts.jobs > 1:
        with ThreadPoolExecutor(max_workers=opts.jobs) as pool:
            records = list(pool.map(run, schedule))
    else:
        records = [run(eps) for eps in schedule]

    write_sweep_csv(f"{opts.out}.csv", records)
    manifest.add_output(f"{opts.out}.csv")
    return _finish(manifest, opts.out, start)


def cmd_lift(opts, cfg):
    """
    Jump minimizing lifting of an angle field, or with --bounded the bounded lifting and
    its BV ratio check.
    """
    start = perf_counter()
    manifest = _manifest(opts, cfg, 'lift', [opts.input, opts.su])

    u = read_field(opts.input)
    if opts.bounded:
        result = bounded_lifting(u, levels=cfg.bounded_levels, residual_tol=cfg.residual_tol)
        report = davila_ignat_check(u, result.phi, residual_tol=cfg.residual_tol)
        data = dict(result.to_dict(), bv_check=report.to_dict())
    else:
        declared = _load_su(opts.su, u.domain)
        result = jump_min_lifting(u, declared_su=declared, max_charges=cfg.max_charges,
                                  residual_tol=cfg.residual_tol)
        frac, integer = classify_jumps(result, u, integer_tol=cfg.integer_tol)
        data = dict(result.to_dict(),
                    su_length=frac.length(),
                    si_length=integer.length(),
                    ms_value=ms_lift_value(u, result, residual_tol=cfg.residual_tol),
                    connection=result.connection.to_dict())

    logger.info(f"Lifting of {opts.input}: jump length {result.jump_length:.6g}, residual {result.max_residual:.3g}")
    write_field(f"{opts.out}.phi", result.phi)
    write_json(f"{opts.out}.json", data)
    manifest.add_output(f"{opts.out}.phi")
    manifest.add_output(f"{opts.out}.json")
    return _finish(manifest, opts.out, start)


def cmd_connect(opts, cfg):
    """
    Minimal connection of a charge configuration, checked against its boundary.
    """
    start = perf_counter()
    manifest = _manifest(opts, cfg, 'connect', [opts.charges])

    shape = ShapeTag.parse(opts.shape or DISK)
    charges = ChargeConfig.from_dict(read_json(opts.charges), shape)
    if opts.steiner:
        conn = charge_steiner(charges, max_terminals=cfg.max_terminals, tol=cfg.steiner_tol,
                              restarts=cfg.steiner_restarts, seed=cfg.seed, max_charges=cfg.max_charges)
    else:
        conn = minimal_connection(charges, max_charges=cfg.max_charges)

    check = verify_boundary(conn, charges)
    if not check:
        logger.warning(f"The connection boundary doesn't balance at {check.discrepancies}")

    data = dict(conn.to_dict(), boundary_ok=check.ok,
                discrepancies=[{'point': list(p), 'weight': w} for p, w in check.discrepancies])
    logger.info(f"Connected {len(charges)} charges with total length {conn.total_length:.6g}")
    write_json(opts.out, data)
    manifest.add_output(opts.out)
    return _finish(manifest, opts.out, start)


def cmd_energy(opts, cfg):
    """
    Evaluate the discrete energies of a (u, v) pair read from files.
    """
    start = perf_counter()
    manifest = _manifest(opts, cfg, 'energy', [opts.u, opts.v])

    u = read_field(opts.u, kind='scalar' if opts.lifted else 'angle')
    v = read_field(opts.v, kind='scalar')
    report = at_energy(u, v, opts.eps)
    data = dict(report.to_dict(), mm=mm_energy(v, opts.eps))

    logger.info(f"AT energy at eps {opts.eps:g}: bulk {report.bulk:.6g}, surface {report.surface:.6g}")
    write_json(opts.out, data)
    manifest.add_output(opts.out)
    return _finish(manifest, opts.out, start)
