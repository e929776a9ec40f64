"""
Pipeline engine: one method per CLI subcommand.
Every stage computes through the packages and hands its tables and reports
to the ArtifactWriter; nothing here does numerics of its own.
"""
from typing import Callable, Dict, Optional

import numpy as np
import pandas as pd

from config import settings
from config.run_config import RunConfig
from data.field_io import ArtifactWriter
from geometry.charts import chart_from_spec, constant_coefficients
from geometry.domains import builtin_domain
from geometry.fermi import FermiMap, boundary_table, geometry_report
from layer_builder.assembly import ApproxSolution, assemble_u4
from layer_builder.params import build_params
from profile_1d.profile import ProfileParams, ProfileTable, build_profile, decay_report, invariant_summary
from residual.norms import WeightedNorm
from residual.scaling import gluing_defect, lipschitz_quotients, scaling_scan
from resonance.selection import (
    certificate_frame, count_scaling, gap_report, monotonicity_check, rho_list_for_levels,
    select_levels, verify_certificate,
)
from strip_linear.strip_solver import StripSolver, strip_battery
from surface_spectrum.bessel import robin_disk_eigenvalues, smallest_magnitude
from surface_spectrum.robin_operator import PolarGrid
from surface_spectrum.solvers import (
    MIN_WEYL_COUNT, full_spectrum, nondegeneracy_check, rho_spectrum, solve_e_equation, weyl_fit,
)
from utils.logger import LoggerContextManager, get_logger
from utils.validators import DegenerateChartError, ResonanceError, ValidationError

logger = get_logger(__name__)


class PipelineEngine:
    """
    Runs the subcommands of one validated RunConfig.

    Stages share the profile and the layer build, so `pipeline` computes
    each of them once.
    """

    def __init__(self, config: RunConfig, writer: Optional[ArtifactWriter] = None):
        self.config = config.validate()
        self.chart = chart_from_spec(config.chart)
        self.writer = writer or ArtifactWriter(config.output_dir, config.config_hash(), config.format_version)
        self._profile: Optional[ProfileTable] = None
        self._solution: Optional[ApproxSolution] = None
        logger.info(f"PipelineEngine initialized for {self.chart.name} (config {config.config_hash()})")

    # ------------------------------------------------------------------
    # Shared state
    # ------------------------------------------------------------------
    @property
    def grid(self) -> PolarGrid:
        return PolarGrid(self.config.n_r, self.config.n_theta)

    @property
    def layer_grid(self) -> PolarGrid:
        return PolarGrid(self.config.layer_n_r, self.config.layer_n_theta)

    @property
    def lambda0(self) -> float:
        return self.config.effective_lambda0()

    def profile(self) -> ProfileTable:
        if self._profile is None:
            self._profile = build_profile(ProfileParams(self.config.p, self.config.L, self.config.n))
        return self._profile

    def solution(self) -> ApproxSolution:
        if self._solution is None:
            cfg = self.config
            mode = 'file' if (cfg.f2_file or cfg.e_file) else cfg.params
            params = build_params(self.profile(), self.chart, self.layer_grid, mode, cfg.f2_file, cfg.e_file)
            self._solution = assemble_u4(self.profile(), self.chart, params, cfg.eps, cfg.sigma)
        return self._solution

    # ------------------------------------------------------------------
    # Subcommands
    # ------------------------------------------------------------------
    def run_profile(self) -> Dict:
        table = self.profile()
        frame = {
            'x': table.x, 'w': table.w, 'w_x': table.w_x, 'w_xx': table.w_xx,
            'Z': table.Z, 'Z_x': table.Z_x, 'Z_xx': table.Z_xx,
        }
        self.writer.write_csv('profile.csv', pd.DataFrame(frame))
        report = {
            'p': table.p,
            'lambda0': table.lambda0,
            'lambda0_grid': table.lambda0_grid,
            'lambda0_discrete': table.lambda0_discrete,
            'moments': dict(table.moments),
            'moment_errors': dict(table.moment_errors),
            'decay': decay_report(table),
            'invariants': invariant_summary(table),
        }
        self.writer.write_json('profile.json', report)
        return report

    def run_geometry_check(self) -> Dict:
        checker = geometry_report(FermiMap(self.chart), builtin_domain(self.chart.name), self.config.samples)
        self.writer.write_text('geometry_report.txt', checker.generate_report())
        self.writer.write_csv('boundary_coeffs.csv', boundary_table(self.chart, self.config.samples))
        report = checker.results()
        self.writer.write_json('geometry.json', report)
        if not checker.all_passed:
            logger.warning(f"Geometry check on {self.chart.name}: {report['failed']} check(s) failed")
        return report

    def run_nondegeneracy(self) -> Dict:
        result = nondegeneracy_check(self.chart, self.config.tol, self.grid)
        report = result.to_dict()
        coeffs = constant_coefficients(self.chart)
        if coeffs is not None:
            hslash, I = coeffs
            rho, m = smallest_magnitude(hslash * I, hslash)
            report['bessel_min_abs'] = abs(rho)
            report['bessel_mode'] = m
            report['bessel_abs_error'] = abs(result.min_abs_eigenvalue - abs(rho))
            if abs(rho) > 0:
                report['bessel_rel_error'] = report['bessel_abs_error'] / abs(rho)
        self.writer.write_json('nondegeneracy.json', report)
        return report

    def run_spectrum(self) -> Dict:
        cfg = self.config
        spectrum = rho_spectrum(self.chart, cfg.count, cfg.robin_weight, self.grid)
        frame = spectrum.to_frame()
        report = {'count': len(spectrum), 'robin_weight': cfg.robin_weight,
                  'rho_first': float(spectrum.eigenvalues[0]), 'rho_last': float(spectrum.eigenvalues[-1])}
        coeffs = constant_coefficients(self.chart)
        if coeffs is not None:
            hslash, I = coeffs
            oracle = robin_disk_eigenvalues(hslash * cfg.robin_weight * I, cfg.count, hslash)
            frame['rho_bessel'] = oracle
            scale = np.maximum(np.abs(oracle), 1.0)
            report['bessel_max_rel_error'] = float(np.max(np.abs(spectrum.eigenvalues - oracle) / scale))
        if cfg.count >= MIN_WEYL_COUNT:
            report['weyl'] = weyl_fit(spectrum, self.chart.area, self.chart.perimeter()).to_dict()
        self.writer.write_csv('spectrum.csv', frame)
        self.writer.write_json('spectrum.json', report)
        return report

    def run_resonance(self) -> Dict:
        cfg = self.config
        lambda0 = self.lambda0
        rhos = rho_list_for_levels(self.chart, lambda0, cfg.levels)
        certs = select_levels(rhos, lambda0, cfg.levels, settings.THREADS)
        eps_values = [c.eps for c in certs]
        eps_grid = np.linspace(2.0 ** (-cfg.levels[1] - 1), 2.0 ** (-cfg.levels[0]), 16)
        report = {
            'lambda0': lambda0,
            'rho_count': int(rhos.size),
            'certificates': [c.to_dict() for c in certs],
            'gap': gap_report(certs),
            'verified': [verify_certificate(c, rhos) for c in certs],
            'monotone': monotonicity_check(rhos, lambda0, eps_grid),
            'count_scaling': count_scaling(rhos, eps_values, lambda0) if len(certs) >= 2 else None,
            'e_equation': self._e_equation_checks(eps_values, lambda0),
        }
        self.writer.write_csv('resonance.csv', certificate_frame(certs))
        self.writer.write_json('resonance.json', report)
        return report

    def _e_equation_checks(self, eps_values, lambda0: float) -> Dict:
        """The e-equation solves at certified eps and refuses an exact resonance."""
        grid = self.layer_grid
        g = np.ones(grid.shape)
        solved = []
        for eps in eps_values:
            e = solve_e_equation(self.chart, eps, g, lambda0, grid)
            solved.append(float(np.max(np.abs(e))))
        rhos = full_spectrum(self.chart, 0.5, grid)
        rho = float(rhos[rhos > 0][0])
        detected = False
        try:
            solve_e_equation(self.chart, float(np.sqrt(lambda0 / rho)), g, lambda0, grid)
        except ResonanceError:
            detected = True
        return {'max_abs_e': solved, 'resonance_detected': detected, 'resonant_rho': rho}

    def run_build(self) -> Dict:
        sol = self.solution()
        self.writer.write_csv('u4_centerline.csv', sol.centerline_frame())
        self.writer.write_csv('boundary_data.csv', sol.boundary_frame())
        report = sol.diagnostics()
        self.writer.write_json('build.json', report)
        return report

    def run_residual_scan(self) -> Dict:
        cfg = self.config
        sol = self.solution()
        spec = WeightedNorm(cfg.q, cfg.varrho)
        rhos = full_spectrum(self.chart, 0.5, self.layer_grid)
        record = scaling_scan(sol, cfg.eps_list, spec, rhos, settings.THREADS)
        with LoggerContextManager(get_logger('layer_builder.assembly'), 'WARNING'):
            quotients = lipschitz_quotients(sol, spec=spec)
        report = record.to_dict()
        report['gluing_defect'] = gluing_defect(sol, spec)
        report['lipschitz_quotients'] = quotients
        self.writer.write_csv('residual_scan.csv', record.to_frame())
        self.writer.write_json('residual_scan.json', report)
        return report

    def run_strip_test(self) -> Dict:
        checker = strip_battery(self.profile())
        solver = StripSolver(self.profile())
        report = checker.results()
        report['coercivity'] = solver.coercivity_constants()
        report['a_priori_constant'] = solver.a_priori_constant()
        self.writer.write_text('strip_report.txt', checker.generate_report())
        self.writer.write_json('strip.json', report)
        return report

    def run_pipeline(self) -> Dict:
        """profile -> nondegeneracy -> resonance -> build -> residual-scan, one JSON report."""
        profile = self.run_profile()
        nondeg = self.run_nondegeneracy()
        if nondeg['verdict'] == 'degenerate':
            raise DegenerateChartError(self.chart.name, nondeg['jacobi_eigenvalue'], nondeg['mode'])
        resonance = self.run_resonance()
        build = self.run_build()
        scan = self.run_residual_scan()
        report = {
            'chart': self.chart.name,
            'p': self.config.p,
            'lambda0': profile['lambda0'],
            'nondegeneracy': nondeg['verdict'],
            'min_abs_eigenvalue': nondeg['min_abs_eigenvalue'],
            'certificates': [{'ell': c['ell'], 'eps': c['eps'], 'gap_over_eps2': c['gap_over_eps2']}
                             for c in resonance['certificates']],
            'gap_constant': resonance['gap']['gap_constant'],
            'orthogonality': build['orthogonality'],
            'c0': build['boundary_layers']['c0_closed_mean'],
            'slopes': scan['slopes'],
            'flags': scan['flags'],
        }
        self.writer.write_json('pipeline.json', report)
        return report

    def run(self, subcommand: str) -> Dict:
        handlers: Dict[str, Callable[[], Dict]] = {
            'profile': self.run_profile,
            'geometry-check': self.run_geometry_check,
            'nondegeneracy': self.run_nondegeneracy,
            'spectrum': self.run_spectrum,
            'resonance': self.run_resonance,
            'build': self.run_build,
            'residual-scan': self.run_residual_scan,
            'strip-test': self.run_strip_test,
            'pipeline': self.run_pipeline,
        }
        if subcommand not in handlers:
            raise ValidationError(f"Unknown subcommand: {subcommand}", {"subcommand": subcommand,
                                                                        "known": sorted(handlers)})
        logger.info(f"Running {subcommand} on {self.chart.name}")
        return handlers[subcommand]()


SUBCOMMANDS = ('profile', 'geometry-check', 'nondegeneracy', 'spectrum', 'resonance',
               'build', 'residual-scan', 'strip-test', 'pipeline')
