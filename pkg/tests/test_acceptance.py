"""
Refinement studies on the finest meshes. Run with `pytest -m slow`.
"""

import pytest

from experiments.study import run_convergence_study, run_field_output
from utils.run_config import RunConfig

pytestmark = pytest.mark.slow


def cavity_study(tmp_path, method, k, pattern, levels=(8, 16, 32, 64)):
    config = RunConfig(experiment="cavity", methods=(method,), k=(k,), levels=levels,
                       kappa=-1.001, pattern=pattern, output_dir=str(tmp_path))
    (result,) = run_convergence_study(config)
    assert result.ok, result.failure
    return result.table


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_symmetric_mesh_convergence(tmp_path, k):
    table = cavity_study(tmp_path, "hdg", k, "mirrored")
    for key in ("e_u", "e_q_l2", "e_q_vh"):
        for rate in table.rate(key)[-2:]:
            assert rate == pytest.approx(k + 1, abs=0.25), key
    expected_star = 1.0 if k == 0 else k + 2
    tolerance = 0.25 if k == 0 else 0.3
    for rate in table.rate("e_ustar")[-2:]:
        assert rate == pytest.approx(expected_star, abs=tolerance)
    if k in (1, 2):
        for rate in table.rate("e_ubar")[-2:]:
            assert rate >= k + 0.5 - 0.3


def test_error_magnitudes_at_1024_cells(tmp_path):
    table = cavity_study(tmp_path, "hdg", 1, "mirrored", levels=(16,))
    (row,) = table.rows
    assert row.cells == 1024
    assert 1.1 <= row.e_u <= 2.6
    assert 2.2e-2 <= row.e_ustar <= 5.0e-2


def test_hdg_beats_cg_on_nonsymmetric_meshes(tmp_path):
    for k in (2, 3):
        hdg = cavity_study(tmp_path / f"hdg{k}", "hdg", k, "uniform")
        cg = cavity_study(tmp_path / f"cg{k}", "cg", k, "uniform")
        for a, b in zip(hdg.rows, cg.rows):
            assert a.e_u < b.e_u
        if k == 3:
            assert hdg.rate("e_u")[-1] >= 3.7


def test_metamaterial_discrepancy_grows_near_critical_interval(tmp_path):
    discrepancy = {}
    for kappa in (-1.5, -1.6, -2.0):
        config = RunConfig(experiment="metamaterial", methods=("hdg", "cg"), k=(3,), levels=(16,),
                           kappa=kappa, slice_points=401, output_dir=str(tmp_path / str(kappa)))
        discrepancy[kappa] = run_field_output(config).discrepancy
    assert discrepancy[-1.5] > discrepancy[-2.0]
