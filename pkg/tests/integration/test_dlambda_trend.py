"""
Integration test for the desk-profile sweep over the initial interval width.
"""

import json

import pytest

from orchestrator import load_config, run_sweep_dlambda

pytestmark = [pytest.mark.integration, pytest.mark.slow]


def test_correlation_falls_from_the_symmetric_start(temp_out_dir):
    """Test M(alpha, alpha) at zero interval width exceeds M at the full cavity width."""
    path = temp_out_dir / "trend.json"
    path.write_text(
        json.dumps(
            {
                "schema_version": 1,
                "experiment": {"mode": "independent", "delta_lambda_fractions": [0.0, 0.5, 1.0], "t_m_list": [100]},
                "output": {"dir": str(temp_out_dir / "out")},
            }
        ),
        encoding="utf-8",
    )
    result = run_sweep_dlambda(load_config(path, profile="desk"), workers=4)

    rows = result.table.rows
    assert [r.t_m for r in rows] == [100, 100, 100]
    assert all(abs(r.m_hat) <= 1.0 for r in rows)
    assert rows[0].m_hat == 1.0
    assert rows[0].m_hat > rows[-1].m_hat
    assert (temp_out_dir / "out" / "sweep_dlambda.csv").exists()
