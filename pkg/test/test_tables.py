import pytest

from errors import UnsupportedTableError
from tables import (INVERSIONS, TABLE1, TABLE1_KH, TABLE1_RATE, TABLE3, compare, make_row, run_table,
                    summarize)
from te_solver import fit_rate, roots_disk


def test_compare_modes():
    assert compare(1.01, 1.0, 0.02, 'rel') == (pytest.approx(0.01), True)
    assert compare(1.05, 1.0, 0.02, 'rel')[1] is False
    assert compare(0.52, 0.5, 0.01, 'abs')[1] is False
    assert compare(1.8, 2.1, 1.0, 'min')[1] is True
    assert compare(0.7, 2.1, 1.0, 'min')[1] is False
    assert compare(1.1, 1.0, None, 'reference') == (pytest.approx(0.1), None)


def test_missing_values():
    assert compare(None, 1.0, 0.02) == (None, False)
    assert compare(None, 1.0, None, 'reference') == (None, None)


def test_rows_with_errors_fail():
    row = make_row('t1', 'k1', None, 2.08, error='no eigenvalue')
    assert row['passed'] is False
    assert row['error'] == 'no eigenvalue'
    informational = make_row('t8', 'k1 n(y)', None, 1.093, comparison='reference', error='failed')
    assert informational['passed'] is None
    assert informational['tolerance'] is None


def test_summarize():
    rows = [make_row('t', 'a', 1.0, 1.0), make_row('t', 'b', 2.0, 1.0),
            make_row('t', 'c', 1.0, 1.0, comparison='reference')]
    assert summarize(rows) == (1, 1, 1)


def test_unknown_table_and_resolution():
    with pytest.raises(UnsupportedTableError):
        run_table('t10')
    with pytest.raises(UnsupportedTableError):
        run_table('t4', resolution='huge')


@pytest.mark.parametrize('table_id', sorted(INVERSIONS))
def test_inversion_tables_reproduce_their_eigenvalue(table_id):
    mode, k1, reference, _ = INVERSIONS[table_id]
    rows = run_table(table_id)
    assert len(rows) == 1
    row = rows[0]
    assert row['error'] is None
    assert row['reference'] == reference
    a, n = {'index': (1.0, row['computed']), 'tensor': (row['computed'], 1.0),
            'ratio': (1.0, row['computed'])}[mode]
    assert roots_disk(1.0, a, n, 0.5, 20.0).k1 == pytest.approx(k1, abs=1e-7)


def test_printed_rates():
    fit = fit_rate(list(TABLE1), list(TABLE1.values()), TABLE1_KH)
    assert fit.p == pytest.approx(TABLE1_RATE, abs=0.35)
    printed, rate = TABLE3['disk:1']
    assert abs(fit_rate(list(printed), list(printed.values())).p) == pytest.approx(rate, abs=0.05)
