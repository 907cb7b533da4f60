import json
import math
import os

import pandas as pd
import pytest

from main import EXIT_DATA, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, build_parser, main

pytestmark = pytest.mark.integration


def read_json(path):
    with open(path, 'r') as f:
        return json.load(f)


def test_parser_requires_command():
    with pytest.raises(SystemExit) as excinfo:
        build_parser().parse_args([])
    assert excinfo.value.code == EXIT_USAGE


def test_unknown_flag_is_usage_error(device_file, tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        main(['sweep', '--device', device_file, '--bogus'])
    assert excinfo.value.code == EXIT_USAGE


class TestSweep:
    def test_reference_row(self, device_file, tmp_path):
        out = str(tmp_path / 'out')
        code = main(['sweep', '--device', device_file, '--out-dir', out, '--c-total', '10', '--c-total', '1525'])
        assert code == EXIT_OK
        frame = pd.read_csv(os.path.join(out, 'sweep_cooperativity.csv'))
        row = frame[frame['c_total'] == 1525.0].iloc[0]
        assert row['t_sq'] == pytest.approx(0.94917, abs=5e-5)
        assert row['internal_efficiency'] == pytest.approx(0.99869, abs=5e-5)
        sidecar = read_json(os.path.join(out, 'sweep_cooperativity.json'))
        assert sidecar['provenance']['device_sha256']
        assert sidecar['provenance']['command_line'][:2] == ['optoconv', 'sweep']

    def test_log_grid_is_deterministic(self, device_file, tmp_path):
        paths = []
        for name in ('a', 'b'):
            out = str(tmp_path / name)
            assert main(['sweep', '--device', device_file, '--out-dir', out, '--points', '50']) == EXIT_OK
            paths.append(os.path.join(out, 'sweep_cooperativity.csv'))
        with open(paths[0], 'rb') as first, open(paths[1], 'rb') as second:
            assert first.read() == second.read()

    def test_ratio_mode(self, device_file, tmp_path):
        out = str(tmp_path / 'out')
        code = main(['sweep', '--device', device_file, '--out-dir', out, '--mode', 'ratio',
                     '--c1-fixed', '400', '--points', '21'])
        assert code == EXIT_OK
        frame = pd.read_csv(os.path.join(out, 'sweep_ratio.csv'))
        assert list(frame.columns) == ['c2_over_c1', 't_sq', 'r1_sq', 'r2_sq']
        assert len(frame) == 21

    def test_detuning_trace(self, device_file, tmp_path):
        out = str(tmp_path / 'out')
        code = main(['sweep', '--device', device_file, '--out-dir', out, '--mode', 'detuning',
                     '--c-total', '156', '--points', '101'])
        assert code == EXIT_OK
        frame = pd.read_csv(os.path.join(out, 'trace.csv'))
        assert len(frame) == 101
        assert frame['t_sq'].iloc[50] == pytest.approx(frame['t_sq'].max(), rel=1e-3)

    def test_linear_grid_hits_reference_row(self, device_file, tmp_path):
        out = str(tmp_path / 'out')
        code = main(['sweep', '--device', device_file, '--out-dir', out, '--spacing', 'linear',
                     '--c-total-min', '1', '--c-total-max', '3000', '--points', '3000'])
        assert code == EXIT_OK
        frame = pd.read_csv(os.path.join(out, 'sweep_cooperativity.csv'))
        assert len(frame) == 3000
        row = frame[frame['c_total'] == 1525.0].iloc[0]
        assert row['t_sq'] == pytest.approx(0.949, abs=0.005)
        assert row['t_sq'] == pytest.approx(0.94917, abs=5e-5)

    def test_empty_sweep_is_usage_error(self, device_file, tmp_path):
        code = main(['sweep', '--device', device_file, '--out-dir', str(tmp_path), '--points', '0'])
        assert code == EXIT_USAGE

    def test_missing_device_option(self, tmp_path):
        assert main(['sweep', '--out-dir', str(tmp_path)]) == EXIT_USAGE

    def test_unreadable_device(self, tmp_path):
        code = main(['sweep', '--device', str(tmp_path / 'absent.json'), '--out-dir', str(tmp_path)])
        assert code == EXIT_DATA

    def test_invalid_eta_override(self, device_file, tmp_path):
        code = main(['sweep', '--device', device_file, '--out-dir', str(tmp_path), '--eta1', '1.5'])
        assert code == EXIT_DATA


class TestSpectrumAndFit:
    """Test the spectrum-then-fit pipeline."""

    def test_pipeline_recovers_bath(self, device_file, tmp_path):
        out = str(tmp_path / 'out')
        assert main(['spectrum', '--device', device_file, '--out-dir', out, '--c-total', '160',
                     '--c-total', '400', '--points', '1001']) == EXIT_OK
        spectra = [os.path.join(out, name) for name in ('spectrum_c160.csv', 'spectrum_c400.csv')]
        sidecar = read_json(os.path.join(out, 'spectrum_c160.json'))
        assert sidecar['metadata']['floor_quanta'] == pytest.approx(21.77, abs=0.01)

        fit_dir = str(tmp_path / 'fits')
        assert main(['fit', *spectra, '--out-dir', fit_dir, '--workers', '2']) == EXIT_OK
        summary = pd.read_csv(os.path.join(fit_dir, 'fit_summary.csv'))
        assert list(summary.columns) == ['c_total', 'n_add', 'n_m', 'n_th']
        assert summary['c_total'].tolist() == pytest.approx([160.0, 400.0])
        assert summary['n_th'].tolist() == pytest.approx([60.0, 60.0], rel=1e-4)
        record = read_json(os.path.join(fit_dir, 'fit_spectrum_c160.json'))
        assert record['fit']['converged']

    def test_synthetic_spectrum_is_reproducible(self, device_file, tmp_path):
        contents = []
        for name in ('a', 'b'):
            out = str(tmp_path / name)
            assert main(['spectrum', '--device', device_file, '--out-dir', out, '--c-total', '160',
                         '--synthesize', '--seed', '9']) == EXIT_OK
            with open(os.path.join(out, 'spectrum_c160.csv'), 'rb') as f:
                contents.append(f.read())
        assert contents[0] == contents[1]
        sidecar = read_json(os.path.join(str(tmp_path / 'a'), 'spectrum_c160.json'))
        assert sidecar['metadata']['seed'] == 9

    def test_synthesis_needs_seed(self, device_file, tmp_path):
        code = main(['spectrum', '--device', device_file, '--out-dir', str(tmp_path), '--c-total', '160',
                     '--synthesize'])
        assert code == EXIT_USAGE

    def test_spectrum_needs_cooperativity(self, device_file, tmp_path):
        assert main(['spectrum', '--device', device_file, '--out-dir', str(tmp_path)]) == EXIT_USAGE

    def test_floor_options_are_exclusive(self, device_file, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(['spectrum', '--device', device_file, '--c-total', '160', '--floor-quanta', '5',
                  '--t-noise-k', '9.5'])
        assert excinfo.value.code == EXIT_USAGE

    def test_bath_override(self, device_file, tmp_path):
        out = str(tmp_path / 'out')
        assert main(['spectrum', '--device', device_file, '--out-dir', out, '--c-total', '160',
                     '--n-th', '120']) == EXIT_OK
        metadata = read_json(os.path.join(out, 'spectrum_c160.json'))['metadata']
        assert metadata['n_th'] == 120.0
        assert metadata['rates']['n_th'] == 120.0

    def test_failed_cooperativity_writes_nothing(self, device_file, tmp_path):
        out = tmp_path / 'out'
        code = main(['spectrum', '--device', device_file, '--out-dir', str(out), '--c-total', '160',
                     '--c-total', '-5'])
        assert code == EXIT_DATA
        assert not out.exists()

    @pytest.mark.parametrize('body', ['delta_hz,quanta\n' + ''.join(f'{i},abc\n' for i in range(20)),
                                      'delta_hz,quanta\n' + ''.join(f'{i},{"nan" if i == 7 else 1.0}\n'
                                                                    for i in range(20))])
    def test_malformed_values_fail_one_file(self, device_file, tmp_path, body):
        out = str(tmp_path / 'out')
        assert main(['spectrum', '--device', device_file, '--out-dir', out, '--c-total', '160']) == EXIT_OK
        bad = tmp_path / 'malformed.csv'
        bad.write_text(body)
        fit_dir = str(tmp_path / 'fits')
        code = main(['fit', str(bad), os.path.join(out, 'spectrum_c160.csv'), '--out-dir', fit_dir,
                     '--workers', '2'])
        assert code == EXIT_DATA
        assert 'error' in read_json(os.path.join(fit_dir, 'fit_malformed.json'))
        assert read_json(os.path.join(fit_dir, 'fit_spectrum_c160.json'))['fit']['converged']
        summary = pd.read_csv(os.path.join(fit_dir, 'fit_summary.csv'))
        assert summary['n_th'].tolist() == pytest.approx([60.0], rel=1e-4)

    def test_duplicate_file_names(self, device_file, tmp_path):
        spectra = []
        for name in ('a', 'b'):
            out = str(tmp_path / name)
            assert main(['spectrum', '--device', device_file, '--out-dir', out, '--c-total', '160']) == EXIT_OK
            spectra.append(os.path.join(out, 'spectrum_c160.csv'))
        code = main(['fit', *spectra, '--out-dir', str(tmp_path / 'fits')])
        assert code == EXIT_USAGE

    def test_batch_continues_past_bad_file(self, device_file, tmp_path):
        out = str(tmp_path / 'out')
        assert main(['spectrum', '--device', device_file, '--out-dir', out, '--c-total', '160']) == EXIT_OK
        bad = tmp_path / 'bad.csv'
        bad.write_text('frequency,power\n1,2\n')
        fit_dir = str(tmp_path / 'fits')
        code = main(['fit', str(bad), os.path.join(out, 'spectrum_c160.csv'), '--out-dir', fit_dir])
        assert code == EXIT_DATA
        assert 'error' in read_json(os.path.join(fit_dir, 'fit_bad.json'))
        assert os.path.exists(os.path.join(fit_dir, 'fit_spectrum_c160.json'))
        assert os.path.exists(os.path.join(fit_dir, 'fit_summary.csv'))


class TestDesign:
    def test_bandwidth_target(self, device_file, tmp_path, capsys):
        target = tmp_path / 'target.json'
        target.write_text(json.dumps({'bandwidth_hz': 140e3}))
        out = str(tmp_path / 'out')
        assert main(['design', '--device', device_file, '--target', str(target), '--out-dir', out]) == EXIT_OK
        payload = read_json(os.path.join(out, 'design.json'))
        assert payload['feasible']
        [solution] = payload['solutions']
        assert solution['drive']['n1'] == pytest.approx(1.41e6, rel=1e-2)
        assert 'Solution' in capsys.readouterr().out

    def test_reference_bandwidth(self, device_file, tmp_path):
        out = str(tmp_path / 'out')
        assert main(['design', '--device', device_file, '--out-dir', out, '--bandwidth-hz', '14039.2']) == EXIT_OK
        [solution] = read_json(os.path.join(out, 'design.json'))['solutions']
        assert solution['rates']['c1'] + solution['rates']['c2'] == pytest.approx(1525.0, rel=1e-9)

    def test_ideal_fifty_fifty_split(self, device_file, tmp_path):
        out = str(tmp_path / 'out')
        code = main(['design', '--device', device_file, '--out-dir', out, '--eta1', '1', '--eta2', '1',
                     '--split-t-sq', '0.5', '--c1-fixed', '1e6'])
        assert code == EXIT_OK
        solutions = read_json(os.path.join(out, 'design.json'))['solutions']
        ratios = [s['rates']['c2'] / s['rates']['c1'] for s in solutions]
        assert ratios == pytest.approx([3 - 2 * math.sqrt(2), 3 + 2 * math.sqrt(2)], abs=1e-4)

    def test_split_flags(self, device_file, tmp_path):
        out = str(tmp_path / 'out')
        code = main(['design', '--device', device_file, '--out-dir', out, '--split-t-sq', '0.5',
                     '--c1-fixed', '400'])
        assert code == EXIT_OK
        branches = [s['branch'] for s in read_json(os.path.join(out, 'design.json'))['solutions']]
        assert branches == ['lesser', 'greater']

    def test_infeasible_transmission(self, device_file, tmp_path):
        out = str(tmp_path / 'out')
        code = main(['design', '--device', device_file, '--out-dir', out, '--transmission-sq', '0.99'])
        assert code == EXIT_INFEASIBLE
        payload = read_json(os.path.join(out, 'design.json'))
        assert not payload['feasible']
        assert payload['achievable'] == pytest.approx(0.96 * 0.99)

    def test_drive_limit_is_infeasible(self, device_file, tmp_path):
        code = main(['design', '--device', device_file, '--out-dir', str(tmp_path), '--bandwidth-hz', '140e3',
                     '--max-drive-photons', '1e5'])
        assert code == EXIT_INFEASIBLE

    def test_missing_objective(self, device_file, tmp_path):
        assert main(['design', '--device', device_file, '--out-dir', str(tmp_path)]) == EXIT_USAGE
