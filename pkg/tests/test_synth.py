import numpy as np
import pytest

from gaitscreen import synth
from gaitscreen.exceptions import BadSpec
from gaitscreen.ingest import NOMINAL_ROWS, build_manifest, dataset_stats, read_sample_file, serialize_sample_file


def walking_power(spec, score, n_cows=5):
    """Mean accel power over 5 s bouts that sit clearly above the noise floor."""
    out = []
    for cow in range(n_cows):
        for _, s in synth.gen_cow(spec, score, 2, cow_id=str(cow)):
            for c in range(3):
                p = (s.accel[:, c] ** 2).reshape(-1, 500).mean(axis=1)
                out.append(p[p > 2 * spec.noise_sigma ** 2].mean())
    return float(np.mean(out))


class TestGenCow:
    def test_shape(self):
        files = synth.gen_cow(synth.preset("default"), 3, 2)
        assert len(files) == 2
        for meta, s in files:
            assert s.n_samples == NOMINAL_ROWS and s.sample_rate_hz == pytest.approx(100.0)
            assert s.to_array().shape == (9000, 13)
            assert np.all(np.diff(s.time) > 0) and s.length_ok
            assert meta.lameness_score == 3
            assert np.all(np.abs(s.attitude) <= np.pi)
            np.testing.assert_allclose(np.linalg.norm(s.gravity, axis=1), 9.81, rtol=1e-9)
        assert (files[1][0].start_time - files[0][0].start_time).total_seconds() == 90

    def test_power_gap(self):
        spec = synth.preset("default")
        db = 10 * np.log10(walking_power(spec, 1) / walking_power(spec, 5))
        assert db >= 3.0

    def test_rest_only(self):
        spec = synth.GaitSpec(noise_sigma=0.0, motion_duty=0.0, severity_map={})
        (_, s), = synth.gen_cow(spec, 1, 1)
        assert np.abs(s.accel).max() < 1e-12 and np.abs(s.gyro).max() < 1e-12
        np.testing.assert_allclose(np.linalg.norm(s.gravity, axis=1), 9.81, atol=1e-6)

    def test_deterministic(self):
        spec = synth.preset("easy", seed=4)
        a = [serialize_sample_file(s) for _, s in synth.gen_cow(spec, 2, 2, cow_id="x")]
        b = [serialize_sample_file(s) for _, s in synth.gen_cow(spec, 2, 2, cow_id="x")]
        assert a == b
        c = [serialize_sample_file(s) for _, s in synth.gen_cow(synth.preset("easy", seed=5), 2, 2, cow_id="x")]
        assert a != c

    def test_monotone_presets(self):
        assert synth.preset("default").is_monotone()
        assert synth.preset("easy").is_monotone()

    @pytest.mark.parametrize("kwargs", [dict(asymmetry=1.5), dict(step_rate_hz=0), dict(informative_groups=("x",))])
    def test_bad_spec(self, kwargs):
        with pytest.raises(BadSpec):
            synth.GaitSpec(**kwargs)

    def test_bad_args(self):
        with pytest.raises(BadSpec):
            synth.gen_cow(synth.preset("default"), 1, 0)
        with pytest.raises(BadSpec):
            synth.gen_cow(synth.preset("default"), 6, 1)
        with pytest.raises(BadSpec):
            synth.preset("nope")


class TestGenDataset:
    def test_small(self, tmp_path):
        m = synth.gen_dataset({1: 1, 3: 1}, synth.preset("default"), tmp_path, n_files=2)
        assert len(m.entries) == 4 and len(m.cows) == 2
        again = build_manifest(tmp_path)
        assert not again.skipped and len(again.entries) == 4
        assert (tmp_path / "manifest.csv").exists()
        s = read_sample_file(m.entries[0].meta.source_path)
        assert s.n_samples == 9000 and s.length_ok

    def test_reference_herd(self, tmp_path):
        m = synth.gen_dataset(synth.reference_herd_counts(), synth.preset("default"), tmp_path, n_files=1)
        assert m.score_histogram() == {1: 19, 2: 7, 3: 6, 4: 6, 5: 5}
        assert dataset_stats(m).n_cows == 43

    def test_too_few(self, tmp_path):
        with pytest.raises(BadSpec):
            synth.gen_dataset({1: 1}, synth.preset("default"), tmp_path)
