import numpy as np
import pytest

from salflow import experiments
from salflow.core import FlowField, Layout, save_flow, write_raster
from salflow.errors import ValidationError
from salflow.synth import Occluder, occlusion_scene_spec, render


@pytest.fixture(scope='module')
def small_occlusion_scene():
    return render(occlusion_scene_spec(size=32))


def _planted_flow(scene, occluder_value):
    """Unit motion on the visible object, `occluder_value` on the occluder
    path while the object is fully hidden."""
    n_samples = scene.truth.n_samples
    u1 = np.zeros((n_samples, scene.spec.height, scene.spec.width))
    for k in range(n_samples):
        u1[k][scene.object_mask[k]] = 1.0
    path = experiments.occluder_path_mask(scene)
    for k in (8, 9):
        u1[k][path] = occluder_value
    return FlowField(u1, np.zeros_like(u1))


def test_occluder_path_mask(small_occlusion_scene):
    mask = experiments.occluder_path_mask(small_occlusion_scene)
    obj = small_occlusion_scene.spec.objects[0]
    rows, cols = np.nonzero(mask)
    assert set(rows) == {obj.y, obj.y + 1}
    assert set(cols) == {15, 16, 17}


def test_measure_occlusion(small_occlusion_scene):
    scene = small_occlusion_scene
    baseline = FlowField.zeros(scene.truth.n_samples, 32, 32)
    report = experiments.measure_occlusion(scene, _planted_flow(scene, 0.5),
                                           baseline)
    assert report.frames == (8, 9)
    assert report.occluder_magnitude == pytest.approx(0.5)
    assert report.baseline_magnitude == 0.0
    assert report.pre_occlusion_magnitude == pytest.approx(1.0)
    assert report.ratio == pytest.approx(0.5)
    assert report.baseline_auc == pytest.approx(0.5)
    assert report.baseline_nss == 0.0
    assert report.auc > 0.9
    assert report.nss > 1.0
    assert report.auc_ok and report.nss_ok
    assert report.passed

    weak = experiments.measure_occlusion(scene, _planted_flow(scene, 0.1),
                                         baseline)
    assert weak.ordering_ok and not weak.ratio_ok
    assert weak.auc_ok
    assert not weak.passed
    tied = experiments.measure_occlusion(scene, baseline, baseline)
    assert not tied.ordering_ok
    assert not tied.auc_ok and not tied.nss_ok


def test_measure_occlusion_scores_hidden_frames_only(small_occlusion_scene):
    scene = small_occlusion_scene
    flow = _planted_flow(scene, 0.5)
    u1 = flow.u1.copy()
    # flat maps outside the hidden frames must not reach the scores
    u1[:8] = 0.0
    u1[10:] = 0.0
    baseline = FlowField.zeros(scene.truth.n_samples, 32, 32)
    report = experiments.measure_occlusion(
        scene, FlowField(u1, np.zeros_like(u1)), baseline)
    full = experiments.measure_occlusion(scene, flow, baseline)
    assert report.auc == pytest.approx(full.auc)
    assert report.nss == pytest.approx(full.nss)


def test_measure_occlusion_needs_an_occlusion(small_occlusion_scene):
    spec = small_occlusion_scene.spec._replace(
        occluders=(Occluder(x=0, width=2), ))
    scene = render(spec)
    flow = FlowField.zeros(scene.truth.n_samples, 32, 32)
    with pytest.raises(ValidationError, match="never passes"):
        experiments.measure_occlusion(scene, flow, flow)


def test_format_occlusion_report():
    report = experiments.OcclusionReport((8, 9), 0.3, 0.1, 1.0, 0.9, 0.5,
                                         2.5, 0.0)
    text = experiments.format_occlusion_report(report)
    lines = text.splitlines()
    assert lines[0] == "occlusion_frames = 8, 9"
    assert "occluder_ratio = 0.300000" in lines
    assert "spatio_temporal_auc = 0.900000" in lines
    assert "two_frame_nss = 0.000000" in lines
    assert "nss_check = PASS" in lines
    assert lines[-1] == "result = PASS"
    failing = report._replace(occluder_magnitude=0.05)
    assert experiments.format_occlusion_report(failing).endswith(
        "result = FAIL\n")
    worse_auc = report._replace(auc=0.4)
    assert "auc_check = FAIL" in experiments.format_occlusion_report(
        worse_auc).splitlines()
    assert not worse_auc.passed
    assert not report._replace(nss=0.0).passed
    assert report._replace(pre_occlusion_magnitude=0.0).ratio == 0.0


def test_interior_mask():
    mask = experiments.interior_mask((2, 8, 10), 2)
    assert mask.shape == (2, 8, 10)
    assert mask.sum() == 2 * 4 * 6
    assert not mask[:, :2].any() and not mask[:, :, -2:].any()
    assert mask[1, 2, 2] and mask[0, 5, 7]
    with pytest.raises(ValidationError, match="no interior"):
        experiments.interior_mask((1, 8, 10), 4)


def test_layout_variants(rng):
    scene = render(occlusion_scene_spec(size=32, layout='color'))
    variants = experiments.layout_variants(scene.sequence)
    assert list(variants) == list(experiments.CONDITION_LAYOUTS)
    assert [v.layout for v in variants.values()] == [
        Layout.GRAY, Layout.GRAY_SALIENCY, Layout.COLOR, Layout.COLOR_SALIENCY
    ]
    np.testing.assert_allclose(variants['gray'].data[..., 0],
                               scene.sequence.data.mean(axis=3))
    np.testing.assert_array_equal(variants['gray+saliency'].saliency_data,
                                  variants['color+saliency'].saliency_data)
    with pytest.raises(ValidationError, match="colour sequence"):
        experiments.layout_variants(variants['gray'])


def test_scoring_scene_vars_are_seeded():
    first = experiments.OcclusionScoring(n_scenes=3, seed=7)
    second = experiments.OcclusionScoring(n_scenes=3, seed=7)
    assert first.scene_vars(2).as_dict() == second.scene_vars(2).as_dict()
    assert first.scene_vars(1).as_dict() != first.scene_vars(2).as_dict()
    assert first.run_id == 'occlusion-metrics-3x-seed7'
    assert first.model_names == list(experiments.SCORED_MODELS)


def test_reference_within_factor():
    result = experiments.ConditionOrdering(None, 0, 0, True, {})
    assert result.reference_within_factor
    result = result._replace(reference_checks={'Grove3': (2.0, 4.2)})
    assert result.reference_within_factor
    result = result._replace(reference_checks={'Urban2': (1.5, 0.31)})
    assert not result.reference_within_factor


def test_condition_ordering_table(tmp_path, rng):
    root = tmp_path / 'middlebury'
    frames = root / 'other-data' / 'Hydrangea'
    frames.mkdir(parents=True)
    for index in range(9, 12):
        write_raster(str(frames / f'frame{index:02d}.png'),
                     rng.uniform(size=(24, 24, 3)))
    (root / 'other-gt-flow' / 'Hydrangea').mkdir(parents=True)
    save_flow((np.zeros((24, 24)), np.zeros((24, 24))),
              str(root / 'other-gt-flow' / 'Hydrangea' / 'flow10.flo'))

    result = experiments.condition_ordering(range(2), size=32,
                                            middlebury_root=str(root))
    assert result.n_cases == 3
    assert result.gray_always_zero
    assert 0 <= result.n_ordered <= 3
    table = result.table
    assert len(table) == 3 * 4
    assert list(table['sequence'].unique()) == \
        ['synthetic-0', 'synthetic-1', 'Hydrangea']
    assert list(table[table['sequence'] == 'Hydrangea']['frame']) == [1] * 4
    assert list(result.reference_checks) == ['Hydrangea']
    assert result.reference_checks['Hydrangea'][1] == 2.48


@pytest.mark.slow
def test_metric_ordering_frame():
    frame, passed = experiments.metric_ordering(n_scenes=2, seed=3)
    assert set(frame['model']) == set(experiments.SCORED_MODELS)
    assert (frame['n_scenes'] == 2).all()
    assert isinstance(passed, bool)
