import numpy as np
import pytest

from annctl import nn
from annctl.controllers import ReferenceModel
from annctl.errors import ConfigError, InsufficientDataError
from annctl.mrc import (Affine, Episodes, ExcitationSpec, IdDataset, MrcSystem, ReferenceSpec, Scaling, StepSignal,
                        WindowSpec, build_system, collect_id_data, episode_loss, generate_excitation, identify_plant,
                        make_episodes, rollout_plant_model, simulate_closed_loop_ann, step_sequence,
                        train_controller)
from annctl.nn import TrainConfig
from annctl.pipeline import PipelineError, identify, load_system, save_system, u_bound
from annctl.plant import MotorParams, simulate

DEFAULT = MotorParams()


# -- excitation -------------------------------------------------------------

def test_excitation_degenerate_ranges():
    sig = generate_excitation(ExcitationSpec(2.0, 2.0, 0.5, 0.5, 25.0, 1))
    assert np.all(sig.levels == 2.0)
    np.testing.assert_allclose(np.diff(sig.starts), 0.5)
    assert sig.end >= 25.0


def test_excitation_deterministic_and_seeded():
    a = generate_excitation(ExcitationSpec(rng_seed=4))
    b = generate_excitation(ExcitationSpec(rng_seed=4))
    c = generate_excitation(ExcitationSpec(rng_seed=5))
    np.testing.assert_array_equal(a.levels, b.levels)
    np.testing.assert_array_equal(a.starts, b.starts)
    assert not np.array_equal(a.levels[:10], c.levels[:10])


def test_excitation_bounds_and_coverage():
    spec = ExcitationSpec(-3.0, 5.0, 0.1, 0.2, 2000.0, 9)
    sig = generate_excitation(spec)
    assert sig.levels.min() >= -3.0 and sig.levels.max() <= 5.0
    holds = np.diff(sig.starts)
    assert holds.min() >= 0.1 and holds.max() <= 0.2
    # every decile of the amplitude range is visited roughly equally often
    counts, _ = np.histogram(sig.levels[:-1], bins=10, range=(-3.0, 5.0))
    assert counts.min() > 0.7 * counts.mean()


def test_excitation_rejects_bad_spec():
    with pytest.raises(ConfigError, match="excitation.amp_min"):
        ExcitationSpec(1.0, -1.0)
    with pytest.raises(ConfigError, match="excitation.duration"):
        ExcitationSpec(duration=10.0)


def test_step_signal_lookup():
    sig = StepSignal(np.array([0.0, 1.0, 2.5, 3.0]), np.array([1.0, -2.0, 4.0, 4.0]))
    assert [sig(t) for t in (0.0, 0.99, 1.0, 2.4, 2.5, 10.0)] == [1.0, 1.0, -2.0, -2.0, 4.0, 4.0]
    np.testing.assert_array_equal(sig.sample(0.5, 6), [1.0, 1.0, -2.0, -2.0, -2.0, 4.0])


# -- data collection --------------------------------------------------------

def test_collect_length_and_zero_input():
    data = collect_id_data(DEFAULT, 0.0, 0.1, 5.0)
    assert len(data) == 50
    assert np.all(data.y == 0.0) and np.all(data.u == 0.0)


def test_collect_replays_exactly():
    sig = generate_excitation(ExcitationSpec(duration=50.0, rng_seed=3))
    data = collect_id_data(DEFAULT, sig, 0.1, 20.0)
    fine = simulate(DEFAULT, np.repeat(data.u, 100), 1e-3, 20.0)
    np.testing.assert_allclose(data.y, fine.output[::100][:200], rtol=0, atol=1e-12)


def test_collect_rejects_incommensurate_grid():
    with pytest.raises(ConfigError):
        collect_id_data(DEFAULT, 0.0, 0.1005, 1.0)


def test_dataset_rejects_nonfinite():
    with pytest.raises(ValueError):
        IdDataset(0.1, [0.0, np.nan], [0.0, 0.0])


# -- identification ---------------------------------------------------------

W = WindowSpec()


def test_identify_constant_dataset():
    data = IdDataset(0.1, np.zeros(200), np.zeros(200))
    res = identify_plant(data, W, 4, TrainConfig(20, 0.1, "full"))
    assert res.validation_mse < 1e-8


def test_identify_too_short():
    with pytest.raises(InsufficientDataError):
        identify_plant(IdDataset(0.1, np.zeros(8), np.zeros(8)), W, 4, TrainConfig(1))


def test_identify_default_pipeline(default_cfg, default_ident):
    res, attempt, seeds = default_ident
    assert res.validation_mse < default_cfg.mse_threshold
    assert res.validation_mse < 1e-3 * res.validation_variance
    assert set(seeds) == {"excitation", "plant_init"}


def test_identify_pins_rest(default_ident):
    res = default_ident[0]
    assert res.net(res.plant_in(np.zeros(W.plant_inputs)))[0] == pytest.approx(0.0, abs=1e-12)


def test_identified_model_rollout(default_cfg, default_system):
    system, _ = default_system
    sig = generate_excitation(ExcitationSpec(duration=50.0, rng_seed=12345))
    data = collect_id_data(default_cfg.plant, sig, 0.1, 10.0)
    y = rollout_plant_model(system, data.u, data.y)
    span = data.y.max() - data.y.min()
    assert np.max(np.abs(y - data.y)) < 0.05 * span


def test_regeneration_stops_after_max_retries():
    from annctl.config import parse_config
    cfg = parse_config("[identification]\nepochs = 1\nmse_threshold = 1e-12\nmax_retries = 2\n"
                       "[excitation]\nduration = 50\n")
    with pytest.raises(PipelineError, match=r"identification: .* after 2 regenerations"):
        identify(cfg, 0)


def test_regeneration_uses_new_excitation(monkeypatch):
    from annctl import pipeline
    from annctl.config import parse_config
    seen = []
    real = pipeline.generate_excitation

    def spy(spec):
        seen.append(spec.rng_seed)
        return real(spec)

    monkeypatch.setattr(pipeline, "generate_excitation", spy)
    cfg = parse_config("[identification]\nepochs = 1\nmse_threshold = 1e-12\nmax_retries = 3\n"
                       "[excitation]\nduration = 50\n")
    with pytest.raises(PipelineError):
        identify(cfg, 0)
    assert len(seen) == 4 and len(set(seen)) == 4


# -- BPTT -------------------------------------------------------------------

def toy_system(relative, seed=0):
    rng = np.random.default_rng(seed)
    w = WindowSpec(1, 1, 1)
    ctrl = nn.init_mlp([2, 3, 1], rng)
    plant = nn.init_mlp([2, 3, 1], rng)
    sc = Scaling(Affine(np.array([0.1, -0.2]), np.array([1.5, 0.7])), Affine.symmetric(2.0),
                 Affine(np.array([0.0, 0.3]), np.array([2.0, 1.2])), Affine(np.array([0.05]), np.array([0.8])))
    return MrcSystem(ctrl, plant, w, ReferenceModel(), 0.1, sc, relative), rng


def toy_episodes(system, rng, horizon=3, count=4):
    lag = system.window.max_lag
    r = rng.uniform(-1, 1, size=(count, lag + horizon))
    y0 = rng.uniform(-0.5, 0.5, size=count)
    y_ref = rng.uniform(-1, 1, size=(count, horizon + 1))
    y_ref[:, 0] = y0
    return Episodes(r, y0, y_ref, lag)


@pytest.mark.parametrize("relative", [True, False])
def test_bptt_matches_finite_differences(relative):
    system, rng = toy_system(relative)
    ep = toy_episodes(system, rng)
    _, grads = episode_loss(system, ep)
    g = nn.flatten_grads(grads)
    theta = system.controller.get_params()
    fd = np.empty_like(theta)
    h = 1e-6
    for j in range(len(theta)):
        vals = []
        for sgn in (1, -1):
            th = theta.copy()
            th[j] += sgn * h
            system.controller.set_params(th)
            vals.append(episode_loss(system, ep, with_grad=False)[0])
        fd[j] = (vals[0] - vals[1]) / (2 * h)
    system.controller.set_params(theta)
    rel = np.max(np.abs(g - fd)) / np.max(np.abs(fd))
    assert rel < 1e-4


def test_zero_controller_zero_loss_when_reference_is_rest():
    system, rng = toy_system(True)
    for l in system.controller.layers[-1:]:
        l.weights[...] = 0
        l.biases[...] = 0
    sc = system.scaling
    system.plant_model.layers[-1].biases -= system.plant_model(sc.plant_in(np.zeros(2))) - sc.plant_out(0.0)
    ep = Episodes(np.zeros((2, 4)), np.zeros(2), np.zeros((2, 4)), 1)
    loss, grads = episode_loss(system, ep)
    assert loss == pytest.approx(0.0, abs=1e-24)
    assert np.allclose(nn.flatten_grads(grads), 0.0, atol=1e-12)


def test_training_leaves_plant_model_frozen(default_cfg, default_ident):
    ident = default_ident[0]
    system = build_system(ident, W, 4, ReferenceModel(), 0.1, 20.0, ReferenceSpec(), 1)
    before = system.plant_model.copy()
    ctrl_before = system.controller.copy()
    res = train_controller(system, TrainConfig(5, 0.05, "full", 2), 10, 4)
    assert system.plant_model.equals(before)
    assert system.controller.equals(ctrl_before)
    assert not res.net.equals(ctrl_before)
    assert len(res.mse_history) == 5


def test_training_per_sample_mode(default_ident):
    system = build_system(default_ident[0], W, 4, ReferenceModel(), 0.1, 20.0, ReferenceSpec(), 1)
    res = train_controller(system, TrainConfig(3, 0.02, "sample", 2), 10, 4)
    assert res.mse_history[-1] < episode_loss(system, make_episodes(system, ReferenceSpec(), 10, 4, 0),
                                              with_grad=False)[0] * 10


def test_training_divergence_is_reported(default_ident, monkeypatch):
    from annctl import mrc
    from annctl.errors import DivergenceError
    system = build_system(default_ident[0], W, 4, ReferenceModel(), 0.1, 20.0, ReferenceSpec(), 1)
    calls = []
    real = mrc.episode_loss

    def flaky(*args, **kw):
        calls.append(1)
        if len(calls) > 4:
            raise DivergenceError("non-finite episode loss")
        return real(*args, **kw)

    monkeypatch.setattr(mrc, "episode_loss", flaky)
    with pytest.raises(DivergenceError, match=r"epoch 3 \(learning_rate=0.5\)"):
        train_controller(system, TrainConfig(10, 0.5, "full", 0), 5, 2)


def test_training_reduces_loss(default_system):
    _, report = default_system
    h = report.controller_history
    assert len(h) == 500 and h[-1] < 0.05 * h[0]


def test_controller_causal(default_system):
    system, _ = default_system
    r = np.linspace(-1, 1, 30)
    y = np.sin(np.arange(30.0))
    base = system.control(r, y, 20)
    r2, y2 = r.copy(), y.copy()
    r2[21:] += 5.0
    y2[21:] -= 3.0
    assert system.control(r2, y2, 20) == base
    r2[20] += 0.1
    assert system.control(r2, y2, 20) != base


# -- closed loop ------------------------------------------------------------

def test_trained_controller_rests_at_zero(default_system):
    system, _ = default_system
    assert system.control(np.zeros(5), np.zeros(5), 4) == pytest.approx(0.0, abs=1e-12)


def test_closed_loop_zero_reference_stays_at_rest(default_system):
    system, _ = default_system
    traj = simulate_closed_loop_ann(system, DEFAULT, 0.0, 5.0)
    assert np.max(np.abs(traj.output)) < 1e-9
    assert len(traj) == 5001


def test_closed_loop_deterministic(default_system):
    system, _ = default_system
    r, _ = step_sequence(ReferenceSpec(), 2, 0.1, 3)
    a = simulate_closed_loop_ann(system, DEFAULT, r, 10.0)
    b = simulate_closed_loop_ann(system, DEFAULT, r, 10.0)
    np.testing.assert_array_equal(a.output, b.output)
    np.testing.assert_array_equal(a.control, b.control)


def test_untrained_controller_applies_no_voltage(default_ident):
    system = build_system(default_ident[0], W, 5, ReferenceModel(), 0.1, 20.0, ReferenceSpec(), 0)
    traj = simulate_closed_loop_ann(system, DEFAULT, 1.0, 2.0)
    assert np.all(traj.control == 0.0) and np.all(traj.output == 0.0)


def test_step_sequence_levels():
    spec = ReferenceSpec()
    r, levels = step_sequence(spec, 20, 0.1, 0)
    assert len(r) == 20 * 50
    assert np.all(np.abs(levels) <= 1.0)
    assert np.all(np.abs(np.diff(np.concatenate([[0.0], levels]))) >= spec.min_step)


def test_save_load_round_trip(tmp_path, default_system, default_cfg):
    system, report = default_system
    save_system(system, tmp_path / "m", report.seeds)
    back = load_system(tmp_path / "m")
    assert back.controller.equals(system.controller)
    assert back.plant_model.equals(system.plant_model)
    assert back.window == system.window and back.dt == system.dt and back.relative == system.relative
    r, _ = step_sequence(ReferenceSpec(), 2, 0.1, 1)
    a = simulate_closed_loop_ann(system, DEFAULT, r, 10.0)
    b = simulate_closed_loop_ann(back, DEFAULT, r, 10.0)
    np.testing.assert_array_equal(a.output, b.output)
    save_system(back, tmp_path / "m2", report.seeds)
    for name in ("controller.net", "plant_model.net", "manifest.txt"):
        assert (tmp_path / "m" / name).read_bytes() == (tmp_path / "m2" / name).read_bytes()


def test_load_rejects_unknown_manifest(tmp_path):
    (tmp_path / "manifest.txt").write_text("format = something 9\n")
    with pytest.raises(ConfigError):
        load_system(tmp_path)


def test_u_bound_symmetric(default_cfg):
    assert u_bound(default_cfg) == 20.0
