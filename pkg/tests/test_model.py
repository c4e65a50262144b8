import numpy as np
import pytest

from algoreason import autodiff as ad
from algoreason.algorithms import algo_feature_specs, sample_trajectory
from algoreason.autodiff import Tensor, grad_check
from algoreason.checkpoint import load_checkpoint, save_checkpoint
from algoreason.co_tasks import co_feature_specs
from algoreason.features import FeatureSpec
from algoreason.model import (
    build_model,
    co_forward,
    decode_step,
    encode_step,
    eval_accuracy,
    init_state,
    processor_step,
)
from algoreason.optim import AdamState
from algoreason.rng import Rng
from algoreason.training import bucket_batches, collate, run_batch, train_step


def tiny_model(latent=8, algo="find_min", edge_state=False, seed=5):
    return build_model(latent, Rng(seed), edge_state, {algo: algo_feature_specs(algo)})


def tiny_batch(algo="find_min", n=5, count=3, seed=9):
    rng = Rng(seed)
    return collate([sample_trajectory(algo, n, rng) for _ in range(count)])


# --- encoding ----------------------------------------------------------------


def test_encode_all_zero_features_give_zero_channels():
    model = tiny_model()
    head = model.heads["find_min"]
    specs = algo_feature_specs("find_min")
    feats = {
        specs["pos"]: np.zeros(4),
        specs["values"]: np.zeros(4),
        specs["adj"]: np.zeros((4, 4)),
    }
    u, e, g = encode_step(head, feats)
    assert np.all(u.data == 0.0) and np.all(e.data == 0.0) and g is None


def test_encode_additivity_over_features():
    model = tiny_model()
    head = model.heads["find_min"]
    specs = algo_feature_specs("find_min")
    rng = Rng(1)
    pos, values = rng.uniform(0, 1, 4), rng.uniform(0, 1, 4)
    u_both, _, _ = encode_step(head, {specs["pos"]: pos, specs["values"]: values,
                                      specs["adj"]: np.zeros((4, 4))})
    u_pos, _, _ = encode_step(head, {specs["pos"]: pos, specs["values"]: np.zeros(4),
                                     specs["adj"]: np.zeros((4, 4))})
    u_val, _, _ = encode_step(head, {specs["pos"]: np.zeros(4), specs["values"]: values,
                                     specs["adj"]: np.zeros((4, 4))})
    assert np.allclose(u_both.data, u_pos.data + u_val.data, atol=1e-15)


def test_encode_mask_scales_encoder_row():
    model = tiny_model()
    head = model.heads["find_min"]
    specs = algo_feature_specs("find_min")
    mask = np.array([0.0, 1.0, 0.0, 2.0])
    u, _, _ = encode_step(head, {specs["pos"]: mask, specs["values"]: np.zeros(4),
                                 specs["adj"]: np.zeros((4, 4))})
    row = head.params["enc.pos"].data[0]
    assert np.allclose(u.data[1], row) and np.allclose(u.data[3], 2.0 * row)


# --- processor ---------------------------------------------------------------


def run_one_step(model, algo, batch):
    head = model.heads[algo]
    u, e, g = encode_step(head, batch.inputs)
    state = init_state(model, (batch.size,), batch.n)
    return processor_step(model, state, u, e, None, g), u, e


def test_gate_saturation_all_ones_gives_candidate():
    model = tiny_model()
    batch = tiny_batch()
    proc = model.processors[0]
    proc.params["gate_b"].data[:] = 1e4
    state, u, e = run_one_step(model, "find_min", batch)
    proc.params["gate_b"].data[:] = -1e4
    state0, _, _ = run_one_step(model, "find_min", batch)
    # saturated-closed gates keep the zero initial state exactly
    assert np.all(state0.h.data == 0.0)
    # saturated-open gates: second step from h replays the candidate exactly
    assert np.any(state.h.data != 0.0)


def test_gate_zero_is_fixpoint_across_steps():
    model = tiny_model()
    batch = tiny_batch()
    model.processors[0].params["gate_b"].data[:] = -1e4
    head = model.heads["find_min"]
    u, e, g = encode_step(head, batch.inputs)
    state = init_state(model, (batch.size,), batch.n)
    for _ in range(3):
        state = processor_step(model, state, u, e, None, g)
        assert np.all(state.h.data == 0.0)


def test_full_processor_step_gradient():
    model = tiny_model(latent=6)
    batch = tiny_batch(n=4, count=1)
    head = model.heads["find_min"]
    u, e, g = encode_step(head, batch.inputs)
    rng = Rng(3)

    def f(h):
        state = processor_step(model, type(init_state(model, (1,), 4))(h), u, e, None, g)
        return ad.mean_all(ad.elementwise_mul(state.h, ad.constant(proj)))

    proj = rng.uniform(-1, 1, (1, 4, 6))
    for _ in range(3):
        h0 = Tensor(rng.uniform(-1, 1, (1, 4, 6)), requires_grad=True)
        assert grad_check(f, h0) < 1e-4


def test_processor_param_gradients():
    model = tiny_model(latent=6)
    batch = tiny_batch(n=4, count=1)
    head = model.heads["find_min"]
    u, e, g = encode_step(head, batch.inputs)
    proj = Rng(4).uniform(-1, 1, (1, 4, 6))

    for pname in ("msg_src", "msg_w2", "out_w", "gate_w", "msg_b1"):
        p = model.processors[0].params[pname]

        def f(_t):
            state = init_state(model, (1,), 4)
            out = processor_step(model, state, u, e, None, g)
            return ad.mean_all(ad.elementwise_mul(out.h, ad.constant(proj)))

        assert grad_check(f, p) < 1e-4, pname


def test_processor_params_independent_of_n():
    model = tiny_model()
    count = model.param_count()
    for n in (4, 7, 11):
        batch = tiny_batch(n=n)
        run_one_step(model, "find_min", batch)
    assert model.param_count() == count


def test_permutation_equivariance():
    algo = "bellman_ford"
    model = build_model(16, Rng(6), head_specs={algo: algo_feature_specs(algo)})
    rng = Rng(7)
    traj = sample_trajectory(algo, 7, rng)
    batch = collate([traj])
    result = run_batch(model, batch, "eval")
    spec = traj.spec_named("pi_out")
    logits = result.output_preds[spec][0]

    perm = np.array(Rng(8).permutation(7))
    inv = np.argsort(perm)
    # relabel node i -> inv[perm...]: feature arrays permuted consistently
    permuted_inputs = {}
    for s, value in batch.inputs.items():
        v = value[0]
        if s.location == "node":
            permuted_inputs[s] = v[perm][None]
        else:
            permuted_inputs[s] = v[perm][:, perm][None]
    permuted_hints = {}
    for s, value in batch.hints.items():
        v = value[0]
        if s.kind == "pointer":
            permuted_hints[s] = inv[v][:, perm][None]
        elif s.location == "node":
            permuted_hints[s] = v[:, perm][None]
        else:
            permuted_hints[s] = v[:, perm][:, :, perm][None]
    permuted_outputs = {spec: inv[batch.outputs[spec][0]][perm][None]}

    from algoreason.model import rollout

    res2 = rollout(model, algo, permuted_inputs, permuted_hints, permuted_outputs,
                   batch.T, mode="eval")
    logits2 = res2.output_preds[spec][0]
    assert np.max(np.abs(logits2 - logits[perm][:, perm])) <= 1e-9


# --- decoding ------------------------------------------------------------------


def test_decode_zero_latents_and_features_is_bias():
    model = tiny_model()
    specs = algo_feature_specs("find_min")
    feats = {specs["pos"]: np.zeros((2, 4)), specs["values"]: np.zeros((2, 4)),
             specs["adj"]: np.zeros((2, 4, 4))}
    head = model.heads["find_min"]
    u, e, g = encode_step(head, feats)
    state = init_state(model, (2,), 4)
    preds = decode_step(head, state, e, "output", u)
    spec = head.specs["argmin_out"]
    bias = head.params["dec.argmin_out.b"].data[0]
    assert np.allclose(preds[spec].data, bias, atol=1e-15)


def test_pointer_logits_shape():
    algo = "bellman_ford"
    model = build_model(8, Rng(9), head_specs={algo: algo_feature_specs(algo)})
    batch = tiny_batch(algo, n=6, count=2)
    result = run_batch(model, batch, "eval")
    spec = model.heads[algo].specs["pi_out"]
    assert result.output_preds[spec].shape == (2, 6, 6)


def test_pointer_argmax_invariant_to_row_shift():
    logits = Rng(10).uniform(-1, 1, (5, 5))
    shifted = logits + Rng(11).uniform(-3, 3, (5, 1))
    assert np.array_equal(np.argmax(logits, -1), np.argmax(shifted, -1))


# --- rollout --------------------------------------------------------------------


def test_rollout_t1_single_step_loss():
    model = tiny_model()
    traj = sample_trajectory("find_min", 1, Rng(12))
    assert traj.T == 1
    batch = collate([traj])
    result = run_batch(model, batch, "train")
    assert result.hint_loss is not None
    got = result.hint_loss.item() + result.output_loss.item()
    assert abs(result.loss.item() - got) < 1e-12


def test_rollout_losses_finite_and_decrease_on_fixed_batch():
    model = tiny_model(latent=16)
    batch = tiny_batch(n=6, count=8, seed=13)
    opt = AdamState(lr=3e-3)
    first = run_batch(model, batch, "train").loss.item()
    assert np.isfinite(first)
    for _ in range(50):
        last = train_step(model, batch, opt)
    assert np.isfinite(last) and last < first


def test_rollout_deterministic():
    model = tiny_model()
    batch = tiny_batch()
    a = run_batch(model, batch, "eval").loss.item()
    b = run_batch(model, batch, "eval").loss.item()
    assert a == b


# --- co_forward ------------------------------------------------------------------


def co_inputs(n=6, seed=14):
    from algoreason.co_tasks import TspInstance, tsp_input_features
    from algoreason.graphs import gen_euclidean_complete

    g = gen_euclidean_complete(n, Rng(seed))
    feats = tsp_input_features(TspInstance(g, 0))
    return {spec: v[None] for spec, v in feats.items()}


def test_co_forward_zero_steps_decodes_bias():
    model = build_model(8, Rng(15), head_specs={"tsp": co_feature_specs("tsp")})
    preds = co_forward(model, "tsp", co_inputs(), steps=0)
    spec = model.heads["tsp"].specs["tour_pred"]
    logits = preds[spec].data
    assert logits.shape == (1, 6, 6)
    # zero latents: q.k term is 0, only the edge-encoding term varies


def test_co_forward_deterministic_and_shape():
    model = build_model(8, Rng(16), head_specs={"tsp": co_feature_specs("tsp")})
    spec = model.heads["tsp"].specs["tour_pred"]
    a = co_forward(model, "tsp", co_inputs(), steps=6)[spec].data
    b = co_forward(model, "tsp", co_inputs(), steps=6)[spec].data
    assert np.array_equal(a, b)
    assert a.shape == (1, 6, 6)


# --- edge-hidden-state variant ------------------------------------------------------


def test_edge_state_variant_runs_and_learns_shape():
    model = tiny_model(edge_state=True)
    batch = tiny_batch()
    result = run_batch(model, batch, "train")
    assert np.isfinite(result.loss.item())
    result.loss.backward()
    assert any("emsg_he" in k for k in model.named_params())


def test_edge_state_gradient():
    model = tiny_model(latent=5, edge_state=True)
    batch = tiny_batch(n=4, count=1)
    head = model.heads["find_min"]
    u, e, g = encode_step(head, batch.inputs)
    proj = Rng(17).uniform(-1, 1, (1, 4, 5))
    p = model.processors[0].params["eout_src"]

    def f(_t):
        state = init_state(model, (1,), 4)
        out = processor_step(model, state, u, e, None, g)
        out = processor_step(model, out, u, e, None, g)  # edge state feeds step 2
        return ad.mean_all(ad.elementwise_mul(out.h, ad.constant(proj)))

    assert grad_check(f, p) < 1e-4


# --- accuracy metric ------------------------------------------------------------------


def pointer_spec():
    return FeatureSpec("p", "output", "node", "pointer")


def test_eval_accuracy_perfect_and_zero():
    spec = pointer_spec()
    target = np.array([[1, 2, 0]])
    perfect = np.zeros((1, 3, 3))
    perfect[0, np.arange(3), target[0]] = 5.0
    assert eval_accuracy({spec: perfect}, {spec: target}) == {"p": 1.0}
    wrong = np.zeros((1, 3, 3))
    wrong[0, np.arange(3), (target[0] + 1) % 3] = 5.0
    assert eval_accuracy({spec: wrong}, {spec: target}) == {"p": 0.0}


def test_eval_accuracy_random_pointer_near_one_over_n():
    spec = pointer_spec()
    rng = Rng(18)
    n = 8
    logits = rng.uniform(-1, 1, (4000, n, n))
    target = np.asarray(rng.integers(0, n, (4000, n)))
    acc = eval_accuracy({spec: logits}, {spec: target})["p"]
    assert abs(acc - 1.0 / n) < 0.01


def test_eval_accuracy_scalar_tolerance():
    spec = FeatureSpec("s", "output", "node", "scalar")
    target = np.linspace(0.0, 1.0, 10)[None]
    close = target + 5e-4
    far = target + 5e-2
    assert eval_accuracy({spec: close}, {spec: target})["s"] == 1.0
    assert eval_accuracy({spec: far}, {spec: target})["s"] == 0.0


# --- checkpoints ------------------------------------------------------------------------


def test_checkpoint_round_trip_bit_exact(tmp_path):
    model = build_model(8, Rng(19), head_specs={
        "bellman_ford": algo_feature_specs("bellman_ford"),
        "tsp": co_feature_specs("tsp"),
    })
    path = tmp_path / "ck.json"
    save_checkpoint(model, path, AdamState())
    again = load_checkpoint(path)
    for name, p in model.named_params().items():
        assert np.array_equal(again.named_params()[name].data, p.data)
    path2 = tmp_path / "ck2.json"
    save_checkpoint(again, path2, AdamState())
    assert path.read_text() == path2.read_text()


def test_checkpoint_reload_reproduces_predictions(tmp_path):
    algo = "bellman_ford"
    model = build_model(12, Rng(20), head_specs={algo: algo_feature_specs(algo)})
    batch = tiny_batch(algo, n=6, count=2, seed=21)
    opt = AdamState()
    for _ in range(3):
        train_step(model, batch, opt)
    before = run_batch(model, batch, "eval")
    save_checkpoint(model, tmp_path / "ck.json")
    reloaded = load_checkpoint(tmp_path / "ck.json")
    after = run_batch(reloaded, batch, "eval")
    spec = model.heads[algo].specs["pi_out"]
    assert np.array_equal(before.output_preds[spec], after.output_preds[spec])
