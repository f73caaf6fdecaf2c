"""Encoder shape contracts, equivariances, speaker split/merge wiring."""

import numpy as np
import pytest

import strategyseq as S
from strategyseq.autodiff import Tape, Tensor, backward, ops
from strategyseq.encoders import (
    ContextEncoder,
    EncoderConfig,
    build_merged,
    encode_speaker_specific,
    split_positions,
)


def enc(kind="transformer", hidden=8, layers=1, heads=2, input_dim=6, seed=0,
        **kw):
    cfg = EncoderConfig(kind=kind, layers=layers, heads=heads, hidden=hidden,
                        dropout=0.0, **kw)
    return ContextEncoder(input_dim, cfg, np.random.default_rng(seed))


class TestShapes:
    @pytest.mark.parametrize("kind", ["transformer", "lstm", "bilstm", "none"])
    @pytest.mark.parametrize("t", [1, 2, 7, 40])
    def test_output_shape(self, kind, t, rng):
        for heads in (1, 2):
            for layers in (1, 2):
                e = enc(kind=kind, hidden=8, layers=layers, heads=heads)
                out = e(Tensor(rng.standard_normal((t, 6))))
                assert out.shape == (t, 8)

    def test_config_validation(self):
        with pytest.raises(ValueError, match="divisible"):
            EncoderConfig(kind="transformer", hidden=6, heads=4).validate()
        with pytest.raises(ValueError, match="unknown encoder kind"):
            EncoderConfig(kind="gru").validate()
        with pytest.raises(ValueError, match="layer"):
            EncoderConfig(layers=0, hidden=8, heads=2).validate()
        with pytest.raises(ValueError, match="even"):
            EncoderConfig(kind="bilstm", hidden=7).validate()

    def test_empty_input_rejected(self, rng):
        e = enc()
        with pytest.raises(ValueError, match="at least one row"):
            e(Tensor(np.zeros((0, 6))))


class TestSinglePosition:
    def test_attention_mixing_is_noop_at_t1(self, rng):
        # with one position the softmax over keys is identically 1, so the
        # output cannot depend on the query/key projections at all
        e = enc(kind="transformer", layers=1, heads=2, use_positional=False)
        x = Tensor(rng.standard_normal((1, 6)))
        base = e(x).data.copy()
        for block in e.blocks:
            for w in block.attn.wq + block.attn.wk:
                w.data = rng.standard_normal(w.data.shape).astype(w.data.dtype)
        assert np.allclose(e(x).data, base, atol=1e-6)


class TestPermutationEquivariance:
    @pytest.mark.parametrize("layers", [1, 2])
    def test_pure_attention_is_equivariant(self, layers, rng):
        e = enc(kind="transformer", layers=layers, heads=2, use_positional=False)
        x = rng.standard_normal((7, 6))
        perm = rng.permutation(7)
        out = e(Tensor(x)).data
        out_perm = e(Tensor(x[perm])).data
        assert np.allclose(out_perm, out[perm], atol=1e-5)

    def test_positional_signal_breaks_equivariance(self, rng):
        e = enc(kind="transformer", layers=1, heads=2, use_positional=True)
        x = rng.standard_normal((7, 6))
        perm = np.roll(np.arange(7), 1)
        out = e(Tensor(x)).data
        out_perm = e(Tensor(x[perm])).data
        assert not np.allclose(out_perm, out[perm], atol=1e-5)


class TestSpeakerSpecific:
    def test_single_role_input_gives_empty_other_side(self, rng):
        er_enc, ee_enc = enc(seed=1, input_dim=8), enc(seed=2, input_dim=8)
        inter = Tensor(rng.standard_normal((4, 8)))
        er_out, ee_out, er_pos, ee_pos = encode_speaker_specific(
            inter, [0, 0, 0, 0], er_enc, ee_enc)
        assert ee_out is None and len(ee_pos) == 0
        assert er_out.shape == (4, 8)

    def test_parameters_are_disjoint(self, rng):
        er_enc, ee_enc = enc(seed=1, input_dim=8), enc(seed=2, input_dim=8)
        inter = Tensor(rng.standard_normal((5, 8)))
        roles = [0, 1, 0, 1, 1]
        er_before, _, _, _ = encode_speaker_specific(inter, roles, er_enc, ee_enc)
        for _, p in ee_enc.named_parameters():
            p.data = p.data + 10.0
        er_after, ee_after, _, _ = encode_speaker_specific(inter, roles, er_enc, ee_enc)
        assert np.array_equal(er_before.data, er_after.data)

    def test_identity_initialized_encoder_passes_inter_rows_through(self, rng):
        er_enc = enc(kind="none", input_dim=8, hidden=8, seed=1)
        ee_enc = enc(kind="none", input_dim=8, hidden=8, seed=2)
        for e in (er_enc, ee_enc):
            e.proj.weight.data = np.eye(8, dtype=e.proj.weight.data.dtype)
            e.proj.bias.data[:] = 0
        inter = Tensor(rng.standard_normal((6, 8)))
        roles = [0, 1, 1, 0, 1, 0]
        er_out, ee_out, er_pos, ee_pos = encode_speaker_specific(
            inter, roles, er_enc, ee_enc)
        assert np.allclose(er_out.data, inter.data[er_pos], atol=1e-6)
        assert np.allclose(ee_out.data, inter.data[ee_pos], atol=1e-6)


class TestBuildMerged:
    def test_hand_constructed_toy(self):
        inter = Tensor(np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]))
        er_out = Tensor(np.array([[10.0, 20.0], [50.0, 60.0]]))
        ee_out = Tensor(np.array([[30.0, 40.0]]))
        merged = build_merged(inter, er_out, ee_out, np.array([0, 2]), np.array([1]))
        want = np.array([
            [10.0, 20.0, 1.0, 2.0],
            [30.0, 40.0, 3.0, 4.0],
            [50.0, 60.0, 5.0, 6.0],
        ])
        assert np.array_equal(merged.data, want)

    def test_width_is_twice_depth(self, rng):
        inter = Tensor(rng.standard_normal((5, 8)))
        er_pos, ee_pos = split_positions([0, 1, 0, 1, 1])
        er_out = Tensor(rng.standard_normal((2, 8)))
        ee_out = Tensor(rng.standard_normal((3, 8)))
        merged = build_merged(inter, er_out, ee_out, er_pos, ee_pos)
        assert merged.shape == (5, 16)

    def test_column_split_round_trip(self, rng):
        inter = Tensor(rng.standard_normal((6, 4)))
        roles = [1, 0, 0, 1, 0, 1]
        er_pos, ee_pos = split_positions(roles)
        er_out = Tensor(rng.standard_normal((3, 4)))
        ee_out = Tensor(rng.standard_normal((3, 4)))
        merged = build_merged(inter, er_out, ee_out, er_pos, ee_pos).data
        specific, inter_cols = merged[:, :4], merged[:, 4:]
        assert np.array_equal(inter_cols, inter.data)
        assert np.array_equal(specific[er_pos], er_out.data)
        assert np.array_equal(specific[ee_pos], ee_out.data)

    def test_single_role_merge(self, rng):
        inter = Tensor(rng.standard_normal((3, 4)))
        er_pos = np.array([0, 1, 2])
        er_out = Tensor(rng.standard_normal((3, 4)))
        merged = build_merged(inter, er_out, None, er_pos, np.array([], dtype=np.intp))
        assert merged.shape == (3, 8)
        assert np.array_equal(merged.data[:, :4], er_out.data)


class TestGradientFlow:
    @pytest.mark.parametrize("variant", ["transformers-extcrf", "clstms",
                                         "clstms-extcrf"])
    def test_every_parameter_gets_gradient(self, variant, rng):
        corpus, er, ee = S.synthetic_corpus(6, seed=3)
        store = S.synth_features(corpus, dim=6, seed=1)
        insts = S.instances_from_corpus(corpus, store)
        model = S.StrategyModel(variant, 6, len(er), len(ee), hidden=8, heads=2,
                                seed=0)
        with Tape():
            loss = S.total_loss(model, insts, l2_weight=0.0, training=True,
                                rng=rng)
            backward(loss)
        zero_grads = [
            name for name, p in model.named_parameters()
            if p.grad is None or not np.any(p.grad != 0)
        ]
        assert zero_grads == []
