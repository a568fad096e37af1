from __future__ import annotations

import json
import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from compcap.channels import (
    HYPOTHESIS_REJECT,
    NEG_SENTINEL,
    Channel,
    ChannelFamily,
    bec,
    binary_entropy,
    block_distribution,
    block_masses,
    bsc,
    builtin_family,
    capacity_ba,
    density_table,
    info_density,
    load_family,
    mutual_information,
    output_marginal,
    resolve_family,
    validate_family,
    z_channel,
)
from compcap.errors import (
    DegenerateChannel,
    InvalidChannel,
    MismatchedInputAlphabet,
    NoConvergence,
    NonStochasticRow,
    ParameterOutOfRange,
    UnknownFamily,
)


def h2(q: float) -> float:
    return -q * math.log2(q) - (1 - q) * math.log2(1 - q)


def binary_capacity_by_scan(W: np.ndarray) -> float:
    """Independent capacity oracle for binary-input channels."""
    def neg_mi(a: float) -> float:
        p = np.array([a, 1 - a])
        q = p @ W
        hy = -sum(v * math.log2(v) for v in q if v > 0)
        hyx = -sum(p[x] * sum(v * math.log2(v) for v in W[x] if v > 0) for x in range(2))
        return -(hy - hyx)

    res = minimize_scalar(neg_mi, bounds=(0, 1), method="bounded", options={"xatol": 1e-12})
    return -res.fun


class TestChannel:
    def test_rejects_non_stochastic_row(self):
        with pytest.raises(NonStochasticRow) as info:
            Channel("bad", [[0.5, 0.4], [0.0, 1.0]])
        assert info.value.row == 0
        assert info.value.total == pytest.approx(0.9)

    def test_row_tolerance(self):
        Channel("ok", [[0.5, 0.5 + 5e-10], [0.0, 1.0]])
        with pytest.raises(NonStochasticRow):
            Channel("bad", [[0.5, 0.5 + 1e-8], [0.0, 1.0]])

    @pytest.mark.parametrize(
        "matrix",
        [[[1.0, 0.0]], [[1.5, -0.5], [0.0, 1.0]], [1.0, 0.0], [[np.nan, 1.0], [0.0, 1.0]]],
    )
    def test_rejects_malformed(self, matrix):
        with pytest.raises(InvalidChannel):
            Channel("bad", matrix)

    def test_matrix_is_read_only(self):
        ch = bsc(0.1)
        with pytest.raises(ValueError):
            ch.matrix[0, 0] = 0.5


class TestMutualInformation:
    @pytest.mark.parametrize("q", [0.05, 0.11, 0.25, 0.4])
    def test_bsc_uniform(self, q):
        assert mutual_information(bsc(q), [0.5, 0.5]) == pytest.approx(1 - h2(q), abs=1e-12)

    def test_expected_info_density_equals_mi(self):
        rng = np.random.default_rng(3)
        W = rng.dirichlet(np.ones(4), size=3)
        p = rng.dirichlet(np.ones(3))
        expected = sum(
            p[x] * W[x, y] * info_density(W, p, x, y) for x in range(3) for y in range(4) if W[x, y] > 0
        )
        assert expected == pytest.approx(mutual_information(W, p), abs=1e-12)

    def test_density_sentinels(self):
        W = bec(0.3).matrix
        assert info_density(W, [0.5, 0.5], 0, 1) == NEG_SENTINEL
        # Output 1 is impossible when only input 0 is used.
        W2 = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert info_density(W2, [1.0, 0.0], 1, 1) == HYPOTHESIS_REJECT
        dens, rejected = density_table(W2, np.array([1.0, 0.0]))
        assert rejected.tolist() == [False, True]
        assert dens[0, 0] == 0.0 and dens[1, 0] == NEG_SENTINEL

    def test_output_marginal_sums_to_one(self):
        q = output_marginal(z_channel(0.3), [0.2, 0.8])
        np.testing.assert_allclose(q, [0.2 + 0.8 * 0.3, 0.8 * 0.7])

    def test_zero_for_point_mass(self):
        assert mutual_information(bsc(0.1), [1.0, 0.0]) == 0.0


class TestCapacity:
    @pytest.mark.parametrize("q", [0.05, 0.11, 0.25])
    def test_bsc(self, q):
        c, p = capacity_ba(bsc(q))
        assert c == pytest.approx(1 - h2(q), abs=1e-9)
        np.testing.assert_allclose(p, [0.5, 0.5])

    def test_bec(self):
        c, _ = capacity_ba(bec(0.3))
        assert c == pytest.approx(0.7, abs=1e-9)

    @pytest.mark.parametrize("z", [0.1, 0.5, 0.9])
    def test_z_channel_closed_form(self, z):
        closed = math.log2(1 + (1 - z) * z ** (z / (1 - z)))
        c, _ = capacity_ba(z_channel(z))
        assert c == pytest.approx(closed, abs=1e-8)

    def test_matches_scan_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            W = rng.dirichlet(np.ones(3), size=2)
            c, _ = capacity_ba(W)
            assert c == pytest.approx(binary_capacity_by_scan(W), abs=1e-7)

    def test_kkt_conditions(self):
        rng = np.random.default_rng(5)
        W = rng.dirichlet(np.ones(5), size=4)
        c, p = capacity_ba(W)
        q = p @ W
        D = (W * np.log2(W / q)).sum(axis=1)
        assert D.max() <= c + 1e-8
        np.testing.assert_allclose(D[p > 1e-6], c, atol=1e-6)

    def test_no_convergence(self):
        with pytest.raises(NoConvergence):
            capacity_ba(z_channel(0.3), tol=1e-15, max_iters=3)

    def test_binary_entropy(self):
        assert binary_entropy(0.5) == 1.0
        assert binary_entropy(0.0) == 0.0


class TestFamily:
    def test_t_star(self):
        fam = ChannelFamily.from_channels([bsc(0.1), bsc(0.2)])
        for c, t in zip(fam.capacities, fam.t_star):
            assert t == pytest.approx(1 / c)

    def test_mismatched_inputs(self):
        with pytest.raises(MismatchedInputAlphabet):
            ChannelFamily.from_channels([bsc(0.1), Channel("tri", np.eye(3))])

    def test_degenerate(self):
        with pytest.raises(DegenerateChannel):
            ChannelFamily.from_channels([Channel("flat", [[0.5, 0.5], [0.5, 0.5]])])

    def test_bilingual_capacities(self):
        fam = builtin_family("bilingual", W1=31, W2=2)
        np.testing.assert_allclose(fam.capacities, [5.0, math.log2(3)], atol=1e-6)

    @pytest.mark.parametrize("eps", [0.1, 0.5, 0.9])
    def test_bilingual_erasure_capacities(self, eps):
        fam = builtin_family("bilingual_erasure", eps=eps)
        np.testing.assert_allclose(fam.capacities, [eps, 1.0], atol=1e-8)

    def test_builtin_errors(self):
        with pytest.raises(UnknownFamily):
            builtin_family("nope")
        with pytest.raises(ParameterOutOfRange):
            builtin_family("zs", z=1.5)
        with pytest.raises(ParameterOutOfRange):
            builtin_family("bilingual", W1=2.5)

    def test_resolve_builtin_uri(self):
        fam = resolve_family("builtin:zs?z=0.3&s=0.4")
        assert fam.params == {"z": 0.3, "s": 0.4}
        with pytest.raises(ParameterOutOfRange):
            resolve_family("builtin:zs?z=abc")

    def test_json_round_trip(self, tmp_path):
        fam = builtin_family("bsc_pair", q1=0.1, q2=0.3)
        path = tmp_path / "pair.json"
        path.write_text(json.dumps(fam.to_dict()))
        loaded = load_family(path)
        assert loaded.channels == fam.channels
        np.testing.assert_allclose(loaded.capacities, fam.capacities)

    def test_validate_checks_declared_sizes(self):
        raw = {"input_alphabet": 3, "channels": [{"name": "a", "matrix": [[1, 0], [0, 1]]}]}
        with pytest.raises(MismatchedInputAlphabet):
            validate_family(raw)
        raw = {"channels": [{"name": "a", "outputs": 3, "matrix": [[1, 0], [0, 1]]}]}
        with pytest.raises(InvalidChannel):
            validate_family(raw)
        with pytest.raises(InvalidChannel):
            validate_family({"channels": []})

    def test_blocks(self):
        fam = builtin_family("bilingual_erasure", eps=0.5)
        p = block_distribution(fam, (0.3, 0.7))
        np.testing.assert_allclose(p, [0.15, 0.15, 0.35, 0.35])
        np.testing.assert_allclose(block_masses(fam, p), [0.3, 0.7])
