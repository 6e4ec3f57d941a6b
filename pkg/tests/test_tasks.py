"""Task heads: pilot patterns and observations, antenna selection and spline
initialization, feedback projection/quantization, the three closed-form
proximal steps (checked against independent oracles), and end-to-end task
wiring with oracle denoisers."""

import numpy as np
import pytest

from oracles import (
    ae_as_pilot_problem,
    ce_objective_and_grad,
    cf_prox_dense,
    natural_spline_eval,
    prox_quadratic_gd,
)
from pnp_csi.channel_model import ad2sf, sf2ad
from pnp_csi.denoiser import shrink_denoise
from pnp_csi.hqs import SolverConfig
from pnp_csi.tasks import (
    AntennaSelection,
    FeedbackCode,
    PilotObservation,
    PilotPattern,
    SvdCache,
    compress,
    dequantize_uniform,
    ls_init,
    make_projection,
    make_svd_cache,
    observe_antennas,
    observe_pilots,
    pack_csi,
    pppae,
    pppae_batch,
    pppce,
    pppce_batch,
    pppcf,
    pppcf_batch,
    prox_ae,
    prox_ce,
    prox_cf,
    quantize_uniform,
    spline_init,
    unpack_csi,
)


def rand_c(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestPilotPattern:
    def test_paper_scale_presets(self):
        counts = {"A": 128, "B": 128, "C": 256, "D": 256}
        rows = {"A": {0, 64, 128, 192}, "B": {32, 96, 160, 224}}
        for name, count in counts.items():
            pat = PilotPattern.preset(name, 256, 32)
            assert pat.mask.sum() == count
            assert np.all(pat.mask.sum(axis=0) >= 1)
        for name, expect in rows.items():
            pat = PilotPattern.preset(name, 256, 32)
            assert set(np.nonzero(pat.mask[:, 0])[0]) == expect
        a = PilotPattern.preset("A", 256, 32)
        b = PilotPattern.preset("B", 256, 32)
        assert not np.any(a.mask & b.mask)  # same spacing, different positions

    def test_desk_scale_presets(self):
        # pilot counts are grid-independent: 4 rows for A/B, 8 for C/D
        a = PilotPattern.preset("A", 64, 32)
        c = PilotPattern.preset("C", 64, 32)
        assert a.mask.sum() == 128
        assert c.mask.sum() == 256
        assert set(np.nonzero(a.mask[:, 0])[0]) == {0, 16, 32, 48}
        assert set(np.nonzero(c.mask[:, 0])[0]) == set(range(0, 64, 8))
        assert set(np.nonzero(PilotPattern.preset("B", 64, 32).mask[:, 0])[0]) \
            == {8, 24, 40, 56}

    def test_preset_needs_divisible_grid(self):
        with pytest.raises(ValueError, match="divisible"):
            PilotPattern.preset("A", 66, 32)
        with pytest.raises(ValueError, match="divisible"):
            PilotPattern.preset("C", 8, 4)  # spacing would be 1

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            PilotPattern.preset("Z", 64, 32)

    def test_column_without_pilot_rejected(self):
        mask = np.zeros((8, 3), bool)
        mask[0, :2] = True  # column 2 has no pilot
        with pytest.raises(ValueError):
            PilotPattern(mask)

    def test_file_round_trip(self, tmp_path):
        pat = PilotPattern.preset("C", 64, 16)
        path = tmp_path / "pat.txt"
        pat.to_file(path)
        again = PilotPattern.from_file(path, 64, 16)
        assert np.array_equal(again.mask, pat.mask)

    def test_file_parsing_and_bounds(self, tmp_path):
        path = tmp_path / "pat.txt"
        path.write_text("# subcarrier antenna\n0 0\n3 1\n0 1\n")
        pat = PilotPattern.from_file(path, 4, 2)
        assert pat.mask.sum() == 3
        assert pat.mask[3, 1] and pat.mask[0, 0] and pat.mask[0, 1]
        path.write_text("9 0\n0 1\n")
        with pytest.raises(ValueError, match="out of range"):
            PilotPattern.from_file(path, 4, 2)
        path.write_text("0 0 7\n")
        with pytest.raises(ValueError, match="line 1"):
            PilotPattern.from_file(path, 4, 2)


class TestObservePilots:
    def test_unit_modulus_qpsk_symbols(self):
        rng = np.random.default_rng(0)
        pat = PilotPattern.preset("C", 64, 8)
        H = rand_c(rng, (64, 8))
        obs = observe_pilots(H, pat, np.inf, rng)
        m = pat.mask
        assert np.allclose(np.abs(obs.x[m]), 1.0)
        assert np.all(obs.x[~m] == 0)
        # alphabet is the four QPSK points
        pts = np.unique(np.round(obs.x[m] * np.sqrt(2), 6))
        assert set(pts) <= {(1 + 1j), (1 - 1j), (-1 + 1j), (-1 - 1j)}

    def test_noiseless_observation_is_product(self):
        rng = np.random.default_rng(1)
        pat = PilotPattern.preset("A", 64, 8)
        H = rand_c(rng, (64, 8))
        obs = observe_pilots(H, pat, np.inf, rng)
        m = pat.mask
        assert np.allclose(obs.y[m], H[m] * obs.x[m])
        assert obs.sigma2 == 0.0

    def test_noise_level_and_determinism(self):
        rng = np.random.default_rng(2)
        pat = PilotPattern.preset("C", 256, 32)
        H = rand_c(rng, (256, 32))
        H *= np.sqrt(H.size) / np.linalg.norm(H)
        obs = observe_pilots(H, pat, 10.0, np.random.default_rng(5))
        assert obs.sigma2 == pytest.approx(0.1, rel=1e-9)
        w = obs.y[pat.mask] - H[pat.mask] * obs.x[pat.mask]
        assert np.mean(np.abs(w) ** 2) == pytest.approx(0.1, rel=0.2)
        obs2 = observe_pilots(H, pat, 10.0, np.random.default_rng(5))
        assert np.array_equal(obs.y, obs2.y)
        assert np.array_equal(obs.x, obs2.x)


class TestLsInit:
    def test_exact_at_pilots_noiseless(self):
        rng = np.random.default_rng(3)
        pat = PilotPattern.preset("C", 64, 8)
        H = rand_c(rng, (64, 8))
        obs = observe_pilots(H, pat, np.inf, rng)
        h0 = ls_init(obs, pat)
        assert np.allclose(h0[pat.mask], H[pat.mask])

    def test_nearest_pilot_hold_with_tie_to_lower(self):
        mask = np.zeros((7, 1), bool)
        mask[[1, 5], 0] = True
        pat = PilotPattern(mask)
        x = np.zeros((7, 1), complex)
        y = np.zeros((7, 1), complex)
        x[[1, 5], 0] = 1.0
        y[1, 0] = 10.0
        y[5, 0] = 50.0
        obs = PilotObservation(x=x, y=y, sigma2=0.0)
        h0 = ls_init(obs, pat)
        # rows 0..2 nearest to pilot 1; row 3 ties (dist 2) -> lower row 1;
        # rows 4..6 nearest to pilot 5
        assert np.allclose(h0[:, 0], [10, 10, 10, 10, 50, 50, 50])

    def test_zero_pilot_symbol_rejected(self):
        mask = np.ones((2, 1), bool)
        pat = PilotPattern(mask)
        x = np.array([[1.0], [0.0]], complex)
        y = np.ones((2, 1), complex)
        obs = PilotObservation(x=x, y=y, sigma2=0.0)
        with pytest.raises(ValueError, match="zero pilot"):
            ls_init(obs, pat)


class TestProxCe:
    def test_off_pilot_entries_keep_z(self):
        rng = np.random.default_rng(4)
        pat = PilotPattern.preset("A", 64, 4)
        H = rand_c(rng, (64, 4))
        obs = observe_pilots(H, pat, 10.0, rng)
        z = rand_c(rng, (64, 4))
        out = prox_ce(obs, pat, z, rho=0.5)
        assert np.array_equal(out[~pat.mask], z[~pat.mask])
        assert not np.allclose(out[pat.mask], z[pat.mask])

    def test_rho_limits(self):
        rng = np.random.default_rng(5)
        pat = PilotPattern.preset("C", 32, 4)
        H = rand_c(rng, (32, 4))
        obs = observe_pilots(H, pat, np.inf, rng)
        z = rand_c(rng, (32, 4))
        big = prox_ce(obs, pat, z, rho=1e12)
        assert np.allclose(big, z, atol=1e-9)
        small = prox_ce(obs, pat, z, rho=1e-12)
        m = pat.mask
        assert np.allclose(small[m], obs.y[m] / obs.x[m], atol=1e-9)

    def test_matches_gradient_descent_oracle(self):
        rng = np.random.default_rng(6)
        mask = rng.random((8, 8)) < 0.4
        mask[0] = True  # every column gets at least one pilot
        pat = PilotPattern(mask)
        for rho in (0.1, 1.0, 10.0):
            x = np.where(mask, np.exp(1j * rng.uniform(0, 2 * np.pi, (8, 8))), 0)
            y = np.where(mask, rand_c(rng, (8, 8)), 0)
            z = rand_c(rng, (8, 8))
            obs = PilotObservation(x=x, y=y, sigma2=0.1)
            got = prox_ce(obs, pat, z, rho)
            ref = prox_quadratic_gd(x, y, mask, rho, z)
            assert np.max(np.abs(got - ref)) / np.max(np.abs(ref)) < 1e-6

    def test_output_is_stationary_point(self):
        rng = np.random.default_rng(7)
        pat = PilotPattern.preset("C", 16, 4)
        H = rand_c(rng, (16, 4))
        obs = observe_pilots(H, pat, 5.0, rng)
        z = rand_c(rng, (16, 4))
        out = prox_ce(obs, pat, z, rho=0.7)
        _, g = ce_objective_and_grad(out, obs.x, obs.y, pat.mask, 0.7, z)
        assert np.max(np.abs(g)) < 1e-10

    def test_does_not_mutate_z(self):
        rng = np.random.default_rng(8)
        pat = PilotPattern.preset("A", 64, 4)
        obs = observe_pilots(rand_c(rng, (64, 4)), pat, 10.0, rng)
        z = rand_c(rng, (64, 4))
        keep = z.copy()
        prox_ce(obs, pat, z, 1.0)
        assert np.array_equal(z, keep)

    def test_nonpositive_rho_rejected(self):
        pat = PilotPattern.preset("A", 64, 4)
        obs = PilotObservation(x=np.ones((64, 4), complex),
                               y=np.ones((64, 4), complex), sigma2=0.0)
        with pytest.raises(ValueError):
            prox_ce(obs, pat, np.zeros((64, 4), complex), 0.0)


class TestAntennaSelection:
    def test_presets_one_based_odd_even(self):
        a = AntennaSelection.preset("A", 32)
        b = AntennaSelection.preset("B", 32)
        # "odd-numbered antennas" counts from 1, so preset A holds 0-based
        # even indices
        assert np.array_equal(a.indices, np.arange(0, 32, 2))
        assert np.array_equal(b.indices, np.arange(1, 32, 2))
        assert a.indices.size == b.indices.size == 16
        assert np.array_equal(a.complement, b.indices)
        assert np.array_equal(b.complement, a.indices)

    def test_validation(self):
        with pytest.raises(ValueError):
            AntennaSelection(indices=np.array([0, 0]), n_antennas=4)
        with pytest.raises(ValueError):
            AntennaSelection(indices=np.array([4]), n_antennas=4)
        with pytest.raises(ValueError):
            AntennaSelection(indices=np.array([], int), n_antennas=4)

    def test_observe_antennas_picks_columns(self):
        rng = np.random.default_rng(9)
        H = rand_c(rng, (8, 6))
        sel = AntennaSelection(indices=np.array([1, 4]), n_antennas=6)
        assert np.array_equal(observe_antennas(H, sel), H[:, [1, 4]])


class TestSplineInit:
    def test_reproduces_linear_rows_exactly(self):
        sel = AntennaSelection.preset("A", 16)
        k = np.arange(16)
        rows = (0.3 + 0.2j) * k[None, :] + (1.0 - 0.5j)
        rows = np.repeat(rows, 4, axis=0)
        h0 = spline_init(rows[:, sel.indices], sel, 16)
        assert np.max(np.abs(h0 - rows)) < 1e-10

    def test_knots_preserved(self):
        rng = np.random.default_rng(10)
        sel = AntennaSelection.preset("B", 32)
        H = rand_c(rng, (8, 32))
        h0 = spline_init(H[:, sel.indices], sel, 32)
        assert np.allclose(h0[:, sel.indices], H[:, sel.indices])

    def test_matches_tridiagonal_oracle(self):
        rng = np.random.default_rng(11)
        for name in ("A", "B"):
            sel = AntennaSelection.preset(name, 32)
            H = rand_c(rng, (6, 32))
            got = spline_init(H[:, sel.indices], sel, 32)
            xq = np.arange(32)
            re = natural_spline_eval(sel.indices, H[:, sel.indices].real.T, xq)
            im = natural_spline_eval(sel.indices, H[:, sel.indices].imag.T, xq)
            ref = (re + 1j * im).T
            assert np.max(np.abs(got - ref)) < 1e-9

    def test_too_few_antennas_rejected(self):
        sel = AntennaSelection(indices=np.array([2]), n_antennas=8)
        with pytest.raises(ValueError):
            spline_init(np.ones((4, 1), complex), sel, 8)


class TestProxAe:
    def test_formula_on_selected_columns(self):
        rng = np.random.default_rng(12)
        sel = AntennaSelection.preset("A", 8)
        h_sel = rand_c(rng, (6, 4))
        z = rand_c(rng, (6, 8))
        rho = 0.7
        out = prox_ae(h_sel, sel, z, rho)
        expect = (h_sel + rho * z[:, sel.indices]) / (1 + rho)
        assert np.allclose(out[:, sel.indices], expect)
        unsel = np.setdiff1d(np.arange(8), sel.indices)
        assert np.array_equal(out[:, unsel], z[:, unsel])

    def test_matches_gradient_descent_oracle(self):
        rng = np.random.default_rng(13)
        sel = AntennaSelection(indices=np.array([0, 3, 5]), n_antennas=8)
        h_sel = rand_c(rng, (8, 3))
        z = rand_c(rng, (8, 8))
        for rho in (0.1, 1.0, 10.0):
            got = prox_ae(h_sel, sel, z, rho)
            x, y, mask = ae_as_pilot_problem(h_sel, sel.indices, 8, 8)
            ref = prox_quadratic_gd(x, y, mask, rho, z)
            assert np.max(np.abs(got - ref)) / np.max(np.abs(ref)) < 1e-6

    def test_does_not_mutate_z(self):
        rng = np.random.default_rng(14)
        sel = AntennaSelection.preset("B", 8)
        z = rand_c(rng, (4, 8))
        keep = z.copy()
        prox_ae(rand_c(rng, (4, 4)), sel, z, 1.0)
        assert np.array_equal(z, keep)


class TestProjectionAndQuantizer:
    def test_projection_rows_orthonormal(self):
        rng = np.random.default_rng(15)
        a = make_projection(16, 64, rng)
        assert a.shape == (16, 64)
        assert np.max(np.abs(a @ a.T - np.eye(16))) < 1e-10

    def test_projection_deterministic_and_seed_sensitive(self):
        a = make_projection(8, 32, np.random.default_rng(1))
        b = make_projection(8, 32, np.random.default_rng(1))
        c = make_projection(8, 32, np.random.default_rng(2))
        assert np.array_equal(a, b)
        assert not np.allclose(a, c)

    def test_svd_cache_orthogonal_and_consistent(self):
        rng = np.random.default_rng(16)
        a = make_projection(8, 32, rng)
        cache = make_svd_cache(a)
        v = cache.v
        assert v.shape == (32, 32)
        assert np.max(np.abs(v @ v.T - np.eye(32))) < 1e-10
        # singular values of a row-orthonormal matrix are all 1
        s = np.linalg.svd(a, compute_uv=False)
        assert np.max(np.abs(s - 1.0)) < 1e-10
        assert cache.m == 8

    def test_quantizer_hand_case(self):
        # B=3 over [-4, 4]: step 1; 0.3 encodes to cell 4, decodes to 0.5
        codes = quantize_uniform(np.array([0.3]), 3, -4.0, 4.0)
        assert codes[0] == 4
        assert dequantize_uniform(codes, 3, -4.0, 4.0)[0] == pytest.approx(0.5)

    def test_quantizer_half_step_bound(self):
        rng = np.random.default_rng(17)
        for bits in (1, 3, 6):
            lo, hi = -2.5, 2.5
            delta = (hi - lo) / 2 ** bits
            v = rng.uniform(lo, hi, 300)
            v = np.append(v, [lo, hi])
            back = dequantize_uniform(quantize_uniform(v, bits, lo, hi),
                                      bits, lo, hi)
            assert np.max(np.abs(back - v)) <= delta / 2 + 1e-12

    def test_quantizer_clamps_out_of_range(self):
        codes = quantize_uniform(np.array([-10.0, 10.0]), 2, -1.0, 1.0)
        assert codes[0] == 0 and codes[1] == 3

    def test_compress_unquantized_is_exact_projection(self):
        rng = np.random.default_rng(18)
        a = make_projection(8, 32, rng)
        h = rng.standard_normal(32)
        code = compress(h, a, bits=None)
        assert np.allclose(code.y, a @ h)
        assert code.bits is None

    def test_compress_quantized_error_bound(self):
        rng = np.random.default_rng(19)
        a = make_projection(16, 64, rng)
        h = rng.standard_normal(64)
        exact = a @ h
        code = compress(h, a, bits=3)
        delta = 2 * code.q_range / 2 ** 3
        assert np.max(np.abs(code.y - exact)) <= delta / 2 + 1e-12
        assert code.q_range == pytest.approx(np.max(np.abs(exact)))

    def test_compress_zero_vector(self):
        rng = np.random.default_rng(20)
        a = make_projection(4, 16, rng)
        code = compress(np.zeros(16), a, bits=3)
        assert np.all(code.y == 0.0)

    def test_pack_unpack_round_trip(self):
        rng = np.random.default_rng(21)
        hbar = rand_c(rng, (4, 6))
        v = pack_csi(hbar)
        assert v.shape == (48,)
        assert np.array_equal(unpack_csi(v, 4, 6), hbar)
        assert v.dtype == np.float64


class TestProxCf:
    def test_matches_dense_inverse(self):
        rng = np.random.default_rng(22)
        n = 64
        for m in (8, 16, 32):
            a = make_projection(m, n, rng)
            cache = make_svd_cache(a)
            for rho in (0.1, 1.0, 10.0):
                h = rng.standard_normal(n)
                z = rng.standard_normal(n)
                code = compress(h, a, bits=None)
                got = prox_cf(code, cache, z, rho)
                ref = cf_prox_dense(a, code.y, z, rho)
                assert np.linalg.norm(got - ref) / np.linalg.norm(ref) < 1e-8

    def test_consistent_data_fixed_point(self):
        rng = np.random.default_rng(23)
        a = make_projection(8, 32, rng)
        cache = make_svd_cache(a)
        h = rng.standard_normal(32)
        code = compress(h, a, bits=None)
        out = prox_cf(code, cache, h.copy(), rho=0.5)
        assert np.allclose(out, h, atol=1e-10)

    def test_large_rho_returns_z(self):
        rng = np.random.default_rng(24)
        a = make_projection(8, 32, rng)
        cache = make_svd_cache(a)
        z = rng.standard_normal(32)
        code = compress(rng.standard_normal(32), a, bits=None)
        out = prox_cf(code, cache, z, rho=1e12)
        assert np.allclose(out, z, atol=1e-9)

    def test_shape_mismatch_rejected(self):
        rng = np.random.default_rng(25)
        a = make_projection(8, 32, rng)
        cache = make_svd_cache(make_projection(8, 16, rng))
        code = compress(rng.standard_normal(32), a, bits=None)
        with pytest.raises(ValueError):
            prox_cf(code, cache, np.zeros(32), 1.0)


class TestTaskPipelines:
    def test_pppce_oracle_denoiser_recovers_truth(self):
        rng = np.random.default_rng(26)
        ns, nt = 16, 8
        H = rand_c(rng, (ns, nt))
        pat = PilotPattern.preset("C", ns, nt)
        obs = observe_pilots(H, pat, np.inf, rng)
        den = lambda hb, s2: sf2ad(H, ns)
        h_hat, trace = pppce(obs, pat, den, SolverConfig(n_iters=3),
                             crop_rows=ns, ground_truth=H)
        assert np.allclose(h_hat, H, atol=1e-10)
        assert trace.nmse_db[-1] == -300.0

    def test_pppce_shrink_improves_over_init(self):
        rng = np.random.default_rng(27)
        ns, nt = 64, 32
        # sparse angular-delay truth: a few large coefficients
        hbar = np.zeros((ns, nt), complex)
        pos = rng.integers(0, 16, (6, 2))
        hbar[pos[:, 0], pos[:, 1]] = 4.0 * rand_c(rng, 6)
        H = ad2sf(hbar, ns)
        H *= np.sqrt(H.size) / np.linalg.norm(H)
        pat = PilotPattern.preset("C", ns, nt)
        obs = observe_pilots(H, pat, 10.0, rng)
        h0 = ls_init(obs, pat)
        den = lambda hb, s2: shrink_denoise(hb, s2)
        h_hat, trace = pppce(obs, pat, den, SolverConfig(), crop_rows=32,
                             ground_truth=H)
        from pnp_csi.metrics import nmse_db
        assert nmse_db(h_hat, H) < nmse_db(h0, H) - 1.0
        # NMSE decreases over the first three iterations
        assert trace.nmse_db[1] < trace.nmse_db[0]
        assert trace.nmse_db[2] < trace.nmse_db[1]

    def test_pppae_oracle_denoiser_recovers_truth(self):
        rng = np.random.default_rng(28)
        ns, nt = 16, 8
        H = rand_c(rng, (ns, nt))
        sel = AntennaSelection.preset("A", nt)
        h_sel = observe_antennas(H, sel)
        den = lambda hb, s2: sf2ad(H, ns)
        h_hat, trace = pppae(h_sel, sel, den, SolverConfig(n_iters=3),
                             crop_rows=ns, ground_truth=H)
        assert np.allclose(h_hat, H, atol=1e-10)
        assert trace.nmse_db[-1] == -300.0

    def test_pppcf_oracle_denoiser_recovers_truth(self):
        rng = np.random.default_rng(29)
        crop, nt = 8, 8
        hbar = rand_c(rng, (crop, nt))
        a = make_projection(32, 2 * crop * nt, rng)
        cache = make_svd_cache(a)
        code = compress(pack_csi(hbar), a, bits=None)
        den = lambda hb, s2: hbar.copy()
        hbar_hat, trace = pppcf(code, cache, den, SolverConfig(n_iters=3),
                                crop_rows=crop, n_antennas=nt,
                                ground_truth=hbar)
        assert np.allclose(hbar_hat, hbar, atol=1e-12)
        assert trace.nmse_db[-1] == -300.0

    def test_pppcf_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(30)
        a = make_projection(8, 64, rng)
        cache = make_svd_cache(a)
        code = compress(rng.standard_normal(64), a, bits=None)
        with pytest.raises(ValueError):
            pppcf(code, cache, lambda hb, s2: hb, SolverConfig(),
                  crop_rows=4, n_antennas=4)  # 2*4*4 = 32 != 64


class TestBatchedTaskDrivers:
    """Each batched driver must reproduce its per-sample driver exactly;
    batching only amortizes the denoiser call, never changes results."""

    def _sparse_batch(self, rng, n, ns, nt, crop):
        H = np.empty((n, ns, nt), complex)
        for j in range(n):
            hbar = np.zeros((ns, nt), complex)
            pos = rng.integers(0, crop, (5, 2))
            hbar[pos[:, 0], pos[:, 1]] = 3.0 * rand_c(rng, 5)
            Hj = ad2sf(hbar, ns)
            H[j] = Hj * np.sqrt(Hj.size) / np.linalg.norm(Hj)
        return H

    def test_pppce_batch_matches_per_sample(self):
        rng = np.random.default_rng(31)
        n, ns, nt, crop = 4, 32, 16, 16
        H = self._sparse_batch(rng, n, ns, nt, crop)
        pat = PilotPattern.preset("C", ns, nt)
        obs = [observe_pilots(H[j], pat, 10.0, rng) for j in range(n)]
        den = lambda hb, s2: shrink_denoise(hb, s2)
        cfg = SolverConfig(n_iters=6)
        hb_hat, traces = pppce_batch(obs, pat, den, cfg, crop_rows=crop,
                                     ground_truth=H)
        for j in range(n):
            h_j, t_j = pppce(obs[j], pat, den, cfg, crop_rows=crop,
                             ground_truth=H[j])
            assert np.allclose(hb_hat[j], h_j, atol=1e-10)
            assert np.allclose(traces[j].nmse_db, t_j.nmse_db, atol=1e-9)
            assert np.allclose(traces[j].residual, t_j.residual, atol=1e-9)
            assert traces[j].rho == t_j.rho

    def test_pppce_batch_oracle_denoise_batch_hits_floor(self):
        # a denoiser exposing denoise_batch takes the vectorized path; an
        # oracle returning the truth drives every per-sample trace to the
        # NMSE floor, same as the per-sample driver
        rng = np.random.default_rng(32)
        n, ns, nt = 3, 16, 8
        H = np.stack([rand_c(rng, (ns, nt)) for _ in range(n)])

        class Oracle:
            def denoise_batch(self, hb, s2):
                assert hb.shape[0] == n and len(s2) == n
                return sf2ad(H, ns)

        pat = PilotPattern.preset("C", ns, nt)
        obs = [observe_pilots(H[j], pat, np.inf, rng) for j in range(n)]
        hb_hat, traces = pppce_batch(obs, pat, Oracle(),
                                     SolverConfig(n_iters=3), crop_rows=ns,
                                     ground_truth=H)
        assert np.allclose(hb_hat, H, atol=1e-10)
        for t in traces:
            assert t.nmse_db[-1] == -300.0

    def test_pppae_batch_matches_per_sample(self):
        rng = np.random.default_rng(33)
        n, ns, nt, crop = 4, 32, 16, 16
        H = self._sparse_batch(rng, n, ns, nt, crop)
        sel = AntennaSelection.preset("A", nt)
        h_sel = np.stack([observe_antennas(H[j], sel) for j in range(n)])
        den = lambda hb, s2: shrink_denoise(hb, s2)
        cfg = SolverConfig(n_iters=6)
        hb_hat, traces = pppae_batch(h_sel, sel, den, cfg, crop_rows=crop,
                                     ground_truth=H)
        for j in range(n):
            h_j, t_j = pppae(h_sel[j], sel, den, cfg, crop_rows=crop,
                             ground_truth=H[j])
            assert np.allclose(hb_hat[j], h_j, atol=1e-10)
            assert np.allclose(traces[j].nmse_db, t_j.nmse_db, atol=1e-9)

    def test_pppae_batch_rejects_unstacked_input(self):
        sel = AntennaSelection.preset("A", 8)
        with pytest.raises(ValueError):
            pppae_batch(np.zeros((16, 4), complex), sel,
                        lambda hb, s2: hb, SolverConfig(), crop_rows=16)

    def test_pppcf_batch_matches_per_sample(self):
        rng = np.random.default_rng(34)
        n, crop, nt = 4, 8, 8
        hbar = np.stack([rand_c(rng, (crop, nt)) for _ in range(n)])
        a = make_projection(32, 2 * crop * nt, rng)
        cache = make_svd_cache(a)
        codes = [compress(pack_csi(hbar[j]), a, bits=6) for j in range(n)]
        den = lambda hb, s2: shrink_denoise(hb, s2)
        cfg = SolverConfig(n_iters=6)
        hb_hat, traces = pppcf_batch(codes, cache, den, cfg, crop_rows=crop,
                                     n_antennas=nt, ground_truth=hbar)
        for j in range(n):
            h_j, t_j = pppcf(codes[j], cache, den, cfg, crop_rows=crop,
                             n_antennas=nt, ground_truth=hbar[j])
            assert np.allclose(hb_hat[j], h_j, atol=1e-10)
            assert np.allclose(traces[j].nmse_db, t_j.nmse_db, atol=1e-9)

    def test_pppcf_batch_rejects_mixed_projections(self):
        rng = np.random.default_rng(35)
        a1 = make_projection(8, 32, rng)
        a2 = make_projection(8, 32, rng)
        cache = make_svd_cache(a1)
        codes = [compress(rng.standard_normal(32), a1, bits=None),
                 compress(rng.standard_normal(32), a2, bits=None)]
        with pytest.raises(ValueError):
            pppcf_batch(codes, cache, lambda hb, s2: hb, SolverConfig(),
                        crop_rows=4, n_antennas=4)

    def test_empty_batches_rejected(self):
        pat = PilotPattern.preset("A", 16, 8)
        with pytest.raises(ValueError):
            pppce_batch([], pat, lambda hb, s2: hb, SolverConfig(),
                        crop_rows=16)
        cache = make_svd_cache(make_projection(8, 32, np.random.default_rng(0)))
        with pytest.raises(ValueError):
            pppcf_batch([], cache, lambda hb, s2: hb, SolverConfig(),
                        crop_rows=4, n_antennas=4)
