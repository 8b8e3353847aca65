import math

import numpy as np
import pytest
from scipy.stats import norm

from bpcodes import codes
from bpcodes.channel import ChannelSpec, llr, transmit
from bpcodes.decoder import BpConfig
from bpcodes.errors import InvalidParams, NoOverlap, ParseError, RankDeficient
from bpcodes.evaluate import (CSV_COLUMNS, EvalReport, EvalRow, StopRule, db_gain, from_csv, from_json,
                              monte_carlo, to_csv, to_json, wilson_interval)

QUICK = StopRule(min_frames=20000, min_frame_errors=50, max_frames=200000, batch=5000)


def curve(points, n=10, frames=10**6):
    rows = []
    for snr, ber in points:
        rows.append(EvalRow("awgn", snr, "sumproduct", 5, frames, int(round(ber * frames * n)), 1, n=n))
    return EvalReport(rows)


def shifted(points, d):
    return [(s + d, b) for s, b in points]


class TestRow:
    def test_rates(self):
        r = EvalRow("awgn", 4.0, "sumproduct", 5, frames=1000, bit_errors=70, frame_errors=20, n=7)
        assert r.ber == 0.01 and r.fer == 0.02
        assert r.neg_ln_ber == pytest.approx(-math.log(0.01))
        assert math.isnan(EvalRow("awgn", 4.0, "sumproduct", 5, 10, 0, 0, n=7).neg_ln_ber)

    def test_stderr_frame_level(self):
        # 10 frames, 5 with 2 errors: per-frame counts have mean 1, sample variance 10/9
        r = EvalRow("awgn", 4.0, "sumproduct", 5, frames=10, bit_errors=10, frame_errors=5,
                    bit_errors_sq=20, n=4)
        assert r.ber_stderr() == pytest.approx(math.sqrt(10 / 9 / 10) / 4)

    def test_wilson(self):
        lo, hi = wilson_interval(0, 100)
        assert lo == 0 and 0 < hi < 0.05
        lo, hi = wilson_interval(50, 100)
        assert lo < 0.5 < hi and hi - 0.5 == pytest.approx(0.5 - lo)


class TestMonteCarlo:
    @pytest.mark.parametrize("ebn0", [0.0, 3.0, 6.0])
    def test_uncoded_bpsk_matches_q_function(self, ebn0):
        rng = np.random.default_rng(int(ebn0 * 10))
        N = 2_000_000
        # uncoded BPSK is rate 1; at rate 1/2 the same sigma sits 10*log10(2) dB higher
        spec = ChannelSpec("awgn", ebn0 + 10 * math.log10(2), rate=0.5)
        L = llr(transmit(np.ones(1000), spec, rng, batch=N // 1000))
        p_hat = (L > 0).mean()
        p = norm.sf(math.sqrt(2 * 10 ** (ebn0 / 10)))
        assert abs(p_hat - p) < 3 * math.sqrt(p * (1 - p) / N)

    def test_hamming_high_snr_budget(self, hamming):
        stop = StopRule(min_frames=100000, min_frame_errors=50, max_frames=100000, batch=50000)
        [row] = monte_carlo(hamming, [ChannelSpec("awgn", 20.0, rate=4 / 7)], BpConfig(5), stop)
        assert row.bit_errors == 0 and row.budget_exhausted and row.frames == 100000

    def test_stopping_rule(self, ldpc):
        [row] = monte_carlo(ldpc, [ChannelSpec("awgn", 2.0)], BpConfig(5), QUICK)
        assert row.frames >= QUICK.min_frames and row.frame_errors >= QUICK.min_frame_errors
        assert not row.budget_exhausted
        assert row.n == 32 and row.frames % QUICK.batch == 0

    def test_workers_invariance(self, ldpc):
        specs = [ChannelSpec("awgn", s) for s in (2.0, 3.0, 4.0)]
        a = monte_carlo(ldpc, specs, BpConfig(5), QUICK, seed=3)
        b = monte_carlo(ldpc, specs, BpConfig(5), QUICK, seed=3, workers=3)
        assert to_csv(a) == to_csv(b)

    def test_zero_vs_random_codewords(self, hamming):
        spec = [ChannelSpec("awgn", 3.0, rate=4 / 7)]
        a = monte_carlo(hamming, spec, BpConfig(5), QUICK, mode="zero", seed=1).rows[0]
        b = monte_carlo(hamming, spec, BpConfig(5), QUICK, mode="random", seed=2).rows[0]
        se = math.hypot(a.ber_stderr(), b.ber_stderr())
        assert abs(a.ber - b.ber) < 3 * se

    def test_random_mode_rank_deficient(self):
        code = codes.ParityCheck([[1, 1, 0, 0], [1, 1, 0, 0]])
        with pytest.raises(RankDeficient):
            monte_carlo(code, [ChannelSpec()], mode="random")

    def test_bad_mode(self, hamming):
        with pytest.raises(InvalidParams):
            monte_carlo(hamming, [ChannelSpec()], mode="all")

    def test_monotone_in_snr(self, ldpc):
        rep = monte_carlo(ldpc, [ChannelSpec("awgn", s) for s in (1.0, 2.0, 3.0)], BpConfig(5), QUICK)
        vals = [(r.neg_ln_ber, r.neg_ln_ber_stderr()) for r in rep]
        for (a, sa), (b, sb) in zip(vals, vals[1:]):
            assert b >= a - 2 * math.hypot(sa, sb)

    def test_minsum_variant_recorded(self, hamming):
        [row] = monte_carlo(hamming, [ChannelSpec("awgn", 2.0)], BpConfig(3, variant="minsum"),
                            StopRule(1000, 0, 1000, 1000))
        assert row.variant == "minsum" and row.iters == 3


class TestGain:
    PTS = [(1.0, 1e-1), (2.0, 2e-2), (3.0, 3e-3), (4.0, 2e-4)]

    def test_identical(self):
        g = db_gain(curve(self.PTS), curve(self.PTS))
        assert (g.mean_db, g.std_db, g.min_db, g.max_db) == (0, 0, 0, 0)

    def test_shift(self):
        g = db_gain(curve(self.PTS), curve(shifted(self.PTS, -1.0)))
        assert g.mean_db == pytest.approx(1.0) and g.min_db == pytest.approx(1.0)
        assert g.max_db == pytest.approx(1.0) and g.std_db == pytest.approx(0.0, abs=1e-12)

    def test_crossing_by_hand(self):
        # base: log10 BER = -1 - x, ours: -1.5 - x/2; gain(y) = 2 + y on y in [-2.5, -1.5]
        base = curve([(0.0, 1e-1), (2.0, 1e-3)], frames=10**12)
        ours = curve([(0.0, 10 ** -1.5), (2.0, 10 ** -2.5)], frames=10**12)
        g = db_gain(base, ours)
        assert g.min_db == pytest.approx(-0.5, abs=1e-6) and g.max_db == pytest.approx(0.5, abs=1e-6)
        assert g.mean_db == pytest.approx(0.0, abs=1e-6)
        assert g.std_db == pytest.approx(math.sqrt(51 / (12 * 49)), rel=1e-5)
        assert g.min_db <= g.mean_db <= g.max_db

    def test_no_overlap(self):
        with pytest.raises(NoOverlap):
            db_gain(curve([(0, 1e-1), (1, 1e-2)]), curve([(5, 1e-4), (6, 1e-5)]))
        with pytest.raises(NoOverlap):
            db_gain(curve([(0, 1e-1)]), curve(self.PTS))


class TestReportIO:
    def report(self):
        return EvalReport([
            EvalRow("awgn", 4.0, "sumproduct", 5, 100000, 1234, 400, False, 9999, 63),
            EvalRow("fading", 5.5, "minsum", 15, 300000, 0, 0, True, 0, 32),
        ])

    def test_csv_round_trip(self):
        rep = self.report()
        assert from_csv(to_csv(rep)).rows == rep.rows

    def test_json_round_trip(self):
        rep = self.report()
        assert from_json(to_json(rep)).rows == rep.rows

    def test_golden_csv(self):
        text = to_csv(EvalReport([EvalRow("awgn", 4.0, "sumproduct", 5, 1000, 70, 20, False, 100, 7)]))
        assert text == ("channel,snr_db,variant,iters,frames,bit_errors,frame_errors,ber,fer,neg_ln_ber,"
                        "budget_exhausted,bit_errors_sq,n\n"
                        "awgn,4.0,sumproduct,5,1000,70,20,0.01,0.02,4.605170185988091,0,100,7\n")

    def test_legacy_columns_infer_n(self):
        text = ",".join(CSV_COLUMNS) + "\nawgn,4.0,sumproduct,5,1000,70,20,0.01,0.02,4.6\n"
        [row] = from_csv(text).rows
        assert row.n == 7

    @pytest.mark.parametrize("text", [
        "",
        "a,b,c\n1,2,3\n",
        ",".join(CSV_COLUMNS) + "\nawgn,4.0\n",
        ",".join(CSV_COLUMNS) + "\nawgn,x,sumproduct,5,1000,70,20,0.01,0.02,4.6\n",
    ])
    def test_csv_errors(self, text):
        with pytest.raises(ParseError):
            from_csv(text)

    @pytest.mark.parametrize("text", ["{", "[]", '{"rows": [{"channel": "awgn"}]}'])
    def test_json_errors(self, text):
        with pytest.raises(ParseError):
            from_json(text)

    def test_select(self):
        rep = self.report()
        assert len(rep.select(channel="awgn")) == 1
        assert rep.select(variant="minsum").at(5.5).iters == 15
        with pytest.raises(KeyError):
            rep.at(1.0)
