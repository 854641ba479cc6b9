"""Tests for zero-WER downsampling and the binned dev split."""

import numpy as np
import pytest

from ewer3.corpus import Manifest, Utterance
from ewer3.errors import DataError
from ewer3.sampling import binned_dev_split, downsample_zero, score_group, wer_bin


def make_manifest(wers, lang="xx"):
    return Manifest(tuple(
        Utterance(id=f"{lang}{i}", lang=lang, wav=f"{i}.wav", dur=1.0,
                  hyp="a", wer=w)
        for i, w in enumerate(wers)
    ))


def group_counts(manifest):
    counts = {}
    for utt in manifest:
        key = score_group(utt.wer)
        counts[key] = counts.get(key, 0) + 1
    return counts


class TestScoreGroup:
    def test_round_half_up_percent(self):
        assert score_group(0.0) == 0
        assert score_group(0.004) == 0
        assert score_group(0.005) == 1
        assert score_group(0.10) == 10
        assert score_group(0.125) == 13
        assert score_group(1.0) == 100


class TestDownsampleZero:
    def test_keeps_sum_of_next_two_groups(self):
        wers = [0.0] * 500 + [0.05] * 120 + [0.12] * 80 + [0.20] * 10
        out = downsample_zero(make_manifest(wers), seed=42)
        counts = group_counts(out)
        assert counts[0] == 200  # 120 + 80
        assert counts[5] == 120
        assert counts[12] == 80
        assert counts[20] == 10

    def test_no_zero_group_is_identity(self):
        man = make_manifest([0.05] * 50 + [0.2] * 20)
        assert downsample_zero(man, seed=1) == man

    def test_zero_not_dominant_is_identity(self):
        man = make_manifest([0.0] * 50 + [0.05] * 120 + [0.12] * 80)
        assert downsample_zero(man, seed=1) == man

    def test_zero_at_or_below_target_is_identity(self):
        # zero group 200 == 120 + 80: nothing to remove
        man = make_manifest([0.0] * 200 + [0.05] * 120 + [0.12] * 80)
        assert downsample_zero(man, seed=1) == man

    def test_only_zero_group_is_identity(self):
        man = make_manifest([0.0] * 30)
        assert downsample_zero(man, seed=1) == man

    def test_single_other_group(self):
        # with one non-zero group, the target is just that group's size
        wers = [0.0] * 100 + [0.5] * 30
        out = downsample_zero(make_manifest(wers), seed=3)
        counts = group_counts(out)
        assert counts[0] == 30
        assert counts[50] == 30

    def test_non_zero_utterances_untouched_and_order_preserved(self):
        wers = [0.0, 0.5, 0.0, 0.25, 0.0, 0.0, 0.5, 0.0, 0.25, 0.0]
        man = make_manifest(wers)
        out = downsample_zero(man, seed=5)
        kept_ids = [u.id for u in out]
        # relative order is a subsequence of the input order
        positions = [int(i[2:]) for i in kept_ids]
        assert positions == sorted(positions)
        nonzero_ids = [u.id for u in man if u.wer > 0]
        assert [i for i in kept_ids if i in nonzero_ids] == nonzero_ids

    def test_deterministic_and_counts_seed_independent(self):
        wers = [0.0] * 300 + [0.1] * 40 + [0.2] * 30 + [0.3] * 10
        man = make_manifest(wers)
        a = downsample_zero(man, seed=11)
        b = downsample_zero(man, seed=11)
        c = downsample_zero(man, seed=12)
        assert a == b
        assert len(a) == len(c)
        assert a != c  # different selection

    def test_languages_handled_independently(self):
        heavy = make_manifest([0.0] * 100 + [0.1] * 20 + [0.2] * 10, lang="aa")
        balanced = make_manifest([0.0] * 10 + [0.1] * 20 + [0.2] * 30, lang="bb")
        man = Manifest(tuple(heavy) + tuple(balanced))
        out = downsample_zero(man, seed=7)
        aa = group_counts(Manifest(tuple(u for u in out if u.lang == "aa")))
        bb = group_counts(Manifest(tuple(u for u in out if u.lang == "bb")))
        assert aa[0] == 30  # 20 + 10
        assert bb[0] == 10  # untouched: zero group not dominant

    def test_unlabeled_rejected(self):
        man = Manifest((Utterance(id="u", lang="xx", wav="u.wav", dur=1.0, hyp="a"),))
        with pytest.raises(DataError, match="u"):
            downsample_zero(man, seed=1)

    def test_tie_for_most_frequent_goes_to_lower_key(self):
        # zero ties with the 10% group at 50; the lower key wins the rank, so
        # zero counts as dominant. The next two groups then sum to 70, which
        # the 50 zeros do not exceed: identity.
        wers = [0.0] * 50 + [0.1] * 50 + [0.2] * 20
        man = make_manifest(wers)
        assert downsample_zero(man, seed=9) == man

    def test_tie_applies_rule_when_zero_exceeds_target(self):
        # zero 100 ties nothing; next two are 60 and 20 -> keep 80
        wers = [0.0] * 100 + [0.3] * 60 + [0.6] * 20
        out = downsample_zero(make_manifest(wers), seed=9)
        assert group_counts(out)[0] == 80


class TestWerBin:
    def test_boundaries(self):
        assert wer_bin(0.0) == 0
        assert wer_bin(0.0999) == 0
        assert wer_bin(0.10) == 1
        assert wer_bin(0.35) == 3
        assert wer_bin(0.90) == 9
        assert wer_bin(1.0) == 9  # closed top bin


class TestBinnedDevSplit:
    def test_partition_property(self):
        rng = np.random.default_rng(42)
        man = make_manifest(list(rng.uniform(0, 1, size=237)))
        train, dev = binned_dev_split(man, seed=3)
        train_ids = [u.id for u in train]
        dev_ids = [u.id for u in dev]
        assert set(train_ids) & set(dev_ids) == set()
        assert sorted(train_ids + dev_ids) == sorted(u.id for u in man)

    def test_exact_ten_percent_of_hundred(self):
        man = make_manifest([0.55] * 100)
        train, dev = binned_dev_split(man, seed=1)
        assert len(dev) == 10
        assert len(train) == 90

    def test_round_half_up_of_small_bins(self):
        # 4 utterances in a bin: round(0.4) = 0 to dev
        _, dev = binned_dev_split(make_manifest([0.25] * 4), seed=1)
        assert len(dev) == 0
        # 5 utterances: round(0.5) = 1
        _, dev = binned_dev_split(make_manifest([0.25] * 5), seed=1)
        assert len(dev) == 1

    def test_per_bin_fraction(self):
        wers = [0.05] * 40 + [0.55] * 60 + [1.0] * 20
        man = make_manifest(wers)
        train, dev = binned_dev_split(man, seed=5)
        dev_bins = [wer_bin(u.wer) for u in dev]
        assert dev_bins.count(0) == 4
        assert dev_bins.count(5) == 6
        assert dev_bins.count(9) == 2

    def test_order_preserved(self):
        rng = np.random.default_rng(0)
        man = make_manifest(list(rng.uniform(0, 1, size=50)))
        train, dev = binned_dev_split(man, seed=2)
        for part in (train, dev):
            positions = [int(u.id[2:]) for u in part]
            assert positions == sorted(positions)

    def test_deterministic_and_counts_stable_across_seeds(self):
        rng = np.random.default_rng(1)
        man = make_manifest(list(rng.uniform(0, 1, size=300)))
        a = binned_dev_split(man, seed=4)
        b = binned_dev_split(man, seed=4)
        c = binned_dev_split(man, seed=5)
        assert a == b
        assert len(a[1]) == len(c[1])
        assert a[1] != c[1]

    def test_unlabeled_rejected(self):
        man = Manifest((Utterance(id="u", lang="xx", wav="u.wav", dur=1.0, hyp="a"),))
        with pytest.raises(DataError, match="u"):
            binned_dev_split(man, seed=1)

    def test_bad_frac(self):
        with pytest.raises(DataError, match="frac"):
            binned_dev_split(make_manifest([0.5]), seed=1, frac=1.5)
