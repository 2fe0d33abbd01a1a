import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diarymc.diary import (
    DiaryDataset,
    DiarySeries,
    Episode,
    EpisodeSequence,
    NonNClass,
    Phase,
    extract_episodes,
    parse_dataset,
    summarize_subject,
    write_dataset,
    write_episode_csv,
)
from diarymc.errors import (
    BadTreatmentCode,
    DataFormatError,
    DuplicateSubjectDay,
    EmptyDataset,
    EmptySeries,
    NonContiguousDays,
    UnknownStatusChar,
)

from oracles import censored_candidates, classify_symbols, day_walk_runs

diaries = st.text(alphabet="BSN", min_size=1, max_size=400)


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestParsing:
    def test_long_rows(self, tmp_path):
        p = _write(
            tmp_path,
            "d.csv",
            "subject_id,treatment,day,status\ns1,1,1,N\ns1,1,2,B\n",
        )
        ds = parse_dataset(p, "long_csv")
        assert len(ds.subjects) == 1
        assert ds.subjects[0].diary == "NB"
        assert ds.subjects[0].treatment == 1

    def test_long_rows_out_of_order(self, tmp_path):
        p = _write(
            tmp_path,
            "d.csv",
            "subject_id,treatment,day,status\ns1,2,2,B\ns1,2,1,S\n",
        )
        assert parse_dataset(p, "long_csv").subjects[0].diary == "SB"

    def test_compact_row(self, tmp_path):
        p = _write(tmp_path, "d.csv", "subject_id,treatment,diary\ns1,2,NNSB\n")
        ds = parse_dataset(p, "compact_csv")
        s = ds.subjects[0]
        assert (s.subject_id, s.treatment, s.diary) == ("s1", 2, "NNSB")

    def test_unknown_status(self, tmp_path):
        p = _write(tmp_path, "d.csv", "subject_id,treatment,diary\ns1,2,NNXB\n")
        with pytest.raises(UnknownStatusChar):
            parse_dataset(p, "compact_csv")

    def test_unknown_status_long(self, tmp_path):
        p = _write(tmp_path, "d.csv", "subject_id,treatment,day,status\ns1,1,1,X\n")
        with pytest.raises(UnknownStatusChar):
            parse_dataset(p, "long_csv")

    def test_non_contiguous(self, tmp_path):
        p = _write(
            tmp_path, "d.csv", "subject_id,treatment,day,status\ns1,1,1,N\ns1,1,3,B\n"
        )
        with pytest.raises(NonContiguousDays):
            parse_dataset(p, "long_csv")

    def test_duplicate_day(self, tmp_path):
        p = _write(
            tmp_path, "d.csv", "subject_id,treatment,day,status\ns1,1,1,N\ns1,1,1,B\n"
        )
        with pytest.raises(DuplicateSubjectDay):
            parse_dataset(p, "long_csv")

    def test_bad_treatment(self, tmp_path):
        p = _write(tmp_path, "d.csv", "subject_id,treatment,diary\ns1,4,NN\n")
        with pytest.raises(BadTreatmentCode):
            parse_dataset(p, "compact_csv")

    def test_bad_header(self, tmp_path):
        p = _write(tmp_path, "d.csv", "id,arm,diary\ns1,1,NN\n")
        with pytest.raises(DataFormatError):
            parse_dataset(p, "compact_csv")

    def test_empty_file(self, tmp_path):
        p = _write(tmp_path, "d.csv", "")
        with pytest.raises(EmptyDataset):
            parse_dataset(p, "long_csv")


class TestExtraction:
    def test_mixed_run(self):
        seq = extract_episodes(DiarySeries("s1", 1, "NNSBN"))
        phases = [ep.phase for ep in seq.episodes]
        assert phases == [Phase.N, Phase.NON_N, Phase.N]
        assert [ep.duration_days for ep in seq.episodes] == [2.0, 2.0, 1.0]
        assert seq.episodes[1].observed_class is NonNClass.SB
        assert [ep.censored for ep in seq.episodes] == [False, False, True]

    def test_all_bleeding_censored(self):
        seq = extract_episodes(DiarySeries("s1", 1, "BBB"))
        (ep,) = seq.episodes
        assert ep.phase is Phase.NON_N
        assert ep.duration_days == 3.0
        assert ep.censored
        assert ep.candidates == frozenset({NonNClass.B, NonNClass.SB})

    def test_single_n_run(self):
        seq = extract_episodes(DiarySeries("s1", 1, "NNNN"))
        (ep,) = seq.episodes
        assert ep.phase is Phase.N and ep.duration_days == 4.0 and ep.censored

    def test_censored_spotting_candidates(self):
        seq = extract_episodes(DiarySeries("s1", 1, "NSS"))
        assert seq.episodes[-1].candidates == frozenset({NonNClass.S, NonNClass.SB})

    def test_censored_both_symbols_pinned(self):
        seq = extract_episodes(DiarySeries("s1", 1, "NSB"))
        assert seq.episodes[-1].candidates == frozenset({NonNClass.SB})

    @settings(max_examples=300, deadline=None)
    @given(diaries)
    def test_matches_day_walk_oracle(self, diary):
        seq = extract_episodes(DiarySeries("s1", 1, diary))
        runs = day_walk_runs(diary)
        assert len(seq.episodes) == len(runs)
        for i, (ep, (is_n, length, symbols)) in enumerate(zip(seq.episodes, runs)):
            last = i == len(runs) - 1
            assert (ep.phase is Phase.N) == is_n
            assert ep.duration_days == float(length)
            assert ep.censored == last
            if not is_n:
                if last:
                    assert {c.name for c in ep.candidates} == censored_candidates(symbols)
                else:
                    assert ep.observed_class.name == classify_symbols(symbols)

    def test_oracle_bulk_random(self, rng):
        for _ in range(10_000):
            n = int(rng.integers(1, 401))
            diary = "".join(rng.choice(list("BSN"), size=n))
            seq = extract_episodes(DiarySeries("s", 2, diary))
            runs = day_walk_runs(diary)
            assert len(seq.episodes) == len(runs)
            assert sum(ep.duration_days for ep in seq.episodes) == float(n)
            for prev, cur in zip(seq.episodes, seq.episodes[1:]):
                assert prev.phase is not cur.phase
            assert [ep.censored for ep in seq.episodes].count(True) == 1
            assert seq.episodes[-1].censored

    @settings(max_examples=200, deadline=None)
    @given(diaries)
    def test_classification_partition(self, diary):
        seq = extract_episodes(DiarySeries("s1", 1, diary))
        for ep in seq.episodes:
            if ep.phase is Phase.NON_N and not ep.censored:
                assert ep.observed_class in (NonNClass.S, NonNClass.SB, NonNClass.B)


class TestSummaries:
    def test_all_n(self):
        s = summarize_subject(DiarySeries("s1", 1, "N" * 100))
        assert (s.pct_n, s.pct_s, s.pct_b) == (100.0, 0.0, 0.0)
        assert s.n_episodes == 1

    def test_small_mix(self):
        s = summarize_subject(DiarySeries("s1", 1, "NSNB"))
        assert (s.pct_n, s.pct_s, s.pct_b) == (50.0, 25.0, 25.0)
        assert s.n_episodes == 4

    @settings(max_examples=200, deadline=None)
    @given(diaries)
    def test_counts_match_tally(self, diary):
        s = summarize_subject(DiarySeries("s1", 1, diary))
        assert s.days_b == diary.count("B")
        assert s.days_s == diary.count("S")
        assert s.days_n == diary.count("N")
        assert abs(s.pct_b + s.pct_s + s.pct_n - 100.0) < 1e-9


class TestRoundTrip:
    @pytest.mark.parametrize("fmt", ["long_csv", "compact_csv"])
    def test_one_subject(self, tmp_path, fmt):
        ds = DiaryDataset(subjects=(DiarySeries("s1", 2, "NNSBNB"),))
        path = tmp_path / "out.csv"
        write_dataset(ds, path, fmt)
        back = parse_dataset(path, fmt)
        assert back == ds

    @pytest.mark.parametrize("fmt", ["long_csv", "compact_csv"])
    def test_random_many(self, tmp_path, rng, fmt):
        for trial in range(25):
            subjects = []
            for i in range(int(rng.integers(1, 12))):
                n = int(rng.integers(1, 50))
                diary = "".join(rng.choice(list("BSN"), size=n))
                subjects.append(DiarySeries(f"s{i}", int(rng.integers(1, 4)), diary))
            ds = DiaryDataset(subjects=tuple(subjects))
            path = tmp_path / f"t{trial}.csv"
            write_dataset(ds, path, fmt)
            assert parse_dataset(path, fmt) == ds

    def test_empty_dataset_rejected(self, tmp_path):
        with pytest.raises(DuplicateSubjectDay):
            DiaryDataset(
                subjects=(DiarySeries("s1", 1, "N"), DiarySeries("s1", 2, "B"))
            )
        with pytest.raises(EmptyDataset):
            write_dataset(DiaryDataset(subjects=()), tmp_path / "x.csv", "long_csv")


class TestEpisodeCsv:
    def test_columns(self, tmp_path):
        seqs = [extract_episodes(DiarySeries("s1", 1, "NNSBNSS"))]
        out = tmp_path / "eps.csv"
        write_episode_csv(seqs, out)
        lines = out.read_text().splitlines()
        assert lines[0] == "subject_id,index,phase,class,duration,censored,candidates"
        assert lines[1] == "s1,1,N,,2,0,"
        assert lines[2] == "s1,2,nonN,SB,2,0,"
        assert lines[4] == "s1,4,nonN,,2,1,S|SB"


class TestInvariants:
    def test_series_validation(self):
        with pytest.raises(EmptySeries):
            DiarySeries("s1", 1, "")
        with pytest.raises(UnknownStatusChar):
            DiarySeries("s1", 1, "NXB")
        with pytest.raises(BadTreatmentCode):
            DiarySeries("s1", 0, "N")

    def test_sequence_alternation_enforced(self):
        e1 = Episode(phase=Phase.N, duration_days=1.0)
        e2 = Episode(phase=Phase.N, duration_days=2.0, censored=True)
        with pytest.raises(DataFormatError):
            EpisodeSequence("s1", 1, (e1, e2))

    def test_only_final_censored(self):
        e1 = Episode(phase=Phase.N, duration_days=1.0, censored=True)
        e2 = Episode(phase=Phase.NON_N, duration_days=2.0, observed_class=NonNClass.S)
        with pytest.raises(DataFormatError):
            EpisodeSequence("s1", 1, (e1, e2))

    def test_total_duration_matches_days(self, rng):
        for _ in range(1000):
            n = int(rng.integers(1, 120))
            diary = "".join(rng.choice(list("BSN"), size=n))
            seq = extract_episodes(DiarySeries("s", 1, diary))
            assert seq.total_duration == float(n)
