"""
documint/services/corpus_miner.py の C0/C1 カバレッジテスト

C0: filter_repo, dedup_samples, discover_files, mine_tree, load_manifest, mine_manifest,
    export_alpaca, export_stats, export_corpus
C1: 閾値ちょうどの値, 除外パターン, min_chars, メソッド・ネスト関数の除外, 構文エラーのファイル,
    読めないルート, 読めないサブディレクトリ, 不正なマニフェスト, 全ファイルの解析失敗
"""
import json
import logging
import os

import numpy as np
import pytest

from documint.exceptions import ExportError, MiningError, SchemaError, WalkError
from documint.models.corpus import MiningConfig, RejectReason, RepoMeta, RepoThresholds
from documint.services.corpus_miner import (
    alpaca_json,
    content_hash,
    dedup_samples,
    discover_files,
    export_alpaca,
    export_corpus,
    export_stats,
    filter_repo,
    load_manifest,
    mine_manifest,
    mine_tree,
    normalize_for_hash,
    stats_path_for,
)

REPO_A_EXPORT_ORDER = [
    ("pkg/copy_of_math.py", "add"),
    ("pkg/math_utils.py", "sub"),
    ("pkg/math_utils.py", "Calc.total"),
    ("pkg/math_utils.py", "outer"),
    ("pkg/math_utils.py", "outer.inner"),
    ("scripts/TOOL.PY", "main"),
    ("tests/test_math.py", "test_add"),
]


def repo(**counts) -> RepoMeta:
    values = {"contributors": 100, "commits": 10000, "stars": 40000, "forks": 20000}
    values.update(counts)
    return RepoMeta(repo_id="o/r", root_path=".", **values)


def origins(samples) -> list[tuple[str, str]]:
    return [(s.origin.file_path, s.origin.qualified_name) for s in samples]


# ============================================================
# filter_repo
# ============================================================

class TestFilterRepo:
    def test_accepts_above_all_thresholds(self):
        """C0: 4つとも閾値より大きければ採用"""
        decision = filter_repo(repo(contributors=51, commits=5001, stars=35001, forks=10001))
        assert decision.accepted
        assert decision.reason is None

    @pytest.mark.parametrize("field, reason", [
        ("contributors", RejectReason.CONTRIBUTORS),
        ("commits", RejectReason.COMMITS),
        ("stars", RejectReason.STARS),
        ("forks", RejectReason.FORKS),
    ])
    def test_threshold_value_is_rejected(self, field, reason):
        """C1: 閾値ちょうどは不採用（「より大きい」で判定）"""
        minimum = getattr(RepoThresholds(), f"min_{field}")
        decision = filter_repo(repo(**{field: minimum}))
        assert not decision.accepted
        assert decision.reason == reason

    def test_first_failing_check_is_reported(self):
        """C1: 複数満たさない場合は contributors, commits, stars, forks の順で最初の理由"""
        decision = filter_repo(repo(commits=0, forks=0))
        assert decision.reason == RejectReason.COMMITS

    def test_custom_thresholds(self):
        """C0: 閾値を変更できる"""
        small = repo(contributors=3, commits=10, stars=5, forks=1)
        assert filter_repo(small, RepoThresholds(min_contributors=0, min_commits=0, min_stars=0, min_forks=0)).accepted

    def test_monotonic(self):
        """C0: 採用されたリポジトリのカウントを増やしても採用のまま"""
        rng = np.random.default_rng(20240501)
        for _ in range(500):
            meta = repo(
                contributors=int(rng.integers(0, 201)),
                commits=int(rng.integers(0, 20001)),
                stars=int(rng.integers(0, 80001)),
                forks=int(rng.integers(0, 30001)),
            )
            if not filter_repo(meta).accepted:
                continue
            bumped = repo(
                contributors=meta.contributors + int(rng.integers(0, 51)),
                commits=meta.commits + int(rng.integers(0, 51)),
                stars=meta.stars + int(rng.integers(0, 51)),
                forks=meta.forks + int(rng.integers(0, 51)),
            )
            assert filter_repo(bumped).accepted


# ============================================================
# ハッシュと重複除去
# ============================================================

class TestDedup:
    def test_normalize_for_hash(self):
        """C0: 空白の連続をまとめ、行末の空白を除く"""
        assert normalize_for_hash("def f(a,  b):  \n\treturn  a\n\n") == "def f(a, b):\n return a"

    def test_whitespace_variants_share_hash(self):
        """C0: 空白の違いだけなら同じハッシュ"""
        assert content_hash("return a + b", "Doc.") == content_hash("return a  +  b ", "Doc.")
        assert content_hash("return a + b", "Doc.") != content_hash("return a - b", "Doc.")

    def test_keeps_first_and_is_idempotent(self, mining_dir):
        """C0: 最初の出現を残し、2回かけても変わらない"""
        samples, _ = mine_tree(mining_dir / "repo_a", MiningConfig(workers=1), repo_id="big/repo")
        doubled = list(samples) + list(samples)
        unique, removed = dedup_samples(doubled)
        assert removed == len(samples)
        assert unique == samples
        again, removed_again = dedup_samples(unique)
        assert again == unique
        assert removed_again == 0


# ============================================================
# discover_files / mine_tree
# ============================================================

class TestMineTree:
    def test_discover_files(self, mining_dir):
        """C0: 拡張子は大文字小文字を区別せず、相対パスの辞書順"""
        assert discover_files(mining_dir / "repo_a") == [
            "pkg/__init__.py",
            "pkg/broken.py",
            "pkg/copy_of_math.py",
            "pkg/math_utils.py",
            "scripts/TOOL.PY",
            "tests/test_math.py",
        ]

    def test_repo_a_stats(self, mining_dir):
        """C0: 構文エラー1件を飛ばし、空白違いの重複1件を除く"""
        samples, stats = mine_tree(mining_dir / "repo_a", repo_id="big/repo")
        assert stats.files_seen == 6
        assert stats.files_parsed == 5
        assert stats.parse_failures == 1
        assert stats.functions_seen == 9
        assert stats.functions_with_docstring == 8
        assert stats.functions_filtered == 0
        assert stats.duplicates_removed == 1
        assert stats.samples_exported == 7
        assert origins(samples) == REPO_A_EXPORT_ORDER
        assert all(s.origin.repo_id == "big/repo" for s in samples)

    def test_sample_contents(self, mining_dir):
        """C0: instruction は docstring を除いたソース、response は docstring 本文"""
        samples, _ = mine_tree(mining_dir / "repo_a")
        sub = samples[1]
        assert sub.instruction == "def sub(a, b):\n    return a - b"
        assert sub.response == "Return a minus b."
        total = samples[2]
        assert total.instruction.startswith("def total(self, values):")
        assert '"""' not in total.instruction

    def test_exclude_patterns(self, mining_dir):
        """C1: 除外パターンに一致するファイルは数えない"""
        samples, stats = mine_tree(mining_dir / "repo_a", MiningConfig(exclude=["tests/*"]))
        assert stats.files_seen == 5
        assert stats.files_parsed == 4
        assert stats.functions_seen == 8
        assert stats.functions_with_docstring == 7
        assert stats.duplicates_removed == 1
        assert stats.samples_exported == 6
        assert ("tests/test_math.py", "test_add") not in origins(samples)

    def test_min_chars(self, mining_dir):
        """C1: 短い docstring は functions_filtered に数える"""
        samples, stats = mine_tree(mining_dir / "repo_a", MiningConfig(min_chars=20))
        assert stats.functions_filtered == 6
        assert stats.samples_exported == 1
        assert samples[0].response == "Return the sum of a and b."

    def test_exclude_methods(self, mining_dir):
        """C1: include_methods=False ならメソッドを除く"""
        samples, stats = mine_tree(mining_dir / "repo_a", MiningConfig(include_methods=False))
        assert stats.functions_filtered == 1
        assert ("pkg/math_utils.py", "Calc.total") not in origins(samples)

    def test_exclude_nested(self, mining_dir):
        """C1: include_nested=False ならネスト関数を除く"""
        samples, stats = mine_tree(mining_dir / "repo_a", MiningConfig(include_nested=False))
        assert stats.functions_filtered == 1
        assert ("pkg/math_utils.py", "outer.inner") not in origins(samples)
        assert ("pkg/math_utils.py", "outer") in origins(samples)

    def test_worker_count_does_not_change_output(self, mining_dir):
        """C0: スレッド数を変えても出力は同じ"""
        single = mine_tree(mining_dir / "repo_a", MiningConfig(workers=1))
        pooled = mine_tree(mining_dir / "repo_a", MiningConfig(workers=4))
        assert single == pooled

    def test_missing_root(self, tmp_path):
        """C1: 存在しないルートは WalkError"""
        with pytest.raises(WalkError):
            mine_tree(tmp_path / "missing")

    def test_unreadable_subdirectory_is_counted(self, tmp_path, mocker, caplog):
        """C1: 読めないサブディレクトリは警告して unreadable_dirs に数え、残りはマイニングする"""
        (tmp_path / "a.py").write_text('def f():\n    """Return one."""\n    return 1\n', encoding="utf-8")

        def walk(top, onerror=None):
            onerror(PermissionError(13, "Permission denied", os.path.join(top, "locked")))
            yield os.fspath(top), [], ["a.py"]

        mocker.patch("documint.services.corpus_miner.os.walk", side_effect=walk)
        with caplog.at_level(logging.WARNING, logger="documint.services.corpus_miner"):
            samples, stats = mine_tree(tmp_path)
        assert stats.unreadable_dirs == 1
        assert stats.files_seen == 1
        assert stats.samples_exported == 1
        assert "Cannot read directory locked" in caplog.text

    def test_discover_files_collects_unreadable(self, tmp_path, mocker):
        """C1: discover_files は読めないサブディレクトリの相対パスを集める"""
        def walk(top, onerror=None):
            onerror(PermissionError(13, "Permission denied", os.path.join(top, "pkg", "locked")))
            yield os.fspath(top), [], []

        mocker.patch("documint.services.corpus_miner.os.walk", side_effect=walk)
        unreadable: list[str] = []
        assert discover_files(tmp_path, unreadable=unreadable) == []
        assert unreadable == ["pkg/locked"]

    def test_unreadable_root(self, tmp_path, mocker):
        """C1: ルート自体が読めなければ WalkError"""
        def walk(top, onerror=None):
            onerror(PermissionError(13, "Permission denied", os.fspath(top)))
            yield from ()

        mocker.patch("documint.services.corpus_miner.os.walk", side_effect=walk)
        with pytest.raises(WalkError, match="Permission denied"):
            mine_tree(tmp_path)

    def test_empty_tree(self, tmp_path):
        """C1: .py ファイルの無いツリーは全カウント0"""
        (tmp_path / "notes.txt").write_text("hello", encoding="utf-8")
        samples, stats = mine_tree(tmp_path)
        assert samples == []
        assert stats.files_seen == 0
        assert stats.samples_exported == 0


# ============================================================
# マニフェスト
# ============================================================

class TestManifest:
    def test_load_resolves_relative_roots(self, mining_dir):
        """C0: root_path はマニフェストのディレクトリ基準で解決する"""
        repos = load_manifest(mining_dir / "manifest.json")
        assert [r.repo_id for r in repos] == ["big/repo", "small/repo", "edge/repo"]
        assert repos[0].root_path == str(mining_dir / "repo_a")

    def test_missing_manifest(self, tmp_path):
        """C1: 読めないマニフェストは SchemaError"""
        with pytest.raises(SchemaError, match="cannot read manifest"):
            load_manifest(tmp_path / "nope.json")

    @pytest.mark.parametrize("content", [
        "not json",
        '{"repo_id": "a"}',
        '[{"repo_id": "a", "contributors": -1, "commits": 1, "stars": 1, "forks": 1, "root_path": "."}]',
        '[{"repo_id": "a", "commits": 1, "stars": 1, "forks": 1, "root_path": "."}]',
    ])
    def test_invalid_manifest(self, tmp_path, content):
        """C1: JSON でない・配列でない・負の値・欠けたフィールドは SchemaError"""
        path = tmp_path / "manifest.json"
        path.write_text(content, encoding="utf-8")
        with pytest.raises(SchemaError, match="invalid manifest"):
            load_manifest(path)

    def test_mine_manifest(self, mining_dir):
        """C0: 閾値を満たすリポジトリだけを処理し、リポジトリ間の重複も除く"""
        samples, stats = mine_manifest(load_manifest(mining_dir / "manifest.json"))
        assert stats.repos_seen == 3
        assert stats.repos_accepted == 2
        assert stats.files_seen == 9
        assert stats.files_parsed == 7
        assert stats.parse_failures == 2
        assert stats.functions_seen == 11
        assert stats.functions_with_docstring == 10
        assert stats.functions_filtered == 0
        assert stats.duplicates_removed == 2
        assert stats.samples_exported == 8
        assert origins(samples) == REPO_A_EXPORT_ORDER + [("greet.py", "greet")]
        assert "small/repo" not in {s.origin.repo_id for s in samples}

    def test_all_files_fail(self, tmp_path):
        """C1: 採用したリポジトリのファイルがすべて解析失敗なら MiningError"""
        root = tmp_path / "broken"
        root.mkdir()
        (root / "a.py").write_text("def a(:\n", encoding="utf-8")
        meta = RepoMeta(repo_id="x/y", contributors=60, commits=6000, stars=36000, forks=11000, root_path=str(root))
        with pytest.raises(MiningError):
            mine_manifest([meta])

    def test_all_rejected(self, mining_dir):
        """C1: すべて不採用なら空の結果（エラーにはしない）"""
        repos = load_manifest(mining_dir / "manifest.json")
        samples, stats = mine_manifest(repos, RepoThresholds(min_stars=10**9))
        assert samples == []
        assert stats.repos_accepted == 0
        assert stats.files_seen == 0


# ============================================================
# 書き出し
# ============================================================

class TestExport:
    def test_export_alpaca(self, mining_dir, tmp_path):
        """C0: instruction / response だけのコンパクトな JSON 配列"""
        samples, _ = mine_tree(mining_dir / "repo_a")
        out = tmp_path / "out" / "corpus.json"
        written = export_alpaca(samples, out)
        raw = out.read_bytes()
        assert written == len(raw)
        assert b"\n" not in raw.replace(b"\\n", b"")
        records = json.loads(raw)
        assert len(records) == 7
        assert all(set(r) == {"instruction", "response"} for r in records)
        assert records[0] == {"instruction": samples[0].instruction, "response": samples[0].response}

    def test_export_matches_golden_bytes(self, fixtures_dir, tmp_path):
        """C0: 4サンプルのツリーの出力がゴールデンファイルとバイト単位で一致"""
        corpus_dir = fixtures_dir / "corpus"
        samples, stats = mine_tree(corpus_dir / "src")
        assert stats.samples_exported == 4
        out = tmp_path / "corpus.json"
        export_alpaca(samples, out)
        assert out.read_bytes() == (corpus_dir / "alpaca_golden.json").read_bytes()

    def test_export_corpus_writes_both_files(self, fixtures_dir, tmp_path):
        """C0: コーパスと stats サイドカーをそろって書き出す"""
        samples, stats = mine_tree(fixtures_dir / "corpus" / "src")
        out = tmp_path / "corpus.json"
        export_corpus(samples, stats, out)
        assert out.read_bytes() == (fixtures_dir / "corpus" / "alpaca_golden.json").read_bytes()
        assert json.loads(stats_path_for(out).read_text(encoding="utf-8")) == stats.model_dump()

    def test_export_corpus_failure_leaves_nothing(self, fixtures_dir, tmp_path, mocker):
        """C1: コーパスの書き込みに失敗したら ExportError、サイドカーも残さない"""
        samples, stats = mine_tree(fixtures_dir / "corpus" / "src")
        mocker.patch("documint.services.corpus_miner.write_atomic", side_effect=ExportError("cannot write"))
        out = tmp_path / "corpus.json"
        with pytest.raises(ExportError):
            export_corpus(samples, stats, out)
        assert list(tmp_path.iterdir()) == []

    def test_non_ascii_is_kept(self, tmp_path):
        """C0: 非 ASCII 文字はエスケープしない"""
        (tmp_path / "ja.py").write_text('def f():\n    """値を返す。"""\n    return 1\n', encoding="utf-8")
        samples, _ = mine_tree(tmp_path)
        assert "値を返す。" in alpaca_json(samples)

    def test_export_stats_sidecar(self, mining_dir, tmp_path):
        """C0: 統計は <out>.stats.json に書く"""
        _, stats = mine_tree(mining_dir / "repo_a")
        out = tmp_path / "corpus.json"
        export_stats(stats, out)
        sidecar = stats_path_for(out)
        assert sidecar.name == "corpus.json.stats.json"
        assert json.loads(sidecar.read_text(encoding="utf-8"))["samples_exported"] == 7
