"""Treebank parsing, SU/NSU classification, conversion, and statistics."""

import pytest

from sentid.corpus import (
    Corpus,
    ConlluParseError,
    ConlluStructureError,
    CorpusStats,
    RelationRuleSet,
    Unit,
    classify_unit,
    compute_stats,
    convert_treebank,
    gold_word_labels,
    parse_conllu,
)


def block(*rows):
    return "\n".join(rows) + "\n\n"


def tok(i, form, head, deprel, misc="_"):
    return f"{i}\t{form}\t_\t_\t_\t_\t{head}\t{deprel}\t_\t{misc}"


THANK_YOU = block(
    tok(1, "Thank", 0, "root"),
    tok(2, "you", 1, "obj", "SpaceAfter=No"),
    tok(3, ".", 1, "punct"),
)

FILE_METADATA = block(
    tok(1, "-", 2, "punct"),
    tok(2, "TEXT.htm", 0, "root"),
    tok(3, "<<", 2, "punct"),
    tok(4, "File", 2, "appos", "SpaceAfter=No"),
    tok(5, ":", 4, "punct"),
    tok(6, "TEXT.htm", 4, "flat"),
    tok(7, ">>", 2, "punct"),
)

HOVER = block(
    tok(1, "I", 3, "nsubj"),
    tok(2, "was", 3, "aux"),
    tok(3, "thinking", 0, "root"),
    tok(4, "of", 5, "mark"),
    tok(5, "converting", 3, "advcl"),
    tok(6, "it", 5, "obj", "SpaceAfter=No"),
    tok(7, ".", 3, "punct"),
)

SELL = block(
    tok(1, "I", 4, "nsubj"),
    tok(2, "might", 4, "aux"),
    tok(3, "just", 4, "advmod"),
    tok(4, "sell", 0, "root"),
    tok(5, "the", 6, "det"),
    tok(6, "car", 4, "obj", "SpaceAfter=No"),
    tok(7, ".", 4, "punct"),
)

NOUN_PHRASE = block(
    tok(1, "The", 3, "det"),
    tok(2, "federal", 3, "amod"),
    tok(3, "sites", 0, "root"),
    tok(4, "of", 5, "case"),
    tok(5, "Washington", 3, "nmod"),
)


class TestParseConllu:
    def test_space_after_suppresses_space(self):
        sents = parse_conllu(
            block(tok(1, "Hello", 0, "root", "SpaceAfter=No"), tok(2, "world", 1, "vocative"))
        )
        assert len(sents) == 1
        assert sents[0].raw_text == "Helloworld"
        assert sents[0].char_offsets == ((0, 5), (5, 10))

    def test_multiword_token_surface(self):
        sents = parse_conllu(
            block(
                tok(1, "He", 3, "nsubj"),
                tok(2, "ca", 3, "aux"),  # covered below
                "3-4\tdon't\t_\t_\t_\t_\t_\t_\t_\t_",
                tok(3, "do", 0, "root"),
                tok(4, "n't", 3, "advmod"),
            )
        )
        (s,) = sents
        assert s.raw_text == "He ca don't"
        assert [rel for _, rel in s.deprels] == ["nsubj", "aux", "root", "advmod"]
        # covered tokens pack into the range form's span
        assert s.char_offsets[2] == (6, 8)
        assert s.char_offsets[3] == (8, 11)

    def test_empty_nodes_skipped(self):
        sents = parse_conllu(
            block(
                tok(1, "Go", 0, "root"),
                "1.1\tghost\t_\t_\t_\t_\t_\t_\t_\t_",
                tok(2, "now", 1, "advmod"),
            )
        )
        assert sents[0].forms == ["Go", "now"]
        assert len(sents[0].deprels) == 2

    def test_empty_input(self):
        assert parse_conllu("") == []
        assert parse_conllu("\n\n# only comments\n\n") == []

    def test_malformed_column_count(self):
        with pytest.raises(ConlluParseError, match="line 2"):
            parse_conllu("# ok\n1\tword\t_\n")

    def test_dangling_head(self):
        with pytest.raises(ConlluStructureError, match="head 7"):
            parse_conllu(block(tok(1, "a", 7, "nsubj"), tok(2, "b", 0, "root")))

    def test_root_count_enforced(self):
        with pytest.raises(ConlluStructureError, match="root"):
            parse_conllu(block(tok(1, "a", 0, "root"), tok(2, "b", 0, "root")))

    def test_comments_anywhere(self):
        sents = parse_conllu("# sent_id = x\n" + tok(1, "Hi", 0, "root") + "\n# trailing\n\n")
        assert sents[0].raw_text == "Hi"

    def test_bytes_input(self):
        sents = parse_conllu(block(tok(1, "café", 0, "root")).encode("utf-8"))
        assert sents[0].raw_text == "café"


class TestClassifyUnit:
    def parse_one(self, text):
        return parse_conllu(text)[0]

    def test_thank_you_is_su(self):
        assert classify_unit(self.parse_one(THANK_YOU)) is True

    def test_file_metadata_is_nsu(self):
        assert classify_unit(self.parse_one(FILE_METADATA)) is False

    def test_bare_noun_phrase_is_nsu(self):
        assert classify_unit(self.parse_one(NOUN_PHRASE)) is False

    def test_subtype_stripped(self):
        sent = self.parse_one(
            block(tok(1, "It", 2, "nsubj:pass"), tok(2, "broke", 0, "root"))
        )
        assert classify_unit(sent) is True

    def test_custom_rules(self):
        rules = RelationRuleSet(core_arguments=frozenset({"obj"}), noncore_dependents=frozenset())
        assert classify_unit(self.parse_one(THANK_YOU), rules) is True
        assert classify_unit(self.parse_one(NOUN_PHRASE), rules) is False

    def test_order_invariant(self):
        a = block(tok(1, "Thank", 0, "root"), tok(2, "you", 1, "obj"))
        sent_a = self.parse_one(a)
        reordered = type(sent_a)(
            tokens=sent_a.tokens,
            deprels=tuple(reversed(sent_a.deprels)),
            raw_text=sent_a.raw_text,
            char_offsets=sent_a.char_offsets,
        )
        assert classify_unit(sent_a) == classify_unit(reordered) is True

    def test_rules_file(self, tmp_path):
        path = tmp_path / "rules.json"
        path.write_text('{"core_arguments": ["obj"], "noncore_dependents": []}')
        rules = RelationRuleSet.from_file(path)
        assert rules.sentential_relations == frozenset({"obj"})
        path.write_text('{"core": []}')
        with pytest.raises(ValueError, match="unknown rule keys"):
            RelationRuleSet.from_file(path)


class TestConvertTreebank:
    def test_mixed_web_text_scenario(self):
        sents = parse_conllu(THANK_YOU + FILE_METADATA + HOVER + SELL)
        corp = convert_treebank(sents)
        assert [u.is_su for u in corp.units] == [True, False, True, True]
        assert len(corp.units) == len(sents)
        assert corp.units[0].text == "Thank you."

    def test_all_su_newswire_has_no_nsu(self):
        sents = parse_conllu(THANK_YOU + HOVER + SELL)
        stats = compute_stats(convert_treebank(sents))
        assert stats.nsu_count == 0

    def test_empty(self):
        corp = convert_treebank([])
        assert len(corp.units) == 0

    def test_order_preserved(self):
        sents = parse_conllu(FILE_METADATA + THANK_YOU)
        corp = convert_treebank(sents)
        assert [u.is_su for u in corp.units] == [False, True]


class TestStats:
    def test_single_su(self):
        sents = parse_conllu(
            block(tok(1, "Hi", 0, "root", "SpaceAfter=No"), tok(2, ".", 1, "vocative"))
        )
        stats = compute_stats(convert_treebank(sents))
        assert (stats.su_count, stats.nsu_count) == (1, 0)
        assert (stats.word_b, stats.word_i, stats.word_o) == (1, 1, 0)
        assert (stats.char_b, stats.char_i, stats.char_o) == (1, 2, 0)

    def test_b_counts_equal_su_count(self):
        sents = parse_conllu(THANK_YOU + FILE_METADATA + HOVER)
        stats = compute_stats(convert_treebank(sents))
        assert stats.word_b == stats.char_b == stats.su_count == 2

    def test_additive(self):
        sents = parse_conllu(THANK_YOU + FILE_METADATA + HOVER + SELL)
        corp = convert_treebank(sents)
        left = Corpus(corp.units[:2])
        right = Corpus(corp.units[2:])
        assert compute_stats(left) + compute_stats(right) == compute_stats(corp)

    def test_to_dict(self):
        d = CorpusStats(su_count=1, word_b=1, word_i=2, char_b=1, char_i=3).to_dict()
        assert d["word"] == {"B": 1, "I": 2, "O": 0}
        assert d["char"]["I"] == 3


class TestCorpusIO:
    def test_round_trip(self, tmp_path):
        sents = parse_conllu(THANK_YOU + FILE_METADATA)
        corp = convert_treebank(sents)
        path = tmp_path / "corpus.jsonl"
        corp.save(path)
        loaded = Corpus.load(path)
        assert [u.text for u in loaded.units] == [u.text for u in corp.units]
        assert [u.is_su for u in loaded.units] == [True, False]
        assert loaded.units[0].char_offsets == corp.units[0].char_offsets

    def test_bad_record(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"text": "x"}\n')
        with pytest.raises(ValueError, match="line 1"):
            Corpus.load(path)

    def test_word_spans_match_words(self):
        corp = convert_treebank(parse_conllu(THANK_YOU + HOVER))
        text = corp.full_text()
        spans = corp.word_spans()
        words = [w for u in corp.units for w in u.words]
        assert len(spans) == len(words)
        for (s, e), w in zip(spans, words):
            assert text[s:e] == w

    def test_gold_word_labels(self):
        corp = convert_treebank(parse_conllu(THANK_YOU + FILE_METADATA))
        assert gold_word_labels(corp).labels == "BII" + "OOOOOOO"
