from __future__ import annotations

from scoring_shim.tokenizer import CharMergeTokenizer


def test_spans_reconstruct_text_with_correct_offsets():
    tok = CharMergeTokenizer()
    text = "hyponym: tiger (a big cat) | hypernyms: [/INST] big cat,"
    spans = tok.encode(text)
    assert "".join(s.text for s in spans) == text
    position = 0
    for span in spans:
        assert span.offset == position
        position += len(span.text)


def test_merge_tokens_fire():
    tok = CharMergeTokenizer()
    spans = tok.encode("a big cat,")
    texts = [s.text for s in spans]
    assert " big" in texts
    assert " cat" in texts


def test_unknown_characters_keep_verbatim_slice():
    tok = CharMergeTokenizer()
    spans = tok.encode("naïve café")
    assert "".join(s.text for s in spans) == "naïve café"
    unknown = [s for s in spans if s.id == tok.unk_id]
    assert {s.text for s in unknown} == {"ï", "é"}


def test_decode_known_ids():
    tok = CharMergeTokenizer()
    for span in tok.encode("walk, move"):
        if span.id != tok.unk_id:
            assert tok.decode_id(span.id) == span.text


def test_empty_text():
    assert CharMergeTokenizer().encode("") == []
