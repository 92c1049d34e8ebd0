from fesynth.jslex import (
    Statement,
    is_balanced,
    mask_code,
    matching_close,
    top_level_statements,
)


def test_mask_blanks_string_contents():
    masked = mask_code("const s = 'a{b}c';").masked
    assert "{" not in masked and "a" not in masked.split("const")[1].split(";")[0].replace(" ", "")
    assert len(masked) == len("const s = 'a{b}c';")


def test_mask_keeps_newlines_for_offsets():
    text = "const a = 'x';\nconst b = 2;"
    assert mask_code(text).masked.count("\n") == 1


def test_template_literal_interpolation_stays_code():
    text = "const t = `top ${items.map(i => i.name)} bottom`;"
    masked = mask_code(text).masked
    assert "items.map" in masked
    assert "top" not in masked
    assert is_balanced(text)


def test_template_literal_braces_in_text_blanked():
    assert is_balanced("const t = `unbalanced { in text`;")


def test_regex_literal_masked():
    text = "const re = /{[)}]/g; const x = 1;"
    assert is_balanced(text)
    assert "[)}]" not in mask_code(text).masked


def test_division_is_not_regex():
    text = "const x = a / b / c;"
    masked = mask_code(text).masked
    assert masked == text  # nothing blanked


def test_comments_blanked():
    text = "// function Fake() { \nconst a = 1; /* {{{ */ const b = 2;"
    assert is_balanced(text)
    masked = mask_code(text).masked
    assert "Fake" not in masked


def test_unterminated_block_comment_flagged():
    assert not mask_code("const a = 1; /* never closed").terminated
    assert not is_balanced("const a = 1; /* never closed")


def test_jsx_apostrophes_do_not_open_strings():
    text = "const N = () => (\n  <p>Don't break (parens) here</p>\n);"
    masked = mask_code(text).masked
    assert is_balanced(text)
    assert "(parens)" in masked  # JSX text kept as code-ish, balance intact


def test_unterminated_real_string_fails_balance():
    assert not is_balanced("const s = 'abc\nconst t = 1;")


def test_matching_close():
    text = "fn({a: [1, 2], b: (3)})"
    masked = mask_code(text).masked
    assert matching_close(masked, text.index("(")) == len(text) - 1


def test_top_level_statements_spans():
    text = (
        "import React from 'react';\n"
        "const A = () => {\n  return 1;\n};\n"
        "function B() { return 2; }\n"
        "export default B;\n"
    )
    statements = top_level_statements(text)
    keywords = [s.keyword for s in statements]
    assert keywords == ["import", "const", "function", "export"]
    b = statements[2]
    assert text[b.start : b.end].startswith("function B")
    assert text[b.start : b.end].endswith("}")


def test_statement_slice_helper():
    text = "const x = 1;"
    stmt = top_level_statements(text)[0]
    assert isinstance(stmt, Statement)
    assert stmt.slice(text) == "const x = 1;"


def test_semicolonless_asi_statement():
    text = "const A = () => {\n  return 1\n}\nconst B = 2;"
    statements = top_level_statements(text)
    assert [s.keyword for s in statements] == ["const", "const"]
