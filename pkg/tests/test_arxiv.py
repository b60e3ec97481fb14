"""arXiv connector tests: id grammar, Atom parsing, source bundles, transports."""

import random
import sys
import time

import pytest

from sciconsult.arxiv import (
    FILE_MARKER,
    ArxivConnector,
    PaperMetadata,
    SubprocessConverter,
    concat_tex_members,
    parse_atom_feed,
    split_arxiv_id,
    to_markdown,
)
from sciconsult.errors import (
    CassetteMissError,
    ConversionFailedError,
    ConversionUnavailableError,
    FeedParseError,
    HttpStatusError,
    NonPdfPayloadError,
    SourceUnavailableError,
    TransportError,
)
from sciconsult.net import HttpResponse, LiveTransport, ReplayTransport

from conftest import (
    FAKE_PDF,
    atom_feed,
    make_gz,
    make_targz,
    record_eprint,
    record_pdf,
    record_search,
    search_url,
)

# ---------------------------------------------------------------- id grammar


@pytest.mark.parametrize(
    "raw, base, version",
    [
        ("2301.12345", "2301.12345", None),
        ("2301.12345v2", "2301.12345", 2),
        ("0704.0001", "0704.0001", None),
        ("0704.0001v1", "0704.0001", 1),
        ("math.GT/0309136", "math.GT/0309136", None),
        ("hep-th/9901001v3", "hep-th/9901001", 3),
        ("  2301.12345v10 ", "2301.12345", 10),
    ],
)
def test_split_arxiv_id_accepts_canonical_forms(raw, base, version):
    assert split_arxiv_id(raw) == (base, version)


@pytest.mark.parametrize(
    "raw",
    [
        "",
        "not-an-id",
        "2301.123",  # too few digits after the dot
        "2301.1234567",  # too many
        "12345.1234",  # too many before the dot
        "https://arxiv.org/abs/2301.12345",  # URLs are not ids
        "2301.12345v",  # dangling version marker
        "hep-th/123",  # old-style needs seven digits
    ],
)
def test_split_arxiv_id_rejects_noncanonical_forms(raw):
    with pytest.raises(ValueError):
        split_arxiv_id(raw)


def test_paper_metadata_url():
    paper = PaperMetadata(arxiv_id="2301.12345", title="T", abstract="A")
    assert paper.url == "https://arxiv.org/abs/2301.12345"


# --------------------------------------------------------------- atom feeds


def test_parse_atom_feed_two_entries_read_back():
    # Oracle: the expected values below are read off the fixture by hand.
    body = atom_feed(
        [
            ("2301.11111v2", "Attention For Tables", "We study tables."),
            ("1905.00001", "Old Benchmarks Revisited", "A survey of baselines."),
        ]
    )
    papers = parse_atom_feed(body)
    assert [p.arxiv_id for p in papers] == ["2301.11111", "1905.00001"]
    assert papers[0].title == "Attention For Tables"
    assert papers[0].abstract == "We study tables."
    assert papers[0].version == 2
    assert papers[1].title == "Old Benchmarks Revisited"
    assert papers[1].version is None


def test_parse_atom_feed_squashes_internal_whitespace():
    body = atom_feed(
        [("2301.22222", "Deep\n  Sets,   Revisited", "Line one.\n Line two.")]
    )
    (paper,) = parse_atom_feed(body)
    assert paper.title == "Deep Sets, Revisited"
    assert paper.abstract == "Line one. Line two."


def test_parse_atom_feed_dedupes_by_versionless_id():
    body = atom_feed(
        [
            ("2301.33333v1", "First Listing", "a"),
            ("2301.33333v2", "Second Listing", "b"),
        ]
    )
    papers = parse_atom_feed(body)
    assert len(papers) == 1
    assert papers[0].title == "First Listing"


def test_parse_atom_feed_skips_entries_with_malformed_ids():
    body = atom_feed(
        [
            ("2301.44444", "Kept", "x"),
            ("oops-not-an-id", "Dropped", "y"),
        ]
    )
    papers = parse_atom_feed(body)
    assert [p.title for p in papers] == ["Kept"]


def test_parse_atom_feed_empty_feed_gives_empty_list():
    assert parse_atom_feed(atom_feed([])) == []


def test_parse_atom_feed_truncated_xml_raises():
    body = atom_feed([("2301.55555", "T", "A")])[:-20]
    with pytest.raises(FeedParseError):
        parse_atom_feed(body)


# -------------------------------------------------------- tex concatenation


def test_concat_tex_members_worked_example():
    text, manifest = concat_tex_members({"b.tex": "B", "a.tex": "A"})
    assert text == "%% FILE: a.tex\nA\n%% FILE: b.tex\nB\n"
    assert manifest == ["a.tex", "b.tex"]


def test_concat_tex_members_preserves_content_verbatim():
    members = {
        "main.tex": "\\begin{tabular}{ll}\n1 & 2 \\\\\n\\end{tabular}\n% comment",
        "app.tex": "$e^{i\\pi}+1=0$",
    }
    text, manifest = concat_tex_members(members)
    assert manifest == ["app.tex", "main.tex"]
    for name, content in members.items():
        assert f"{FILE_MARKER}{name}\n{content}\n" in text


def test_concat_tex_members_length_conservation():
    rng = random.Random(20240817)
    alphabet = "ab\\{}%$\n "
    for _ in range(100):
        members = {}
        for i in range(rng.randint(1, 8)):
            name = f"{rng.choice('xyz')}{i}.tex"
            members[name] = "".join(
                rng.choice(alphabet) for _ in range(rng.randint(0, 40))
            )
        text, manifest = concat_tex_members(members)
        expected = sum(
            len(FILE_MARKER) + len(name) + 1 + len(body) + 1
            for name, body in members.items()
        )
        assert len(text) == expected
        assert manifest == sorted(members)


def test_concat_tex_members_round_trips_through_markers():
    members = {"a.tex": "alpha\nbeta", "b/c.tex": "gamma"}
    text, manifest = concat_tex_members(members)
    # Reconstruct by splitting on marker lines; contents avoid the marker.
    chunks = text.split(FILE_MARKER)[1:]
    rebuilt = {}
    for chunk in chunks:
        name, _, body = chunk.partition("\n")
        rebuilt[name] = body[:-1]  # trailing newline added per member
    assert rebuilt == members
    assert manifest == ["a.tex", "b/c.tex"]


# -------------------------------------------------------------- search path


def test_search_replays_cassette_and_parses(cassette_dir):
    record_search(
        cassette_dir,
        "graph neural networks",
        3,
        [
            ("2301.11111", "GNNs For Chemistry", "Molecules."),
            ("2302.22222", "GNNs For Physics", "Particles."),
        ],
    )
    connector = ArxivConnector(ReplayTransport(cassette_dir))
    papers = connector.search("graph neural networks", max_results=3)
    assert [p.title for p in papers] == ["GNNs For Chemistry", "GNNs For Physics"]


def test_search_truncates_overfull_feed(cassette_dir):
    record_search(
        cassette_dir,
        "extra",
        2,
        [
            ("2301.00001", "One", "a"),
            ("2301.00002", "Two", "b"),
            ("2301.00003", "Three", "c"),
        ],
    )
    connector = ArxivConnector(ReplayTransport(cassette_dir))
    papers = connector.search("extra", max_results=2)
    assert [p.title for p in papers] == ["One", "Two"]


def test_search_rejects_blank_query_before_any_request(cassette_dir):
    transport = ReplayTransport(cassette_dir)
    connector = ArxivConnector(transport)
    with pytest.raises(ValueError):
        connector.search("   ", max_results=5)
    assert transport.access_count == 0


@pytest.mark.parametrize("n", [0, -1, 101])
def test_search_rejects_out_of_range_max_results(cassette_dir, n):
    transport = ReplayTransport(cassette_dir)
    connector = ArxivConnector(transport, max_results_cap=100)
    with pytest.raises(ValueError):
        connector.search("ok", max_results=n)
    assert transport.access_count == 0


def test_search_surfaces_http_errors(cassette_dir):
    from sciconsult.net import write_cassette

    write_cassette(cassette_dir, search_url("down", 5), b"service unavailable", status=503)
    connector = ArxivConnector(ReplayTransport(cassette_dir))
    with pytest.raises(HttpStatusError) as exc_info:
        connector.search("down", max_results=5)
    assert exc_info.value.status == 503


# ----------------------------------------------------------------- get pdf


def test_fetch_pdf_checks_magic_and_strips_version(cassette_dir):
    record_pdf(cassette_dir, "2301.12345")
    connector = ArxivConnector(ReplayTransport(cassette_dir))
    assert connector.fetch_pdf("2301.12345v2") == FAKE_PDF


def test_fetch_pdf_rejects_html_payload(cassette_dir):
    record_pdf(cassette_dir, "2301.12345", payload=b"<html>rate limited</html>")
    connector = ArxivConnector(ReplayTransport(cassette_dir))
    with pytest.raises(NonPdfPayloadError):
        connector.fetch_pdf("2301.12345")


def test_fetch_pdf_raises_on_404(cassette_dir):
    record_pdf(cassette_dir, "2301.99999", payload=b"not found", status=404)
    connector = ArxivConnector(ReplayTransport(cassette_dir))
    with pytest.raises(HttpStatusError):
        connector.fetch_pdf("2301.99999")


# ------------------------------------------------------------- fetch source


def test_fetch_source_prefers_latex_and_sorts_members(cassette_dir):
    tarball = make_targz(
        {"b.tex": "B", "figure.png": b"\x89PNG...", "a.tex": "A"}
    )
    record_eprint(cassette_dir, "2301.12345", tarball)
    connector = ArxivConnector(ReplayTransport(cassette_dir))
    bundle = connector.fetch_source("2301.12345v3")
    assert bundle.kind == "latex_concat"
    assert bundle.text == "%% FILE: a.tex\nA\n%% FILE: b.tex\nB\n"
    assert bundle.manifest == ["a.tex", "b.tex"]
    assert bundle.arxiv_id == "2301.12345"


def test_fetch_source_handles_nested_tex_paths(cassette_dir):
    tarball = make_targz(
        {
            "main.tex": "\\input{sections/intro}",
            "sections/intro.tex": "Intro body",
            "refs.bib": "@misc{x}",
        }
    )
    record_eprint(cassette_dir, "2301.20000", tarball)
    connector = ArxivConnector(ReplayTransport(cassette_dir))
    bundle = connector.fetch_source("2301.20000")
    assert bundle.manifest == ["main.tex", "sections/intro.tex"]
    assert "%% FILE: sections/intro.tex\nIntro body\n" in bundle.text


def test_fetch_source_bare_gzipped_tex_file(cassette_dir):
    source = "\\documentclass{article}\\begin{document}Hi\\end{document}"
    record_eprint(cassette_dir, "2301.30000", make_gz(source))
    connector = ArxivConnector(ReplayTransport(cassette_dir))
    bundle = connector.fetch_source("2301.30000")
    assert bundle.kind == "latex_concat"
    assert bundle.manifest == ["main.tex"]
    assert bundle.text == f"%% FILE: main.tex\n{source}\n"


def test_fetch_source_falls_back_to_markdown_when_no_tex(cassette_dir):
    record_eprint(cassette_dir, "2301.40000", make_targz({"figure.png": b"png"}))
    record_pdf(cassette_dir, "2301.40000")
    connector = ArxivConnector(
        ReplayTransport(cassette_dir), converter=lambda pdf: "# Converted\n\nBody."
    )
    bundle = connector.fetch_source("2301.40000")
    assert bundle.kind == "markdown"
    assert bundle.text.startswith("# Converted")
    assert bundle.manifest == []


def test_fetch_source_gzipped_pdf_payload_uses_fallback(cassette_dir):
    record_eprint(cassette_dir, "2301.50000", make_gz(FAKE_PDF))
    record_pdf(cassette_dir, "2301.50000")
    connector = ArxivConnector(
        ReplayTransport(cassette_dir), converter=lambda pdf: "converted text"
    )
    bundle = connector.fetch_source("2301.50000")
    assert bundle.kind == "markdown"


def test_fetch_source_both_paths_failing_reports_both_causes(cassette_dir):
    record_eprint(cassette_dir, "2301.60000", b"junk", status=404)
    record_pdf(cassette_dir, "2301.60000", payload=b"nope", status=404)
    connector = ArxivConnector(ReplayTransport(cassette_dir))
    with pytest.raises(SourceUnavailableError) as exc_info:
        connector.fetch_source("2301.60000")
    causes = exc_info.value.causes
    assert len(causes) == 2
    assert "e-print fetch failed" in causes[0]
    assert "pdf fallback failed" in causes[1]


def test_fetch_source_without_converter_cannot_fall_back(cassette_dir):
    record_eprint(cassette_dir, "2301.70000", make_targz({"only.png": b"png"}))
    record_pdf(cassette_dir, "2301.70000")
    connector = ArxivConnector(ReplayTransport(cassette_dir))  # no converter
    with pytest.raises(SourceUnavailableError) as exc_info:
        connector.fetch_source("2301.70000")
    assert any("no .tex member" in c for c in exc_info.value.causes)
    assert any("converter" in c for c in exc_info.value.causes)


# -------------------------------------------------------------- converters


def test_to_markdown_requires_a_converter():
    with pytest.raises(ConversionUnavailableError):
        to_markdown(b"%PDF-1.4", converter=None)


def test_subprocess_converter_passes_path_and_returns_stdout():
    script = (
        "import sys, pathlib\n"
        "data = pathlib.Path(sys.argv[1]).read_bytes()\n"
        "print('# Markdown from ' + str(len(data)) + ' bytes')"
    )
    converter = SubprocessConverter([sys.executable, "-c", script])
    out = to_markdown(FAKE_PDF, converter)
    assert out == f"# Markdown from {len(FAKE_PDF)} bytes\n"


def test_subprocess_converter_nonzero_exit_raises_with_stderr():
    script = "import sys; sys.stderr.write('bad xref table'); sys.exit(3)"
    converter = SubprocessConverter([sys.executable, "-c", script])
    with pytest.raises(ConversionFailedError) as exc_info:
        converter(b"%PDF-1.4 broken")
    assert "3" in str(exc_info.value)
    assert "bad xref table" in str(exc_info.value)


# --------------------------------------------------------------- transports


def test_replay_transport_serves_same_url_in_recording_order(cassette_dir):
    from sciconsult.net import write_cassette

    url = "http://example.org/page"
    write_cassette(cassette_dir, url, b"first")
    write_cassette(cassette_dir, url, b"second")
    transport = ReplayTransport(cassette_dir)
    assert transport.get(url).body == b"first"
    assert transport.get(url).body == b"second"
    # once exhausted, repeated GETs re-serve rather than fail
    assert transport.get(url).body == b"first"
    assert transport.access_count == 3


def test_replay_transport_misses_raise(cassette_dir):
    transport = ReplayTransport(cassette_dir)
    with pytest.raises(CassetteMissError):
        transport.get("http://example.org/never-recorded")


def test_live_transport_politeness_delay_per_host(monkeypatch):
    calls = []

    def stub_get(url, timeout):
        calls.append((url, time.monotonic()))
        resp = type(
            "R",
            (),
            {"status_code": 200, "headers": {}, "content": b"ok", "url": url},
        )()
        return resp

    import requests

    monkeypatch.setattr(requests, "get", stub_get)
    transport = LiveTransport(politeness_delay_s=0.2)
    transport.get("http://a.example/one")
    transport.get("http://b.example/other-host")  # different host: no wait
    transport.get("http://a.example/two")  # same host: must wait
    t_a1 = calls[0][1]
    t_b = calls[1][1]
    t_a2 = calls[2][1]
    assert t_a2 - t_a1 >= 0.2
    assert t_b - t_a1 < 0.2


def test_live_transport_wraps_connection_errors(monkeypatch):
    import requests

    def boom(url, timeout):
        raise requests.ConnectionError("refused")

    monkeypatch.setattr(requests, "get", boom)
    transport = LiveTransport(politeness_delay_s=0.0)
    with pytest.raises(TransportError):
        transport.get("http://a.example/x")


def test_http_response_is_plain_data():
    resp = HttpResponse(url="u", status=200, headers={"a": "b"}, body=b"x")
    assert (resp.url, resp.status, resp.headers, resp.body) == (
        "u",
        200,
        {"a": "b"},
        b"x",
    )
