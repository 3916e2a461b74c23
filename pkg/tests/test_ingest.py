"""Parsers for interaction links, publication counts, and taxdumps."""

import gzip
import io

import pytest

from ppistats import (
    DataError,
    EvidenceFilter,
    FormatError,
    parse_string_links,
)
from ppistats.ingest import (
    STRING_HEADER,
    filter_species,
    load_taxdump,
    open_text,
    parse_lineage_table,
    parse_pubcount_table,
    parse_taxdump,
    write_string_links,
)

HEADER = STRING_HEADER + "\n"


def links(*rows):
    return io.StringIO(HEADER + "".join(r + "\n" for r in rows))


def test_header_is_mandatory():
    with pytest.raises(FormatError):
        parse_string_links(io.StringIO("protein1 protein2 wrong\n"))
    with pytest.raises(FormatError):
        parse_string_links(io.StringIO(""))
    with pytest.raises(FormatError):
        parse_string_links(io.StringIO(HEADER))


def test_default_filter_needs_experimental_or_database():
    g = parse_string_links(links(
        "9606.A 9606.B 0 0 0 0 500 0 0 500",     # experimental: keep
        "9606.B 9606.C 0 0 0 0 0 700 0 700",     # database: keep
        "9606.C 9606.D 0 0 0 900 0 0 900 950",   # neither: drop
    ))
    assert g.species_id == "9606"
    assert g.node_ids == ["A", "B", "C"]
    assert g.edge_count == 2


def test_min_combined_score_applies_after_channels():
    ev = EvidenceFilter(min_combined_score=600)
    g = parse_string_links(links(
        "9606.A 9606.B 0 0 0 0 500 0 0 599",
        "9606.A 9606.C 0 0 0 0 500 0 0 600",
    ), ev)
    assert g.node_ids == ["A", "C"]


def test_combined_only_filter():
    ev = EvidenceFilter(required_channels=frozenset(), min_combined_score=400)
    g = parse_string_links(links(
        "9606.A 9606.B 0 0 0 0 0 0 399 399",
        "9606.A 9606.C 0 0 0 0 0 0 401 401",
    ), ev)
    assert g.node_ids == ["A", "C"]


def test_evidence_filter_rejects_bad_configs():
    with pytest.raises(DataError):
        EvidenceFilter(required_channels=frozenset({"psychic"}))
    with pytest.raises(DataError):
        EvidenceFilter(required_channels=frozenset(), min_combined_score=0)
    with pytest.raises(DataError):
        EvidenceFilter(min_combined_score=-1)


def test_duplicate_and_reversed_rows_collapse():
    g = parse_string_links(links(
        "9606.A 9606.B 0 0 0 0 500 0 0 500",
        "9606.B 9606.A 0 0 0 0 500 0 0 500",
        "9606.A 9606.A 0 0 0 0 500 0 0 500",
    ))
    assert g.edge_count == 1
    assert g.node_ids == ["A", "B"]


def test_mixed_taxids_rejected():
    with pytest.raises(DataError):
        parse_string_links(links(
            "9606.A 9606.B 0 0 0 0 500 0 0 500",
            "10090.A 10090.B 0 0 0 0 500 0 0 500",
        ))


def test_malformed_rows_are_format_errors():
    with pytest.raises(FormatError):
        parse_string_links(links("9606.A 9606.B 0 0 0 0 500 0 0"))
    with pytest.raises(FormatError):
        parse_string_links(links("A 9606.B 0 0 0 0 500 0 0 500"))
    with pytest.raises(FormatError):
        parse_string_links(links("9606.A 9606.B 0 0 0 0 x 0 0 500"))


def test_write_then_parse_round_trips(tmp_path):
    g = parse_string_links(links(
        "9606.A 9606.B 0 0 0 0 500 0 0 500",
        "9606.B 9606.C 0 0 0 0 0 700 0 700",
    ))
    buf = io.StringIO()
    write_string_links(g, buf)
    again = parse_string_links(io.StringIO(buf.getvalue()))
    assert again == g


def test_open_text_reads_gzip(tmp_path):
    raw = HEADER + "9606.A 9606.B 0 0 0 0 500 0 0 500\n"
    path = tmp_path / "links.txt.gz"
    with gzip.open(path, "wt", encoding="utf-8") as fh:
        fh.write(raw)
    with open_text(path) as fh:
        g = parse_string_links(fh)
    assert g.edge_count == 1


def test_pubcounts_and_threshold():
    table = parse_pubcount_table(io.StringIO("9606\t160000\n10090\t50\n\n"))
    assert table == {"9606": 160000, "10090": 50}
    assert filter_species(table, 100) == {"9606"}
    assert filter_species(table, 50) == {"9606"}
    with pytest.raises(FormatError):
        parse_pubcount_table(io.StringIO("9606 only-one-column\n"))
    with pytest.raises(FormatError):
        parse_pubcount_table(io.StringIO("9606\tmany\n"))


def test_pubcount_duplicate_keeps_last(caplog):
    table = parse_pubcount_table(io.StringIO("9606\t1\n9606\t2\n"))
    assert table == {"9606": 2}


def test_lineage_table_parses_semicolon_paths():
    rows = parse_lineage_table(io.StringIO(
        "9606\tcellular organisms;Eukaryota;Metazoa\n"))
    assert rows == [("9606", ["cellular organisms", "Eukaryota", "Metazoa"])]
    with pytest.raises(FormatError):
        parse_lineage_table(io.StringIO("9606\t;;\n"))


NODES_DMP = """\
1\t|\t1\t|\tno rank\t|
131567\t|\t1\t|\tno rank\t|
2\t|\t131567\t|\tsuperkingdom\t|
1224\t|\t2\t|\tphylum\t|
"""

NAMES_DMP = """\
1\t|\troot\t|\t\t|\tscientific name\t|
1\t|\tall\t|\t\t|\tsynonym\t|
131567\t|\tcellular organisms\t|\t\t|\tscientific name\t|
2\t|\tBacteria\t|\tBacteria <bacteria>\t|\tscientific name\t|
1224\t|\tProteobacteria\t|\t\t|\tscientific name\t|
"""


def test_taxdump_lineage_and_ranks():
    dump = load_taxdump(io.StringIO(NODES_DMP), io.StringIO(NAMES_DMP))
    assert dump.lineage("1224") == [
        "root", "cellular organisms", "Bacteria", "Proteobacteria"]
    ranks = dump.name_ranks()
    assert ranks["Bacteria"] == "superkingdom"
    assert ranks["cellular organisms"] == "no rank"
    with pytest.raises(DataError):
        dump.lineage("999")


def test_parse_taxdump_selects_taxids():
    rows = parse_taxdump(io.StringIO(NODES_DMP), io.StringIO(NAMES_DMP),
                         taxids=["1224"])
    assert rows == [("1224", ["root", "cellular organisms", "Bacteria",
                              "Proteobacteria"])]
    all_rows = parse_taxdump(io.StringIO(NODES_DMP), io.StringIO(NAMES_DMP))
    assert [sid for sid, _ in all_rows] == sorted(["1", "131567", "1224", "2"])


def test_taxdump_cycle_detected():
    nodes = "5\t|\t6\t|\tno rank\t|\n6\t|\t5\t|\tno rank\t|\n"
    names = ("5\t|\tfive\t|\t\t|\tscientific name\t|\n"
             "6\t|\tsix\t|\t\t|\tscientific name\t|\n")
    dump = load_taxdump(io.StringIO(nodes), io.StringIO(names))
    with pytest.raises(DataError):
        dump.lineage("5")
