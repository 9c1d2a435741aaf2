import json
import urllib.error
import urllib.request

import pytest

from esvforge.index import SearchQuery, build_index, search
from esvforge.service import create_server, segment_payload, start_in_thread
from esvforge.taxonomy import default_registry

REG = default_registry()
SETUP = REG.parse_triplet("setup.scope_setup.scope_insertion")
DISSECT = REG.parse_triplet("dissection.mucosal_dissection.dissection")
BLEED = REG.parse_triplet("dissection.mucosal_dissection.bleeding")


@pytest.fixture(scope="module")
def server():
    samples = [
        ("s1", 0.0, SETUP), ("s1", 10.0, SETUP), ("s1", 20.0, DISSECT),
        ("s1", 30.0, BLEED), ("s2", 0.0, DISSECT), ("s2", 10.0, BLEED),
    ]
    index = build_index(samples)
    server = create_server(index, "127.0.0.1:0")
    start_in_thread(server)
    yield server
    server.shutdown()


def get(server, path):
    host, port = server.server_address[:2]
    with urllib.request.urlopen(f"http://{host}:{port}{path}") as resp:
        return resp.status, json.loads(resp.read())


def get_error(server, path):
    host, port = server.server_address[:2]
    try:
        with urllib.request.urlopen(f"http://{host}:{port}{path}") as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as e:
        return e.code, json.loads(e.read())


def test_surgeries_listing(server):
    status, payload = get(server, "/surgeries")
    assert status == 200
    ids = [s["surgery_id"] for s in payload["surgeries"]]
    assert ids == ["s1", "s2"]
    assert all(s["duration_s"] > 0 for s in payload["surgeries"])


def test_timeline_projection(server):
    status, payload = get(server, "/surgeries/s1/timeline")
    assert status == 200
    assert set(payload["levels"]) == {"phase", "task", "action"}
    expected = [segment_payload(s, REG) for s in server.index.for_surgery("s1", "phase")]
    assert payload["levels"]["phase"] == expected


def test_timeline_unknown_surgery(server):
    status, payload = get_error(server, "/surgeries/nope/timeline")
    assert status == 404
    assert "error" in payload


def test_search_transport_equivalence(server):
    status, payload = get(server, "/search?phase=dissection")
    assert status == 200
    in_process = search(server.index, SearchQuery(phase="dissection"), REG)
    assert payload["results"] == [segment_payload(s, REG) for s in in_process]


def test_search_with_window_and_min_duration(server):
    status, payload = get(server, "/search?action=bleeding&min_duration=1&from=0&to=100")
    assert status == 200
    in_process = search(server.index, SearchQuery(action="bleeding", min_duration_s=1,
                                                  from_s=0, to_s=100), REG)
    assert payload["results"] == [segment_payload(s, REG) for s in in_process]


def test_search_bad_label_is_400(server):
    status, payload = get_error(server, "/search?phase=warpdrive")
    assert status == 400
    assert "error" in payload


def test_search_no_criteria_is_400(server):
    status, payload = get_error(server, "/search")
    assert status == 400


def test_static_404_without_ui_dir(server):
    status, _ = get_error(server, "/index.html")
    assert status == 404


def test_static_file_serving(tmp_path):
    (tmp_path / "index.html").write_text("<html><body>esv</body></html>")
    (tmp_pathsub := tmp_path / "assets").mkdir()
    (tmp_pathsub / "app.js").write_text("console.log(1)")
    index = build_index([("s", 0.0, SETUP)])
    server = create_server(index, "127.0.0.1:0", ui_dir=tmp_path)
    start_in_thread(server)
    try:
        host, port = server.server_address[:2]
        with urllib.request.urlopen(f"http://{host}:{port}/") as resp:
            assert resp.status == 200
            assert b"esv" in resp.read()
        with urllib.request.urlopen(f"http://{host}:{port}/assets/app.js") as resp:
            assert "javascript" in resp.headers["Content-Type"]
        with pytest.raises(urllib.error.HTTPError):  # no path escape
            urllib.request.urlopen(f"http://{host}:{port}/../secret")
    finally:
        server.shutdown()


def test_swap_index_atomic(server):
    original = server.index
    try:
        new_index = build_index([("s9", 0.0, SETUP)])
        server.swap_index(new_index)
        status, payload = get(server, "/surgeries")
        assert [s["surgery_id"] for s in payload["surgeries"]] == ["s9"]
    finally:
        server.swap_index(original)


def test_deterministic_payload(server):
    a = get(server, "/search?phase=dissection")
    b = get(server, "/search?phase=dissection")
    assert a == b


def test_bind_failure(server):
    from esvforge.errors import BindFailureError
    host, port = server.server_address[:2]
    with pytest.raises(BindFailureError):
        create_server(server.index, f"{host}:{port}")


def test_golden_annotation_export_parses():
    from pathlib import Path
    from esvforge.annotations import parse_annotation_export
    golden = Path(__file__).resolve().parents[1] / "docs" / "annotation_export.golden.json"
    segments = parse_annotation_export(golden.read_text())
    assert len(segments) == 4
    assert {s.clip_id for s in segments} == {"clipA", "clipB"}
