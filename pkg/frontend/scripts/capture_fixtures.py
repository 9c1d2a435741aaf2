"""Capture wire payloads from the real index service into test fixtures.

Run from the repo root after installing the Python package:

    python3 frontend/scripts/capture_fixtures.py

The frontend integration tests replay these exact payloads through a stubbed
fetch, so the UI is tested against genuine service responses.
"""
import json
import urllib.request
from pathlib import Path

from esvforge.index import build_index
from esvforge.service import create_server, start_in_thread
from esvforge.taxonomy import default_registry

FIXTURES = Path(__file__).resolve().parent.parent / "test" / "fixtures"


def fixture_index():
    reg = default_registry()
    t = reg.parse_triplet
    samples = [
        ("fix-001", 0.0, t("setup.scope_setup.scope_insertion")),
        ("fix-001", 10.0, t("setup.instrument_setup.instrument_positioning")),
        ("fix-001", 20.0, t("dissection.landmarking.marking")),
        ("fix-001", 30.0, t("dissection.mucosal_dissection.dissection")),
        ("fix-001", 40.0, t("dissection.mucosal_dissection.bleeding")),
        ("fix-001", 50.0, t("dissection.mucosal_dissection.bleeding")),
        ("fix-001", 60.0, t("dissection.submucosal_dissection.dissection")),
        ("fix-001", 70.0, t("closure.suturing.stitching")),
        ("fix-001", 80.0, t("closure.suturing.clipping_suture")),
        ("fix-001", 90.0, t("scope_removal.scope_removal.scope_removal")),
        ("fix-002", 0.0, t("setup.site_setup.fluid_wash")),
        ("fix-002", 12.0, t("dissection.circular_muscle_dissection.dissection")),
        ("fix-002", 24.0, t("dissection.circular_muscle_dissection.bleeding")),
        ("fix-002", 36.0, t("dissection.circular_muscle_dissection.haemostatis")),
        ("fix-002", 48.0, t("closure.suturing.stitching")),
    ]
    return build_index(samples)


def capture(url: str) -> dict:
    with urllib.request.urlopen(url) as resp:
        return json.loads(resp.read())


def main() -> None:
    server = create_server(fixture_index(), "127.0.0.1:0")
    start_in_thread(server)
    host, port = server.server_address[:2]
    base = f"http://{host}:{port}"
    FIXTURES.mkdir(parents=True, exist_ok=True)
    captured = {
        "surgeries.json": capture(f"{base}/surgeries"),
        "timeline_fix-001.json": capture(f"{base}/surgeries/fix-001/timeline"),
        "timeline_fix-002.json": capture(f"{base}/surgeries/fix-002/timeline"),
        "search_bleeding.json": capture(f"{base}/search?action=Bleeding"),
        "search_bleeding_windowed.json": capture(
            f"{base}/search?action=Bleeding&surgery=fix-001"),
    }
    server.shutdown()
    for name, payload in captured.items():
        (FIXTURES / name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
        print(f"wrote {FIXTURES / name}")


if __name__ == "__main__":
    main()
