"""Drive the HTTP service the way an annotation frontend would.

Starts the server in-process over a temporary project, then walks the
review loop with plain HTTP: open a session, auto-label the sequence,
inspect the staged result, accept it, touch up one track, undo, and
score the final annotations against ground truth.

Run:
    python demos/serve_and_annotate.py
"""

import json
import math
import tempfile
import threading
import time
import urllib.request

from lidarlabel.store import ProjectStore
from lidarlabel.synth import AgentSpec, SceneConfig, generate_scene, synth_detector

HOST, PORT = "127.0.0.1", 8123
BASE = f"http://{HOST}:{PORT}"


def call(method, path, body=None):
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(BASE + path, data=data, method=method)
    if data is not None:
        req.add_header("Content-Type", "application/json")
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def main():
    root = tempfile.mkdtemp(prefix="lidarlabel_serve_")
    store = ProjectStore(root)
    store.create_project()
    agents = [
        AgentSpec("vehicle", start=(-25, -5), heading=0.0, speed=2.0),
        AgentSpec("pedestrian", start=(5, 20), heading=-math.pi / 2,
                  speed=1.2),
    ]
    seq = generate_scene(SceneConfig(duration=60, agents=agents,
                                     density=2.0, ground_density=0.002,
                                     seed=21))
    dets = synth_detector(seq, box_noise=0.05, tp_score=(0.7, 1.0), seed=22)
    store.add_sequence("demo", seq, detections=dets)

    import uvicorn
    from lidarlabel.server import create_app

    server = uvicorn.Server(uvicorn.Config(create_app(store), host=HOST,
                                           port=PORT, log_level="error"))
    threading.Thread(target=server.run, daemon=True).start()
    while not server.started:
        time.sleep(0.05)

    session = call("GET", "/sequences/demo/session")
    print(f"session: revision {session['revision']}, "
          f"undo depth {session['undo_depth']}")

    job = call("POST", "/sequences/demo/autolabel",
               {"revision": session["revision"]})
    print(f"autolabel: job {job['job_id']} {job['status']}, "
          f"revision {job['revision']}, {len(job['pending'])} tracks staged")

    staged = call("GET", "/sequences/demo/staged")
    print(f"staged: pending {staged['pending']}, "
          f"flagged {staged['flagged'] or 'none'}")
    call("POST", "/sequences/demo/staged/accept", {})

    doc = call("GET", "/sequences/demo/annotations")
    track = doc["tracks"][0]
    entry = track["entries"][0]
    entry["box"][6] += math.pi  # annotator flips one heading by hand
    put = call("PUT", "/sequences/demo/annotations",
               {"revision": doc["revision"], "tracks": doc["tracks"]})
    print(f"manual edit: revision {put['revision']}")

    undone = call("POST", "/sequences/demo/undo", {"revision": put["revision"]})
    print(f"undo: revision {undone['revision']} (undid #{undone['undid']})")

    report = call("POST", "/eval", {"sequence_id": "demo", "kind": "f1"})
    for cls, m in report["classes"].items():
        print(f"eval {cls}: f1 {m['f1']:.3f} "
              f"(tp {m['tp']}, fp {m['fp']}, fn {m['fn']})")
    print(f"mean F1 {report['mean_f1']:.3f}")

    server.should_exit = True


if __name__ == "__main__":
    main()
