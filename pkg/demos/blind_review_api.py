"""
Driving a blind review round over HTTP
======================================

Starts the review server in-process and plays the part of a browser client
with nothing but urllib: fetch the open round, note that the payload names
no beamformer, download a candidate image, submit a pick, and read the
reveal that comes back. Two rounds are played so the token rotation is
visible.
"""

import json
from pathlib import Path
from urllib.request import Request, urlopen

from albeam import (ActiveSession, ApiServer, FrameSource, ImageGrid, Method,
                    PhantomSpec, SessionConfig, desk_probe, desk_unet_config)

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

probe = desk_probe(num_channels=8)
config = SessionConfig(
    probe=probe,
    grid=ImageGrid.for_probe(probe, depth_px=32, lateral_px=16,
                             z_min=19.5e-3, z_max=20.5e-3),
    unet=desk_unet_config(8, stem_channels=4),
    warmup_rounds=2)
source = FrameSource(phantom=PhantomSpec(point_targets=((0.0, 0.020, 1.0),)),
                     max_depth=0.03, seed0=7)

log_path = out_dir / "review_log.ndjson"
log_path.unlink(missing_ok=True)
session = ActiveSession(config, log_path, out_dir / "review_ckpt",
                        frame_source=source)

# Port 0 asks the OS for any free port; the server thread is a daemon so
# the script exits cleanly either way.
server = ApiServer(session, port=0).start()
base = f"http://127.0.0.1:{server.port}"
print(f"serving on {base}")

try:
    for _ in range(2):
        snapshot = json.load(urlopen(f"{base}/api/session/round"))
        ids = [c["id"] for c in snapshot["candidates"]]
        print(f"\nround {snapshot['round_id']}: "
              f"{len(ids)} anonymous candidates")
        print(f"  first id: {ids[0]}")

        # Nothing in the round payload hints at which method made which
        # image — the whole JSON contains no method name.
        blob = json.dumps(snapshot).lower()
        leaks = [m.value for m in Method if m.value in blob]
        print(f"  method names in payload: {leaks or 'none'}")

        png = urlopen(f"{base}{snapshot['candidates'][0]['image_url']}").read()
        is_png = png[:4] == b"\x89PNG"
        print(f"  candidate image: {len(png)} bytes, "
              f"png magic = {str(is_png).lower()}")

        # Pick the first candidate, whatever it is; the response reveals
        # the mapping only after the choice is locked in.
        body = json.dumps({"round_id": snapshot["round_id"],
                           "candidate_id": ids[0]}).encode()
        reply = json.load(urlopen(Request(
            f"{base}/api/session/select", data=body,
            headers={"Content-Type": "application/json"})))
        picked = reply["revealed"][ids[0]]
        print(f"  picked {ids[0][:12]}… which was: {picked}")
        print(f"  loss {float(reply['loss']):.5f}, "
              f"selections so far {reply['stats']['counts']}")
finally:
    server.shutdown()

print("\nserver stopped")
