"""
Teaching the apodization network by picking images
==================================================

Runs a scripted reviewer against a small active-learning session: every
round the reviewer is shown blind candidate images and always picks the
delay-multiply-and-sum one, so the network gradually learns to imitate
that beamformer. The script prints the training trajectory, then verifies
the whole session by replaying its log from scratch.
"""

from pathlib import Path

import numpy as np

from albeam import (ActiveSession, FrameSource, ImageGrid, Method,
                    PhantomSpec, SessionConfig, beamform_head,
                    delay_compensate, desk_probe, desk_unet_config, envelope,
                    fdmas, log_compress, model_weights, render_png,
                    replay_log)

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

# A reduced geometry keeps each round well under a tenth of a second:
# 8 receive channels and a 32 x 16 pixel window around the 20 mm target.
probe = desk_probe(num_channels=8)
grid = ImageGrid.for_probe(probe, depth_px=32, lateral_px=16,
                           z_min=19.5e-3, z_max=20.5e-3)
config = SessionConfig(probe=probe, grid=grid,
                       unet=desk_unet_config(8, stem_channels=4))

# Frames come from a deterministic source: one point target, a fresh seed
# per round, so the session log can later be replayed bit for bit. Session
# logs are append-only records and a session refuses to reopen one, so a
# rerun of this script clears its previous transcript first.
log_path = out_dir / "feedback_log.ndjson"
log_path.unlink(missing_ok=True)
source = FrameSource(phantom=PhantomSpec(point_targets=((0.0, 0.020, 1.0),)),
                     max_depth=0.03, seed0=42)
session = ActiveSession(config, log_path, out_dir / "feedback_ckpt",
                        frame_source=source)

# Render what the untrained network makes of a frame, for comparison.
tensor0 = delay_compensate(source.frame_for_round(1, probe), grid)
before = beamform_head(tensor0, model_weights(tensor0, session.model))
(out_dir / "model_before.png").write_bytes(render_png(before))

print("round  candidates  picked  loss")
for rid in range(1, 41):
    cset = session.next_round()
    session.submit_selection(cset.round_id, cset.token_for(Method.FDMAS))
    if rid % 5 == 0 or rid == 1:
        record = session.loss_history()[-1]
        print(f"{rid:5d}  {len(cset.candidates):10d}  fdmas   "
              f"{record['loss']:.5f}")

# The model candidate enters the lineup after the warmup rounds; by the
# end the network's image should sit close to its teacher.
after = beamform_head(tensor0, model_weights(tensor0, session.model))
(out_dir / "model_after.png").write_bytes(render_png(after))

# The window here is deliberately tiny, so point-spread widths are not
# measurable; compare the images by the quantity the loop optimizes — mean
# squared error against the teacher's normalized B-mode.
teacher = log_compress(envelope(fdmas(tensor0)), method_tag=Method.FDMAS)
before_mse = float(np.mean((before.normalized() - teacher.normalized()) ** 2))
after_mse = float(np.mean((after.normalized() - teacher.normalized()) ** 2))
print(f"\nimage MSE against the teacher: {before_mse:.4f} before training, "
      f"{after_mse:.4f} after")

stats = session.stats()
print(f"\nselections: {stats.counts} over {stats.total} rounds")

report = replay_log(session.log_path, out_dir / "feedback_replay")
print(f"replay from log: {report['rounds']} rounds, "
      f"checkpoint match = {str(report['match']).lower()}")
print(f"images: {out_dir}/model_before.png vs {out_dir}/model_after.png")
