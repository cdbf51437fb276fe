"""
On-disk formats and their integrity checks
==========================================

Walks the two binary containers the package ships: the RF frame file used
to move raw channel data around, and the training checkpoint. Both carry
a trailing content checksum, so this script also demonstrates what happens
when a stored byte goes bad.
"""

from pathlib import Path

import numpy as np

from albeam import (Adam, ImageGrid, IntegrityError, PhantomSpec, TrainConfig,
                    UNet, checkpoint_checksum, delay_compensate, desk_probe,
                    desk_unet_config, envelope, fdmas, load_checkpoint,
                    log_compress, read_rfbin, save_checkpoint,
                    synthesize_frame, train_step, write_rfbin)

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

# --- RF frames -------------------------------------------------------------

probe = desk_probe()
phantom = PhantomSpec(point_targets=((0.0, 0.020, 1.0),),
                      speckle_density=1.0, rng_seed=5)
frame = synthesize_frame(phantom, probe, max_depth=0.03)

frame_path = out_dir / "frame.rfbin"
write_rfbin(frame_path, frame)
size = frame_path.stat().st_size
print(f"frame file: {size} bytes for {frame.samples.shape} float64 samples")

# Reading gives back the same object, confirmed by the content digest the
# simulator assigns to every frame.
loaded = read_rfbin(frame_path)
print(f"digest on write {frame.digest()[:16]}…, "
      f"on read {loaded.digest()[:16]}…, "
      f"equal = {str(frame.digest() == loaded.digest()).lower()}")

# Flip one byte in the middle of the payload: the reader refuses the file
# instead of returning silently corrupted samples.
blob = bytearray(frame_path.read_bytes())
blob[size // 2] ^= 0xFF
(out_dir / "frame_corrupt.rfbin").write_bytes(bytes(blob))
try:
    read_rfbin(out_dir / "frame_corrupt.rfbin")
except IntegrityError as err:
    print(f"corrupted frame rejected: {err}")

# --- checkpoints -----------------------------------------------------------

# Train a small network for a few steps so the checkpoint holds non-trivial
# parameters, optimizer moments and normalization statistics.
grid = ImageGrid.for_probe(probe, depth_px=32, lateral_px=16,
                           z_min=19.5e-3, z_max=20.5e-3)
tensor = delay_compensate(frame, grid)
model = UNet(desk_unet_config(16, stem_channels=4))
opt = Adam(TrainConfig())
target = log_compress(envelope(fdmas(tensor)))
for _ in range(3):
    result = train_step(tensor, target, model, opt)
print(f"\ntrained 3 steps, last loss {result.loss:.5f}")

ckpt_path = out_dir / "model.ckpt"
checksum = save_checkpoint(ckpt_path, model, opt)
print(f"checkpoint: {ckpt_path.stat().st_size} bytes, checksum {checksum}")

# Loading restores the exact state: same parameters, same Adam step count,
# and the stored checksum re-validates on demand.
model2, opt2 = load_checkpoint(ckpt_path, expected_config=model.cfg)
same = all(np.array_equal(a, b)
           for (_, a), (_, b) in zip(model.named_params(),
                                     model2.named_params()))
print(f"round trip: parameters identical = {str(same).lower()}, "
      f"optimizer step {opt2.t}, checksum revalidates "
      f"{checkpoint_checksum(ckpt_path)}")

blob = bytearray(ckpt_path.read_bytes())
blob[len(blob) // 3] ^= 0x01
(out_dir / "model_corrupt.ckpt").write_bytes(bytes(blob))
try:
    checkpoint_checksum(out_dir / "model_corrupt.ckpt")
except IntegrityError as err:
    print(f"corrupted checkpoint rejected: {err}")
