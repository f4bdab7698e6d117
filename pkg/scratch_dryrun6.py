"""Dry run of the end-to-end training criterion at full scale."""
import sys, time
sys.path.insert(0, "src")
import numpy as np
from mrfpipe.config import RunConfig, model_config_from, schedule_from, train_config_from
from mrfpipe.cli import _generate_sample
from mrfpipe.epg import build_dictionary, default_grid
from mrfpipe.subspace import fit_subspace
from mrfpipe.train import compress_samples, train
from mrfpipe.model import Checkpoint, build_model, reconstruct
from mrfpipe.matching import match_maps, compress_atoms
from mrfpipe.metrics import evaluate

t_all = time.perf_counter()
cfg = RunConfig()
sched = schedule_from(cfg)
d = build_dictionary(sched, default_grid(), normalize=True)
basis = fit_subspace(d, cfg.subspace.d1)
print(f"dict+basis: {time.perf_counter()-t_all:.1f}s", flush=True)

seed = 0
raw_train = [_generate_sample(cfg, sched, seed=seed + 1000 + i) for i in range(50)]
raw_val = [_generate_sample(cfg, sched, seed=seed + 9000 + i) for i in range(10)]
samples = compress_samples(raw_train, basis)
val_samples = compress_samples(raw_val, basis)
print(f"samples ready: {time.perf_counter()-t_all:.1f}s", flush=True)

model = build_model(model_config_from(cfg), seed=seed)
tc = train_config_from(cfg, seed=seed)
print("train config:", tc, flush=True)


def progress(rec):
    if rec.epoch % 5 == 0 or rec.epoch == 1:
        print(f"epoch {rec.epoch} train {rec.train_loss:.5f} val {rec.val_loss:.5f} "
              f"[{time.perf_counter()-t_all:.0f}s]", flush=True)


result, _ = train(model, samples, tc, val_samples=val_samples, on_epoch=progress)
print(f"training done in {result.seconds:.0f}s", flush=True)

ckpt = Checkpoint(model=model, basis=basis)
catoms = compress_atoms(d, basis)
net_t1, net_t2, dm_t1, dm_t2 = [], [], [], []
for (tsmi, truth) in raw_val:
    maps, _ = reconstruct(tsmi, ckpt)
    rep = evaluate(maps, truth, method="network")
    net_t1.append(rep.t1.normalized_mae); net_t2.append(rep.t2.normalized_mae)
    dm_maps = match_maps(tsmi, d, basis=basis)
    repd = evaluate(dm_maps, truth, method="dm")
    dm_t1.append(repd.t1.normalized_mae); dm_t2.append(repd.t2.normalized_mae)
print("network nmae T1:", np.mean(net_t1), "T2:", np.mean(net_t2))
print("comp DM nmae T1:", np.mean(dm_t1), "T2:", np.mean(dm_t2))
print("per-sample net T1:", [f"{v:.3f}" for v in net_t1])
print("per-sample net T2:", [f"{v:.3f}" for v in net_t2])
print("per-sample dm  T1:", [f"{v:.3f}" for v in dm_t1])
print("per-sample dm  T2:", [f"{v:.3f}" for v in dm_t2])
print(f"total {time.perf_counter()-t_all:.0f}s")
