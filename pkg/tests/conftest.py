import numpy as np

TINY_TRAIN = {"epochs": 2, "batch_size": 4, "width": 8, "depth": 3,
              "embed_dim": 8}


def tiny_snapshot_doc(out_dir):
    """Seconds-scale snapshot experiment used across orchestration tests."""
    return {
        "out_dir": str(out_dir),
        "seed": 0,
        "baselines": True,
        "data": {"hr_resolution": 16, "lr_resolution": 8,
                 "n_lflr": 6, "n_hfhr": 6, "n_test": 3,
                 "hr_dt": 0.05, "lr_dt": 0.05, "horizon": 0.1},
        "score_train": dict(TINY_TRAIN),
        "cascade_train": dict(TINY_TRAIN),
        "search": {"n_t1": 2, "n_t2": 2},
        "sampler": {"steps": 4},
    }


def tiny_trajectory_doc(out_dir):
    return {
        "out_dir": str(out_dir),
        "seed": 0,
        "data": {"hr_resolution": 16, "lr_resolution": 8,
                 "n_lflr": 3, "n_hfhr": 3, "n_test": 2,
                 "hr_dt": 0.05, "lr_dt": 0.05,
                 "snapshots": 2, "snapshot_dt": 0.1},
        "score_train": dict(TINY_TRAIN),
        "cascade_train": dict(TINY_TRAIN, batch_size=3),
        "fno": {"epochs": 2, "modes": 2, "width": 8, "layers": 2,
                "batch_size": 2},
        "search": {"n_t1": 2, "n_t2": 2},
        "sampler": {"steps": 4},
    }


def fd_grad(f, x, eps=1e-6):
    """Central-difference gradient of scalar f at array x (the oracle side)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        hi = f(x)
        flat[i] = keep - eps
        lo = f(x)
        flat[i] = keep
        gflat[i] = (hi - lo) / (2.0 * eps)
    return g


def rel_err(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(b.ravel()), 1e-300)
    return np.linalg.norm((a - b).ravel()) / denom
