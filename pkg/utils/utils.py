import os
import json
import hashlib
import tempfile
import numpy as np

# keys that change where/how a run executes but not what it computes
_UNHASHED_KEYS = ('out', 'num_workers', 'parallel', 'func', 'verbose')


def cfg_dict(cfg):
    if isinstance(cfg, dict):
        return cfg
    else:
        return vars(cfg)


def to_builtin(obj):
    """
    Recursively convert numpy scalars/arrays and tuples into plain json types
    """
    if isinstance(obj, dict):
        return {str(k): to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_builtin(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_builtin(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj):
    return json.dumps(to_builtin(obj), indent=2, sort_keys=True)


def config_hash(cfg):
    cfg = {k: v for k, v in cfg_dict(cfg).items() if k not in _UNHASHED_KEYS}
    blob = json.dumps(to_builtin(cfg), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(blob.encode('utf-8')).hexdigest()


def atomic_write(path, text):
    """
    write to a temp file in the target directory, then rename over the target
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix='.tmp_', suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, 'w', newline='') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def save_json(obj, path):
    return atomic_write(path, dumps(obj) + '\n')


def save_frame(frame, path, index=False):
    return atomic_write(path, frame.to_csv(index=index, lineterminator='\n'))


def save_cfg(cfg, save_path):
    cfg = {k: v for k, v in cfg_dict(cfg).items() if k != 'func'}
    cfg_file = os.path.join(save_path, 'cfg.json')
    return save_json(cfg, cfg_file)
