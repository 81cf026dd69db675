"""npz packing of block lists (sparse or dense) plus JSON metadata."""
import json

import numpy as np
import scipy.sparse as sp


def pack_blocks(prefix: str, blocks) -> dict:
    out = {f"{prefix}__count": np.array(len(blocks))}
    for n, B in enumerate(blocks):
        key = f"{prefix}__{n}"
        if sp.issparse(B):
            B = B.tocsr()
            out[key + "__data"] = B.data
            out[key + "__indices"] = B.indices
            out[key + "__indptr"] = B.indptr
            out[key + "__shape"] = np.array(B.shape)
        else:
            out[key] = np.asarray(B)
    return out


def unpack_blocks(prefix: str, store) -> list:
    blocks = []
    for n in range(int(store[f"{prefix}__count"])):
        key = f"{prefix}__{n}"
        if key + "__data" in store:
            shape = tuple(store[key + "__shape"])
            blocks.append(sp.csr_matrix((store[key + "__data"], store[key + "__indices"], store[key + "__indptr"]), shape=shape))
        else:
            blocks.append(np.asarray(store[key]))
    return blocks


def pack_json(obj) -> np.ndarray:
    return np.frombuffer(json.dumps(obj).encode(), dtype=np.uint8)


def unpack_json(arr):
    return json.loads(bytes(np.asarray(arr, dtype=np.uint8)).decode())
