"""Foggy dataset construction: multi-beta versions, inherited annotations,
automatic input selection, bounding boxes, statistics and SSL manifests.

Input tree (``name`` is the image stem)::

    leftImg/<name>.png                  clear left image
    rightImg/<name>.png                 right image of the stereo pair
    disparity/<name>.png                16-bit disparity, 0 = invalid
    camera/<name>.json                  {"fx", "fy", "cx", "cy", "baseline"}
    gtFine/<name>_labelTrainIds.png     optional, trainIds with 255 = void
    gtFine/<name>_instanceIds.png       optional, labelId * 1000 + k per instance

Output tree, one subtree per beta::

    beta_<beta>/foggy/<name>.png
    beta_<beta>/meta/<name>.json        sidecar
    beta_<beta>/gtFine/...              byte copies of the annotations
    beta_<beta>/bboxes/<name>.json      when instance ids exist
    rejects.txt, errors.txt, stats.json
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import hashlib
import json
import logging
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import io
from .classes import CLASS_NAMES, INSTANCE_CLASSES, LABEL_ID_TO_TRAIN_ID, N_CLASSES, SKY, VOID
from .core import CameraRig
from .depth import denoise_and_complete
from .fog import AtmosphericLight, estimate_atmospheric_light, fog_from_depth, mor_from_beta
from .params import DEFAULT_BETAS, DEFAULT_SEED, PipelineParams

log = logging.getLogger(__name__)

LABEL_SUFFIX = "_labelTrainIds.png"
INSTANCE_SUFFIX = "_instanceIds.png"


@dataclass(frozen=True)
class BBox:
    instance_id: int
    class_id: int
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def to_dict(self):
        return {
            "instance_id": self.instance_id,
            "class_id": self.class_id,
            "class": CLASS_NAMES[self.class_id],
            "bbox": [self.x_min, self.y_min, self.x_max, self.y_max],
        }


def sky_criterion(light, labels):
    """True iff the atmospheric-light pixel carries the ``sky`` label."""
    u, v = light.pixel if isinstance(light, AtmosphericLight) else light
    labels = np.asarray(labels)
    if not (0 <= v < labels.shape[0] and 0 <= u < labels.shape[1]):
        raise ValueError(f"pixel ({u}, {v}) outside the label map")
    return bool(labels[v, u] == SKY)


def _instance_class(instance_id, classes):
    if classes is not None:
        return int(classes[instance_id])
    label_id = instance_id // 1000
    if label_id not in LABEL_ID_TO_TRAIN_ID:
        raise ValueError(f"instance id {instance_id} encodes non-instance labelId {label_id}")
    return LABEL_ID_TO_TRAIN_ID[label_id]


def instances_to_bboxes(instances, classes=None):
    """Tight inclusive boxes, one per instance, ordered by instance id.

    Without ``classes`` the raster follows the Cityscapes encoding where
    values >= 1000 are ``labelId * 1000 + k`` and smaller values are
    non-instance pixels. With ``classes`` (instance id -> trainId), every
    nonzero id is an instance.
    """
    inst = np.asarray(instances, dtype=np.int64)
    if classes is None:
        mask = inst >= 1000
    else:
        mask = inst > 0
    ids, inverse = np.unique(np.where(mask, inst, 0), return_inverse=True)
    inverse = inverse.reshape(inst.shape)
    boxes = []
    for k, sl in enumerate(ndimage.find_objects(inverse + 1)):
        iid = int(ids[k])
        if sl is None or iid == 0:
            continue
        cls = _instance_class(iid, classes)
        if cls not in INSTANCE_CLASSES:
            raise ValueError(f"class {cls} of instance {iid} is not an instance class")
        boxes.append(BBox(iid, cls, sl[1].start, sl[0].start, sl[1].stop - 1, sl[0].stop - 1))
    return boxes


def dataset_stats(label_maps, instance_maps=()):
    """Per-class pixel and instance counts; void pixels are reported apart."""
    pixels = np.zeros(N_CLASSES, dtype=np.int64)
    void = 0
    total = 0
    for labels in label_maps:
        labels = np.asarray(labels)
        total += labels.size
        is_void = labels == VOID
        void += int(is_void.sum())
        vals = labels[~is_void]
        if vals.size and (vals.min() < 0 or vals.max() >= N_CLASSES):
            raise ValueError("label map holds ids outside the class table")
        pixels += np.bincount(vals.ravel(), minlength=N_CLASSES)
    instances = np.zeros(N_CLASSES, dtype=np.int64)
    for inst in instance_maps:
        for box in instances_to_bboxes(inst):
            instances[box.class_id] += 1
    return {
        "pixels": {n: int(c) for n, c in zip(CLASS_NAMES, pixels)},
        "void_pixels": int(void),
        "total_pixels": int(total),
        "instances": {CLASS_NAMES[c]: int(instances[c]) for c in INSTANCE_CLASSES},
    }


# --- SSL manifest -----------------------------------------------------------


@dataclass
class SslManifest:
    entries: list
    w: float
    lam: float
    n_labeled: int
    n_pseudo_pool: int
    seed: int

    @property
    def header(self):
        return {
            "lambda": self.lam,
            "w": self.w,
            "l": self.n_labeled,
            "u": self.n_pseudo_pool,
            "seed": self.seed,
            "n_entries": len(self.entries),
            "n_human": sum(e["source"] == "human" for e in self.entries),
            "n_transferred": sum(e["source"] == "transferred" for e in self.entries),
        }

    def to_ndjson(self):
        lines = [json.dumps({"header": self.header}, sort_keys=True)]
        lines += [json.dumps(e, sort_keys=True) for e in self.entries]
        return "\n".join(lines) + "\n"

    def write(self, path):
        io.atomic_write_bytes(path, self.to_ndjson().encode())


def _as_pair(item):
    if isinstance(item, dict):
        return str(item["foggy_image_path"]), str(item.get("label_path", ""))
    if isinstance(item, (str, Path)):
        return str(item), ""
    foggy, label = item
    return str(foggy), str(label)


def pseudo_epoch_order(n, seed, epoch):
    return np.random.default_rng(np.random.SeedSequence([int(seed), 1, int(epoch)])).permutation(n)


def build_ssl_manifest(labeled, pseudo, w=5.0, seed=DEFAULT_SEED):
    """Interleave human-labeled and pseudo-labeled images in a 1:w stream.

    Every labeled entry appears once (shuffled); ``round(l * w)`` pseudo
    entries are drawn without replacement, reshuffling per epoch when the
    pool runs dry. The header records ``lambda = (l / u) * w``.
    """
    labeled = [_as_pair(x) for x in labeled]
    pseudo = [_as_pair(x) for x in pseudo]
    w = float(w)
    if not w > 0:
        raise ValueError("w must be > 0")
    if not labeled:
        raise ValueError("labeled list is empty")
    if not pseudo:
        raise ValueError("pseudo-labeled list is empty")
    l, u = len(labeled), len(pseudo)
    n_pseudo = int(np.floor(l * w + 0.5))

    lab_order = np.random.default_rng(np.random.SeedSequence([int(seed), 0])).permutation(l)
    stream = []
    epoch = 0
    while len(stream) < n_pseudo:
        stream.extend(pseudo_epoch_order(u, seed, epoch).tolist())
        epoch += 1

    entries = []
    taken = 0
    for i, j in enumerate(lab_order):
        foggy, label = labeled[j]
        entries.append({"foggy_image_path": foggy, "label_path": label, "source": "human"})
        upto = int(np.floor((i + 1) * w + 0.5))
        for k in stream[taken:upto]:
            foggy, label = pseudo[k]
            entries.append(
                {"foggy_image_path": foggy, "label_path": label, "source": "transferred"}
            )
        taken = upto
    return SslManifest(entries, w, l * w / u, l, u, int(seed))


# --- dataset build ----------------------------------------------------------


@dataclass
class ImageInputs:
    name: str
    left: Path
    right: Path
    disparity: Path
    camera: Path
    labels: Path = None
    instances: Path = None


@dataclass
class BuildReport:
    written: list = field(default_factory=list)
    rejects: list = field(default_factory=list)  # (name, reason)
    errors: list = field(default_factory=list)  # (name, message)

    @property
    def ok(self):
        return not self.errors


def discover_inputs(input_root):
    root = Path(input_root)
    left_dir = root / "leftImg"
    if not left_dir.is_dir():
        raise FileNotFoundError(f"input tree lacks {left_dir}")
    items = []
    for left in sorted(left_dir.glob("*.png")):
        name = left.stem
        labels = root / "gtFine" / f"{name}{LABEL_SUFFIX}"
        instances = root / "gtFine" / f"{name}{INSTANCE_SUFFIX}"
        items.append(
            ImageInputs(
                name=name,
                left=left,
                right=root / "rightImg" / f"{name}.png",
                disparity=root / "disparity" / f"{name}.png",
                camera=root / "camera" / f"{name}.json",
                labels=labels if labels.is_file() else None,
                instances=instances if instances.is_file() else None,
            )
        )
    return items


def image_seed(seed, name):
    digest = int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "little")
    return int(np.random.SeedSequence([int(seed), digest]).generate_state(1)[0])


def beta_dirname(beta):
    return f"beta_{float(beta):g}"


def sidecar(beta, light, seed, params):
    return {
        "beta": float(beta),
        "mor_m": mor_from_beta(beta) if beta > 0 else None,
        "atmospheric_light": light.to_dict(),
        "seed": int(seed),
        "params_sha256": params.sha256(),
    }


def load_allowlist(path):
    if path is None:
        return None
    lines = Path(path).read_text().splitlines()
    return {ln.strip() for ln in lines if ln.strip() and not ln.startswith("#")}


def check_inputs(item):
    for attr in ("left", "right", "disparity", "camera"):
        p = getattr(item, attr)
        if not Path(p).is_file():
            raise FileNotFoundError(f"missing {attr} input: {p}")


def process_image(item, betas, out_root, params, seed):
    """Run one image through every beta. Returns (name, light, sky_ok or None)."""
    check_inputs(item)
    left = io.read_image(item.left)
    right = io.read_image(item.right)
    disparity = io.read_disparity(item.disparity)
    rig = CameraRig.load(item.camera)
    rig.check_bounds(left.shape[1], left.shape[0])
    seed_i = image_seed(seed, item.name)
    depth = denoise_and_complete(left, right, disparity, rig, params, seed_i)
    light = estimate_atmospheric_light(left)
    label_bytes = item.labels.read_bytes() if item.labels else None
    inst_bytes = item.instances.read_bytes() if item.instances else None
    boxes = None
    if item.instances:
        boxes = [b.to_dict() for b in instances_to_bboxes(io.read_png(item.instances))]
    sky_ok = None
    if item.labels:
        sky_ok = sky_criterion(light, io.read_labels(item.labels))

    out_root = Path(out_root)
    written = []
    for beta in betas:
        sub = out_root / beta_dirname(beta)
        result = fog_from_depth(left, depth, rig, beta, params, light=light)
        paths = {
            "foggy": sub / "foggy" / f"{item.name}.png",
            "meta": sub / "meta" / f"{item.name}.json",
        }
        io.write_image(paths["foggy"], result.foggy)
        io.write_json(paths["meta"], sidecar(beta, light, seed_i, params))
        if label_bytes is not None:
            io.atomic_write_bytes(sub / "gtFine" / item.labels.name, label_bytes)
        if inst_bytes is not None:
            io.atomic_write_bytes(sub / "gtFine" / item.instances.name, inst_bytes)
            io.write_json(sub / "bboxes" / f"{item.name}.json", boxes)
        written.extend(str(p) for p in paths.values())
    return light, sky_ok, written


def build_dataset(input_root, output_root, betas=DEFAULT_BETAS, params=None,
                  seed=DEFAULT_SEED, threads=1, allowlist=None):
    """Build one foggy copy of the input tree per beta.

    Images failing the sky criterion (or missing from the optional overcast
    allowlist) are listed in ``rejects.txt`` but still rendered. Per-image
    failures are recorded in ``errors.txt`` and do not stop the batch.
    """
    params = params or PipelineParams()
    out_root = Path(output_root)
    out_root.mkdir(parents=True, exist_ok=True)
    items = discover_inputs(input_root)
    allowed = load_allowlist(allowlist) if isinstance(allowlist, (str, Path)) else allowlist

    def run(item):
        try:
            return item, process_image(item, betas, out_root, params, seed), None
        except Exception as exc:  # recorded per image, batch continues
            return item, None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        results = list(pool.map(run, items))

    report = BuildReport()
    label_maps, instance_maps = [], []
    for item, out, err in results:
        if err is not None:
            log.error("%s: %s", item.name, err)
            report.errors.append((item.name, err))
            continue
        light, sky_ok, written = out
        report.written.extend(written)
        if sky_ok is False:
            report.rejects.append((item.name, f"atmospheric light pixel {list(light.pixel)} not sky"))
        if allowed is not None and item.name not in allowed:
            report.rejects.append((item.name, "not in overcast allowlist"))
        if item.labels:
            label_maps.append(io.read_labels(item.labels))
        if item.instances:
            instance_maps.append(io.read_png(item.instances))
        log.info("%s: done", item.name)

    io.atomic_write_bytes(
        out_root / "rejects.txt", "".join(f"{n}\t{r}\n" for n, r in report.rejects).encode()
    )
    io.atomic_write_bytes(
        out_root / "errors.txt", "".join(f"{n}\t{e}\n" for n, e in report.errors).encode()
    )
    if label_maps:
        io.write_json(out_root / "stats.json", dataset_stats(label_maps, instance_maps))
    return report
