"""Cityscapes evaluation classes (trainId convention)."""

CLASS_NAMES = (
    "road",
    "sidewalk",
    "building",
    "wall",
    "fence",
    "pole",
    "traffic light",
    "traffic sign",
    "vegetation",
    "terrain",
    "sky",
    "person",
    "rider",
    "car",
    "truck",
    "bus",
    "train",
    "motorcycle",
    "bicycle",
)
N_CLASSES = len(CLASS_NAMES)
VOID = 255
SKY = CLASS_NAMES.index("sky")

FREQUENT_CLASSES = tuple(
    CLASS_NAMES.index(n)
    for n in (
        "road",
        "sidewalk",
        "building",
        "pole",
        "traffic light",
        "traffic sign",
        "vegetation",
        "sky",
        "person",
        "car",
    )
)

INSTANCE_CLASSES = tuple(
    CLASS_NAMES.index(n)
    for n in ("person", "rider", "car", "truck", "bus", "train", "motorcycle", "bicycle")
)

# Cityscapes labelIds of the instance classes; instanceIds rasters encode
# instances as labelId * 1000 + k.
LABEL_ID_TO_TRAIN_ID = {24: 11, 25: 12, 26: 13, 27: 14, 28: 15, 31: 16, 32: 17, 33: 18}
