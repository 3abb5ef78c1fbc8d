/// Indoor object classes, roughly following the 3RScan/3DSSG class list.
pub const OBJECT_CLASSES: &[&str] = &[
    "chair",
    "table",
    "cabinet",
    "shelf",
    "sofa",
    "bed",
    "pillow",
    "lamp",
    "picture",
    "curtain",
    "box",
    "plant",
    "desk",
    "stool",
    "trash can",
    "sink",
    "toilet",
    "bathtub",
    "towel",
    "mirror",
    "tv",
    "monitor",
    "keyboard",
    "bag",
    "clothes",
    "kitchen cabinet",
    "counter",
    "refrigerator",
    "stove",
    "microwave",
    "oven",
    "bench",
    "armchair",
    "coffee table",
    "nightstand",
    "wardrobe",
    "commode",
    "radiator",
    "heater",
    "light",
    "ceiling light",
    "blanket",
    "cushion",
    "rack",
    "basket",
    "bottle",
    "bucket",
    "book",
    "carpet",
    "rug",
    "frame",
    "stand",
    "side table",
    "kitchen counter",
    "dining chair",
    "dining table",
    "office chair",
    "whiteboard",
    "printer",
    "closet",
    "tv stand",
    "fireplace",
    "vase",
    "flower",
    "decoration",
    "toy",
    "laptop",
    "telephone",
    "clock",
    "fan",
    "organizer",
    "tray",
    "suitcase",
    "backpack",
    "shoes",
    "cup",
    "plate",
    "pot",
    "bowl",
    "candle",
    "drawer",
    "door",
    "window",
    "ottoman",
    "couch",
    "round table",
    "rectangular table",
    "circular table",
    "footstool",
    "coat rack",
];

/// Relation predicates, following the 3DSSG predicate list.
pub const PREDICATES: &[&str] = &[
    "supported by",
    "left",
    "right",
    "front",
    "behind",
    "close by",
    "inside",
    "bigger than",
    "smaller than",
    "higher than",
    "lower than",
    "same symmetry as",
    "same as",
    "attached to",
    "standing on",
    "lying on",
    "hanging on",
    "connected to",
    "leaning against",
    "part of",
    "belonging to",
    "build in",
    "standing in",
    "cover",
    "lying in",
    "hanging in",
];

/// First `n` entries of `base`, extended with synthetic names when `n`
/// exceeds the list.
pub fn take_vocab(base: &[&str], n: usize, prefix: &str) -> Vec<String> {
    (0..n)
        .map(|i| match base.get(i) {
            Some(s) => (*s).to_owned(),
            None => format!("{prefix} {i}"),
        })
        .collect()
}
