"""Fixed metadata vocabulary of the attribution dataset."""

from __future__ import annotations

# group name -> one-hot column suffixes, in published column order
FEATURE_GROUPS: dict[str, tuple[str, ...]] = {
    "growth_strain": (
        "ccdb_survival",
        "dh10b",
        "dh5alpha",
        "neb_stable",
        "other",
        "stbl3",
        "top10",
        "xl1_blue",
    ),
    "growth_temp": ("30", "37", "other"),
    "copy_number": ("high_copy", "low_copy", "unknown"),
    "species": (
        "budding_yeast",
        "fly",
        "human",
        "mouse",
        "mustard_weed",
        "nematode",
        "other",
        "rat",
        "synthetic",
        "zebrafish",
    ),
    "bacterial_resistance": (
        "ampicillin",
        "chloramphenicol",
        "kanamycin",
        "other",
        "spectinomycin",
    ),
    "selectable_markers": (
        "blasticidin",
        "his3",
        "hygromycin",
        "leu2",
        "neomycin",
        "other",
        "puromycin",
        "trp1",
        "ura3",
        "zeocin",
    ),
}

# groups where a record may carry several values at once
MULTI_VALUED_GROUPS = frozenset({"selectable_markers"})

FEATURE_COLUMNS: tuple[str, ...] = tuple(
    f"{group}_{suffix}" for group, suffixes in FEATURE_GROUPS.items() for suffix in suffixes
)

COMPOSITE_CATEGORY = "Unknown Engineered"
