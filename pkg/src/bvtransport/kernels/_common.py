"""Shared constants for the kernel lanes and the catalog layer.

Family codes select the construction variant in the hot evaluators. The
"negative jet" amplitude is -5 for the plain variants and -1 for the tangent
variants (whose period-averaged radial flux vanishes).
"""

FAM_OUTWARD = 0
FAM_TANGENT = 1
FAM_OUTWARD_MIXING = 2
FAM_TANGENT_MIXING = 3
FAM_INWARD = 4

FAMILY_CODES = {
    "outward": FAM_OUTWARD,
    "tangent": FAM_TANGENT,
    "outward_mixing": FAM_OUTWARD_MIXING,
    "tangent_mixing": FAM_TANGENT_MIXING,
    "inward": FAM_INWARD,
}

VARIANT_TAGS = tuple(FAMILY_CODES)


def neg_value(fam: int) -> float:
    """Amplitude of the inward radial jets for a family code."""
    return -5.0 if fam in (FAM_OUTWARD, FAM_OUTWARD_MIXING) else -1.0
