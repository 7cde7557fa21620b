"""Table schemas for the photographic and spectrographic catalogs.

Column kinds:
  int    signed 64-bit integer (also used for bitmask columns)
  float  64-bit float
  bool   stored as 0/1
  str    UTF-8 text
  enum   small named code set, stored as int8
  time   load timestamp, microseconds since the Unix epoch (UTC);
         rendered as ISO-8601 text at the interfaces

Every table ends with a loadTime column.  loadTime is assigned at insert
and never appears in CSV input.  PhotoObj's cx/cy/cz may be omitted from
CSVs (derived from ra/dec) and htmID is always recomputed by the loader.
"""

from __future__ import annotations

from dataclasses import dataclass, field

OBJ_TYPES = ("star", "galaxy", "trail", "defect", "unknown")
SPEC_CLASSES = ("star", "galaxy", "qso", "unknown")

# Bit assignments for the PhotoObj flags word.
PHOTO_FLAGS = {
    "PRIMARY": 0x1,
    "SECONDARY": 0x2,
    "SATURATED": 0x4,
    "BLENDED": 0x8,
    "CHILD": 0x10,
    "EDGE": 0x20,
}

BANDS = ("u", "g", "r", "i", "z")

# Radial brightness profile: mean flux in 8 concentric rings.
PROFILE_BINS = 8

HTM_DEPTH = 20

# Neighbor pairs are materialized out to this separation.
NEIGHBOR_RADIUS_ARCMIN = 0.5


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    enum: tuple[str, ...] | None = None


@dataclass(frozen=True)
class ForeignKey:
    column: str
    ref_table: str
    ref_column: str
    zero_means_none: bool = False


@dataclass(frozen=True)
class TableSchema:
    name: str
    columns: tuple[Column, ...]
    key: tuple[str, ...]
    foreign_keys: tuple[ForeignKey, ...] = ()
    cluster_by: tuple[str, ...] = ()
    derived: tuple[str, ...] = ()

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def loadable_columns(self) -> tuple[Column, ...]:
        return tuple(c for c in self.columns if c.kind != "time")


def _cols(*specs):
    out = []
    for s in specs:
        if len(s) == 2:
            out.append(Column(s[0], s[1]))
        else:
            out.append(Column(s[0], s[1], s[2]))
    return tuple(out)


_PHOTO_COLUMNS = _cols(
    ("objID", "int"),
    ("fieldID", "int"),
    ("ra", "float"),
    ("dec", "float"),
    ("cx", "float"),
    ("cy", "float"),
    ("cz", "float"),
    ("htmID", "int"),
    ("objType", "enum", OBJ_TYPES),
    ("flags", "int"),
    ("status", "int"),
    ("parentID", "int"),
    ("isPrimary", "bool"),
    *[("modelMag_%s" % b, "float") for b in BANDS],
    *[("modelMagErr_%s" % b, "float") for b in BANDS],
    ("petroRad_r", "float"),
    *[("profile_%d" % i, "float") for i in range(PROFILE_BINS)],
    ("specObjID", "int"),
    ("loadTime", "time"),
)

PHOTO_TAG_COLUMNS = (
    "objID",
    "htmID",
    "ra",
    "dec",
    "objType",
    "flags",
    "modelMag_u",
    "modelMag_g",
    "modelMag_r",
    "modelMag_i",
    "modelMag_z",
)

TABLES: dict[str, TableSchema] = {}


def _table(schema: TableSchema) -> TableSchema:
    TABLES[schema.name] = schema
    return schema


PHOTO_OBJ = _table(
    TableSchema(
        name="PhotoObj",
        columns=_PHOTO_COLUMNS,
        key=("objID",),
        foreign_keys=(
            ForeignKey("fieldID", "Field", "fieldID"),
            ForeignKey("parentID", "PhotoObj", "objID", zero_means_none=True),
            ForeignKey("specObjID", "SpecObj", "specObjID", zero_means_none=True),
        ),
        cluster_by=("htmID", "objID"),
        derived=("cx", "cy", "cz", "htmID"),
    )
)

PHOTO_TAG = _table(
    TableSchema(
        name="PhotoTag",
        columns=tuple(
            PHOTO_OBJ.column(n) for n in PHOTO_TAG_COLUMNS
        ) + (Column("loadTime", "time"),),
        key=("objID",),
        cluster_by=("htmID", "objID"),
    )
)

FIELD = _table(
    TableSchema(
        name="Field",
        columns=_cols(
            ("fieldID", "int"),
            ("run", "int"),
            ("camcol", "int"),
            ("fieldNum", "int"),
            ("raMin", "float"),
            ("raMax", "float"),
            ("decMin", "float"),
            ("decMax", "float"),
            ("loadTime", "time"),
        ),
        key=("fieldID",),
    )
)

PLATE = _table(
    TableSchema(
        name="Plate",
        columns=_cols(
            ("plateID", "int"),
            ("ra", "float"),
            ("dec", "float"),
            ("mjd", "int"),
            ("loadTime", "time"),
        ),
        key=("plateID",),
    )
)

SPEC_OBJ = _table(
    TableSchema(
        name="SpecObj",
        columns=_cols(
            ("specObjID", "int"),
            ("plateID", "int"),
            ("fiberID", "int"),
            ("ra", "float"),
            ("dec", "float"),
            ("z", "float"),
            ("zErr", "float"),
            ("specClass", "enum", SPEC_CLASSES),
            ("loadTime", "time"),
        ),
        key=("specObjID",),
        foreign_keys=(ForeignKey("plateID", "Plate", "plateID"),),
    )
)

SPEC_LINE = _table(
    TableSchema(
        name="SpecLine",
        columns=_cols(
            ("lineID", "int"),
            ("specObjID", "int"),
            ("wavelength", "float"),
            ("ew", "float"),
            ("height", "float"),
            ("loadTime", "time"),
        ),
        key=("lineID",),
        foreign_keys=(ForeignKey("specObjID", "SpecObj", "specObjID"),),
    )
)

SPEC_LINE_INDEX = _table(
    TableSchema(
        name="SpecLineIndex",
        columns=_cols(
            ("indexID", "int"),
            ("specObjID", "int"),
            ("name", "str"),
            ("value", "float"),
            ("loadTime", "time"),
        ),
        key=("indexID",),
        foreign_keys=(ForeignKey("specObjID", "SpecObj", "specObjID"),),
    )
)

XC_REDSHIFT = _table(
    TableSchema(
        name="XCRedshift",
        columns=_cols(
            ("specObjID", "int"),
            ("z", "float"),
            ("confidence", "float"),
            ("templateName", "str"),
            ("loadTime", "time"),
        ),
        key=("specObjID",),
        foreign_keys=(ForeignKey("specObjID", "SpecObj", "specObjID"),),
    )
)

EL_REDSHIFT = _table(
    TableSchema(
        name="ElRedshift",
        columns=_cols(
            ("specObjID", "int"),
            ("z", "float"),
            ("nLines", "int"),
            ("loadTime", "time"),
        ),
        key=("specObjID",),
        foreign_keys=(ForeignKey("specObjID", "SpecObj", "specObjID"),),
    )
)

NEIGHBORS = _table(
    TableSchema(
        name="Neighbors",
        columns=_cols(
            ("objID", "int"),
            ("neighborObjID", "int"),
            ("distance", "float"),
            ("loadTime", "time"),
        ),
        key=("objID", "neighborObjID"),
        foreign_keys=(
            ForeignKey("objID", "PhotoObj", "objID"),
            ForeignKey("neighborObjID", "PhotoObj", "objID"),
        ),
    )
)

# FK-topological order used by the loader and by dependency checks.
# PhotoObj carries a specObjID reference, so spectra load before photometry.
LOAD_ORDER = (
    "Field",
    "Plate",
    "SpecObj",
    "PhotoObj",
    "SpecLine",
    "SpecLineIndex",
    "XCRedshift",
    "ElRedshift",
    "Neighbors",
)

# Tables loadable through the CSV loader (PhotoTag is maintained internally).
LOADABLE_TABLES = LOAD_ORDER

# View name -> (base table, implicit filter text).  Empty filter means the
# whole table.
VIEWS = {
    "PhotoObj": ("PhotoObj", ""),
    "PhotoTag": ("PhotoTag", ""),
    "Field": ("Field", ""),
    "Plate": ("Plate", ""),
    "SpecObj": ("SpecObj", ""),
    "SpecLine": ("SpecLine", ""),
    "SpecLineIndex": ("SpecLineIndex", ""),
    "XCRedshift": ("XCRedshift", ""),
    "ElRedshift": ("ElRedshift", ""),
    "Neighbors": ("Neighbors", ""),
    "PrimaryObjects": ("PhotoObj", "(flags & fPhotoFlags('primary')) != 0"),
    "Stars": (
        "PhotoObj",
        "(flags & fPhotoFlags('primary')) != 0 AND objType = 'star'",
    ),
    "Galaxies": (
        "PhotoObj",
        "(flags & fPhotoFlags('primary')) != 0 AND objType = 'galaxy'",
    ),
}

# Short magnitude aliases usable in filter expressions over PhotoObj rows.
MAG_ALIASES = {b: "modelMag_%s" % b for b in BANDS}


def resolve_view(name: str):
    """(base table schema, implicit filter text) for a view or table name.

    Lookup is case-insensitive; raises KeyError for unknown names.
    """
    for key, (base, pred) in VIEWS.items():
        if key.lower() == name.lower():
            return TABLES[base], pred
    raise KeyError(name)
