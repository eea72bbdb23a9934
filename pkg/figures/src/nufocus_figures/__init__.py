__version__ = "0.1.0"

from .render import (
    EmptyInputError,
    FigureSpec,
    MissingColumnError,
    PANEL_KINDS,
    RenderError,
    build_figure,
    infer_kind,
    load_table,
    render,
)
