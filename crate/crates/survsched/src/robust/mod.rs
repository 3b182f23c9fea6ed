//! Uncertainty sets, dualization and the column-and-constraint-generation loop.
