//! Schedule decoding, fixed-scenario evaluation and metrics.
