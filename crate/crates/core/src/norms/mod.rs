//! Band norms, frequency envelopes, mixed space-time norms and the
//! Strichartz, commutator and paraproduct diagnostics.

mod envelope;

pub use envelope::{
    band_norms_all, band_sobolev_norm, canonical_envelope, envelope_constant, make_envelope,
    Envelope,
};

mod mixed;

pub use mixed::{error_norm, mixed_norm, time_norm, trapezoid_weights, Exponent, MixedNormSpec};

mod strichartz;

pub use strichartz::{
    band_scale, commutator_check, default_pairs, free_wave, sk_norm, strichartz_check,
    StrichartzRatio,
};

mod para;

pub use para::{
    paradecompose_diagnostics, paradecompose_slice, ParaAccumulator, ParaReport, ParaSpec,
    ProductTerm,
};

mod report;

pub use report::{norm_report, MixedRow, NormMeta, NormOptions, NormReport, ResidualRow, SkRow};
