//! Sensitivity scores, fidelity bounds, curve fits and decoherence channels.

mod bounds;
mod fit;
mod noise;
pub(crate) mod score;

pub use bounds::{
    bound_from_curve, bound_record, bound_records, critical_samples, extract_r_ub,
    lower_bound_records, r_lb, v_star, verify_lb_soundness, BoundOptions, BoundRecord, BoundStatus,
    SoundnessReport,
};
pub use fit::{fit_cos2, CosSqFit};
pub use noise::{
    apply_noise, basis_delta_p, basis_probability, noise_delta_p, BasisDeltaP, NoiseParams,
};
pub use score::{
    adv_robustness, correlation_analysis, cosine_similarity, linear_slope, pearson,
    robustness_score, sensitivity, sensitivity_records, AdvRobustness, SensitivityProtocol,
    SensitivityRecord,
};

#[cfg(test)]
mod tests;
