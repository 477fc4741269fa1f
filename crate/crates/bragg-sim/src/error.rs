//! Error type shared by all simulator modules.

/// Errors produced by the simulator library.
#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum SimError {
    /// A frequency fell outside the declared validity window of the
    /// dispersion Taylor model.
    #[error("wavelength {wavelength_nm:.2} nm outside dispersion model validity window [{min_nm:.1}, {max_nm:.1}] nm")]
    OutsideValidity {
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    /// The sideband root search found no sign change in the bracket.
    #[error("no phase-matched sideband pair for pump {pump_nm:.2} nm within the search bracket")]
    NoPhaseMatch { pump_nm: f64 },

    /// A frequency quartet violates its energy-conservation law.
    #[error("quartet violates energy conservation: relative residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    InvalidQuartet { residual: f64, tolerance: f64 },

    /// Least-squares fit failed to converge.
    #[error("fiber fit did not converge; final rms residual {rms_nm:.3} nm after {iterations} iterations")]
    FitDidNotConverge { rms_nm: f64, iterations: usize },

    /// Fit called with no data points.
    #[error("fiber fit requires at least one data point")]
    EmptyFit,

    /// Fit called with fewer residuals than free parameters.
    #[error("fiber fit underdetermined: {residuals} residuals for {free} free parameters")]
    UnderdeterminedFit { residuals: usize, free: usize },

    /// Pair amplitude outside [0, 1).
    #[error("pair amplitude must satisfy 0 <= epsilon < 1, got {0}")]
    InvalidEpsilon(f64),

    /// A probability-valued parameter left [0, 1].
    #[error("{name} must be a probability in [0, 1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },

    /// Transfer matrix does not satisfy |mu|^2 + |nu|^2 = 1.
    #[error("transfer matrix not unitary: |mu|^2 + |nu|^2 = {0:.15}")]
    NonUnitaryMap(f64),

    /// Mode-map input has weight outside the conserved-total-photon region.
    #[error("state has probability {weight:.3e} at total photon number above the truncation; raise n_max")]
    TruncationOverflow { weight: f64 },

    /// Attempted to normalize a zero state or condition on a zero-probability event.
    #[error("herald click probability is zero; conditional state undefined")]
    ZeroClickProbability,

    /// Amplitude array does not match the declared truncation.
    #[error("amplitude array length {got} does not match (n_max+1)^2 = {expected}")]
    BadAmplitudeShape { got: usize, expected: usize },

    /// Normalization of an all-zero amplitude array.
    #[error("cannot normalize a zero-norm state")]
    ZeroNorm,

    /// Estimator cannot be formed from the available counts.
    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(&'static str),

    /// Invalid parameter in a spec or config structure.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Spectral profile violates its grid invariants.
    #[error("invalid spectral profile: {0}")]
    InvalidProfile(String),

    /// Scenario/preset config problem (missing key, bad value, bad reference).
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, SimError>;
