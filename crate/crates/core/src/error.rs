use thiserror::Error;

/// Every failure the library reports. Variant names double as the
/// machine-readable code printed by the CLI.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DelabError {
    #[error("DimensionTooSmall: N = {0} (need N >= 3)")]
    DimensionTooSmall(usize),
    #[error("AlphaOutOfRange: alpha = {0} (need alpha > 1/2)")]
    AlphaOutOfRange(f64),
    #[error("SOutOfRange: s = {0} (need 0 <= s <= 2, or s < 2 for this operation)")]
    SOutOfRange(f64),
    #[error("NotInExplicitRegime: closed form needs alpha = 1 and s = 1 + 2/N (got alpha = {alpha}, s = {s})")]
    NotInExplicitRegime { alpha: f64, s: f64 },
    #[error("NonpositiveDilation: lambda = {0}")]
    NonpositiveDilation(f64),
    #[error("NonpositiveAmplitude: u0 = {0}")]
    NonpositiveAmplitude(f64),
    #[error("SingularPoint: 1 + 2x_N + |x|^2 = {0:e}")]
    SingularPoint(f64),
    #[error("OutsideDomain: point {0:?} is not in the field's domain")]
    OutsideDomain(Vec<f64>),
    #[error("TooCloseToSingularSet: distance {distance:e} < {required:e}")]
    TooCloseToSingularSet { distance: f64, required: f64 },
    #[error("DomainMismatch: {0}")]
    DomainMismatch(String),
    #[error("WeightNotIntegrable: exponent {0} <= -1")]
    WeightNotIntegrable(f64),
    #[error("NoConvergence: stopped after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("PointNotOnSphere: |x| = {norm} but sigma = {sigma}")]
    PointNotOnSphere { norm: f64, sigma: f64 },
    #[error("NonFiniteSample at node {0}")]
    NonFiniteSample(usize),
    #[error("AxisOutOfRange: axis {axis} (tangential axes are 1..={max})")]
    AxisOutOfRange { axis: usize, max: usize },
    #[error("ZeroDenominator: weighted L^p integral vanishes")]
    ZeroDenominator,
    #[error("NotConverged: minimizer result did not converge")]
    NotConverged,
    #[error("DegenerateTrace: {0}")]
    DegenerateTrace(String),
    #[error("NonpositiveField: minimum sample {0:e}")]
    NonpositiveField(f64),
    #[error("IllConditionedFit: {0}")]
    IllConditionedFit(String),
    #[error("NonpositiveSamples: spherical mean {0:e} at a sampled radius")]
    NonpositiveSamples(f64),
    #[error("NonpositiveValue: u(b, 0) = {0:e}")]
    NonpositiveValue(f64),
    #[error("NonpositiveRadius: {0}")]
    NonpositiveRadius(f64),
    #[error("InvalidGrid: {0}")]
    InvalidGrid(String),
    #[error("UnsupportedDimension: {0}")]
    UnsupportedDimension(String),
    #[error("Format: {0}")]
    Format(String),
    #[error("Io: {0}")]
    Io(String),
}

impl DelabError {
    /// The variant name, e.g. `"SOutOfRange"`.
    pub fn code(&self) -> &'static str {
        use DelabError::*;
        match self {
            DimensionTooSmall(_) => "DimensionTooSmall",
            AlphaOutOfRange(_) => "AlphaOutOfRange",
            SOutOfRange(_) => "SOutOfRange",
            NotInExplicitRegime { .. } => "NotInExplicitRegime",
            NonpositiveDilation(_) => "NonpositiveDilation",
            NonpositiveAmplitude(_) => "NonpositiveAmplitude",
            SingularPoint(_) => "SingularPoint",
            OutsideDomain(_) => "OutsideDomain",
            TooCloseToSingularSet { .. } => "TooCloseToSingularSet",
            DomainMismatch(_) => "DomainMismatch",
            WeightNotIntegrable(_) => "WeightNotIntegrable",
            NoConvergence { .. } => "NoConvergence",
            PointNotOnSphere { .. } => "PointNotOnSphere",
            NonFiniteSample(_) => "NonFiniteSample",
            AxisOutOfRange { .. } => "AxisOutOfRange",
            ZeroDenominator => "ZeroDenominator",
            NotConverged => "NotConverged",
            DegenerateTrace(_) => "DegenerateTrace",
            NonpositiveField(_) => "NonpositiveField",
            IllConditionedFit(_) => "IllConditionedFit",
            NonpositiveSamples(_) => "NonpositiveSamples",
            NonpositiveValue(_) => "NonpositiveValue",
            NonpositiveRadius(_) => "NonpositiveRadius",
            InvalidGrid(_) => "InvalidGrid",
            UnsupportedDimension(_) => "UnsupportedDimension",
            Format(_) => "Format",
            Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for DelabError {
    fn from(e: std::io::Error) -> Self {
        DelabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DelabError>;
