//! Numerical toolkit for the degenerate elliptic equation
//! `-div(|x_N|^{2 alpha} grad u) = K |x_N|^{alpha p - s} |u|^{p-2} u`, `p = 2(N-s)/(N-2)`.

pub mod analytic;
pub mod awf;
pub mod error;
pub mod field;
pub mod identities;
pub mod krylov;
pub mod params;
pub mod probes;
pub mod quadrature;
pub mod rng;
pub mod varmin;
pub mod wgrid;
pub mod xforms;

pub use analytic::FamilyParameters;
pub use error::{DelabError, Result};
pub use field::{AnalyticField, Domain};
pub use identities::{KazdanWarnerReport, PohozaevReport};
pub use params::{derive_exponents, validate_params, DerivedExponents, ProblemParams};
pub use probes::SingularityFit;
pub use quadrature::SphereQuadrature;
pub use rng::Lcg64;
pub use varmin::{GroundStateResult, MinimizerConfig, ProfileFit};
pub use wgrid::{GridField, GridSpec};
pub use xforms::{TargetEquation, TransformedField};
