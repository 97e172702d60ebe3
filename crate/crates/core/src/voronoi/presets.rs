//! Bundled forms with their archimedean parameters, test function and
//! numerical settings.

use crate::coefficients::{self, CoefficientProvider};
use crate::gammafactors::ReprParams;
use crate::transforms::{ContourControl, OmegaKernel, TestFunction, TransformError};

use super::{Truncation, VoronoiError};

pub const PRESET_NAMES: [&str; 3] = ["sym2-delta", "delta-x-delta", "delta-x-delta16"];

/// Largest coefficient index the presets compute; covers the dual sums of
/// the acceptance configurations with room to spare.
pub const PRESET_BOUND: u64 = 40_000;

/// Gaussian in `ln(x/8)` with variance `1/56`, cut off at `|ln(x/8)| = 1`.
pub fn preset_omega() -> TestFunction {
    TestFunction::log_gaussian_bump(8.0, 1.0, 1.0 / 56.0).expect("valid parameters")
}

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: String,
    pub provider: CoefficientProvider,
    pub repr: ReprParams,
    pub omega: TestFunction,
    pub ctrl: ContourControl,
    pub trunc: Truncation,
    /// Relative tolerance for balanced checks.
    pub tolerance: f64,
}

fn repr(lambda: &[f64], delta: &[u8]) -> Result<ReprParams, VoronoiError> {
    ReprParams::real(lambda, delta).map_err(|e| VoronoiError::Transform(TransformError::Gamma(e)))
}

impl Preset {
    pub fn load(name: &str) -> Result<Self, VoronoiError> {
        Self::load_with_bound(name, PRESET_BOUND)
    }

    pub fn load_with_bound(name: &str, bound: u64) -> Result<Self, VoronoiError> {
        let (provider, repr, tolerance) = match name {
            "sym2-delta" => (coefficients::sym2_delta(bound)?, repr(&[11.0, -11.0, 0.0], &[1, 0, 1])?, 1e-5),
            "delta-x-delta" => (coefficients::delta_x_delta(bound)?, repr(&[11.0, 0.0, 0.0, -11.0], &[1, 1, 0, 0])?, 1e-3),
            "delta-x-delta16" => (coefficients::delta_x_delta16(bound)?, repr(&[13.0, 2.0, -2.0, -13.0], &[1, 1, 0, 0])?, 1e-3),
            other => return Err(VoronoiError::InvalidParams(format!("unknown preset {other:?}; expected one of {PRESET_NAMES:?}"))),
        };
        Ok(Preset {
            name: name.to_string(),
            provider,
            repr,
            omega: preset_omega(),
            ctrl: ContourControl::default(),
            trunc: Truncation { n_limit: bound, ..Truncation::default() },
            tolerance,
        })
    }

    pub fn rank(&self) -> usize {
        self.provider.rank()
    }

    pub fn kernel(&self) -> Result<OmegaKernel, VoronoiError> {
        Ok(OmegaKernel::build(&self.omega, &self.repr, &self.ctrl)?)
    }
}
