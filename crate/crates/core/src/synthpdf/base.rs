//! The library of parameterized 1D base functions from which synthetic
//! densities are composed.
//!
//! Each row is a non-negative function on `[0, S]` where `S` is the domain
//! upper bound of the axis it is placed on. `R` is a fresh uniform draw from
//! `[0, 1]` per instantiation, and rows with a discrete parameter choice
//! (`α`, or `(μ, σ)` for the Gaussian bump) pick one option uniformly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard value added to semi-diverging denominators and to the sinc row.
pub const BASE_EPSILON: f64 = 1e-6;

/// Number of grid points used when a minimum-maximum constraint is checked.
pub const MAX_SCAN_POINTS: usize = 4096;

const RESAMPLE_LIMIT: usize = 1000;

/// Shape characteristic labels used to filter the base-function library.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Gaussian,
    Linear,
    Monotone,
    Sinusoidal,
    Step,
    Inverse,
    Power,
}

impl std::str::FromStr for Tag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Tag::Gaussian),
            "linear" => Ok(Tag::Linear),
            "monotone" => Ok(Tag::Monotone),
            "sinusoidal" => Ok(Tag::Sinusoidal),
            "step" => Ok(Tag::Step),
            "inverse" => Ok(Tag::Inverse),
            "power" => Ok(Tag::Power),
            other => Err(Error::Format(format!("unknown tag `{other}`"))),
        }
    }
}

impl std::fmt::Display for Tag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Tag::Gaussian => "gaussian",
            Tag::Linear => "linear",
            Tag::Monotone => "monotone",
            Tag::Sinusoidal => "sinusoidal",
            Tag::Step => "step",
            Tag::Inverse => "inverse",
            Tag::Power => "power",
        };
        f.write_str(s)
    }
}

/// Include/exclude characteristic filters over [`Tag`]s.
///
/// A row survives when it carries at least one included tag (or the include
/// list is empty) and none of the excluded tags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TagFilter {
    #[serde(default)]
    pub include: Vec<Tag>,
    #[serde(default)]
    pub exclude: Vec<Tag>,
}

impl TagFilter {
    pub fn admits(&self, tags: &[Tag]) -> bool {
        let included = self.include.is_empty() || tags.iter().any(|t| self.include.contains(t));
        included && !tags.iter().any(|t| self.exclude.contains(t))
    }

    /// Include and exclude sets must be disjoint.
    pub fn is_consistent(&self) -> bool {
        !self.include.iter().any(|t| self.exclude.contains(t))
    }
}

/// The base-function rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    /// `1 / (1 + e^{-Rx})`
    Sigmoid,
    /// `2R/(σ√(2π)) · e^{-(x-μ)²/(2σ²)}` with a discrete `(μ, σ)` choice
    Gaussian,
    /// `S - x`
    SlopeDown,
    /// `min(1/(4x+ε), 1000)`
    InverseCapped,
    /// `1/(4x+ε)`
    Inverse,
    /// `min(αR, 1/(50x+ε))`, `α ∈ {0.5, 2, 4}`
    InverseLevel,
    /// `max(αRS, x)`, `α ∈ {0.4, 0.8}`
    FloorMax,
    /// `αRx`, `α ∈ {2, 3}`
    LinearScaled,
    /// `x / (4·max(0.2, R))`
    LinearDamped,
    /// `S² - x²`
    ParabolaDown,
    /// `(S - x)²`
    ParabolaShifted,
    /// `x^{αR}`, `α ∈ {1, 2}`
    PowerRandom,
    /// `S - x^{max(αR, 0.05)}`, `α ∈ {1, 2}`, clamped at zero
    PowerDrop,
    /// `1 if x > max(R, 0.6)·S else 0`
    StepAbove,
    /// `1 if x < max(R, 0.4)·S else 0`
    StepBelow,
    /// `1 if x < 0.25RS or x > 0.75RS else 0`
    StepOutside,
    /// `1 if max(0.25R, 0.1)·S < x < max(0.75R, 0.4)·S else 0`
    StepInside,
    /// `x`
    LinearUp,
    /// `x²`
    Parabola,
    /// `√x`
    Root,
    /// `sin(x) + 1`
    SinShifted,
    /// `cos(x) + 1`
    CosShifted,
    /// `|sin(x)|`
    SinAbs,
    /// `|cos(x)|`
    CosAbs,
    /// `|sin(x) / (x + ε)|`
    SincAbs,
}

/// All rows, in a fixed order used for uniform selection.
pub const ALL_KINDS: [BaseKind; 25] = [
    BaseKind::Sigmoid,
    BaseKind::Gaussian,
    BaseKind::SlopeDown,
    BaseKind::InverseCapped,
    BaseKind::Inverse,
    BaseKind::InverseLevel,
    BaseKind::FloorMax,
    BaseKind::LinearScaled,
    BaseKind::LinearDamped,
    BaseKind::ParabolaDown,
    BaseKind::ParabolaShifted,
    BaseKind::PowerRandom,
    BaseKind::PowerDrop,
    BaseKind::StepAbove,
    BaseKind::StepBelow,
    BaseKind::StepOutside,
    BaseKind::StepInside,
    BaseKind::LinearUp,
    BaseKind::Parabola,
    BaseKind::Root,
    BaseKind::SinShifted,
    BaseKind::CosShifted,
    BaseKind::SinAbs,
    BaseKind::CosAbs,
    BaseKind::SincAbs,
];

impl BaseKind {
    /// Shape characteristics of the row.
    pub fn tags(self) -> &'static [Tag] {
        use BaseKind::*;
        match self {
            Sigmoid | FloorMax => &[Tag::Monotone],
            Gaussian => &[Tag::Gaussian],
            SlopeDown | LinearScaled | LinearDamped | LinearUp => &[Tag::Linear, Tag::Monotone],
            InverseCapped | Inverse | InverseLevel => &[Tag::Inverse, Tag::Monotone],
            ParabolaDown | ParabolaShifted | PowerRandom | PowerDrop | Parabola | Root => {
                &[Tag::Power, Tag::Monotone]
            }
            StepAbove | StepBelow | StepOutside | StepInside => &[Tag::Step],
            SinShifted | CosShifted | SinAbs | CosAbs | SincAbs => &[Tag::Sinusoidal],
        }
    }

    fn alpha_choices(self) -> &'static [f64] {
        match self {
            BaseKind::InverseLevel => &[0.5, 2.0, 4.0],
            BaseKind::FloorMax => &[0.4, 0.8],
            BaseKind::LinearScaled => &[2.0, 3.0],
            BaseKind::PowerRandom | BaseKind::PowerDrop => &[1.0, 2.0],
            _ => &[],
        }
    }
}

/// A fully parameterized base function on `[0, S]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseFunctionSpec {
    pub kind: BaseKind,
    /// The uniform `[0,1]` draw `R`.
    pub r: f64,
    /// The domain upper bound `S` of the owning axis.
    pub s: f64,
    /// Chosen `α` for rows that define one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Chosen `μ` for the Gaussian row (absolute, already scaled by `RS`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Chosen `σ` for the Gaussian row (absolute, already scaled by `S`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl BaseFunctionSpec {
    pub fn tags(&self) -> &'static [Tag] {
        self.kind.tags()
    }

    /// Evaluate the row formula at `x ∈ [0, S]`.
    ///
    /// Total and non-negative on the domain; the capped rows bound the
    /// semi-diverging shapes, and `PowerDrop` is clamped at zero because its
    /// exponent may exceed one, which would take `S - x^e` negative near
    /// `x = S`.
    pub fn eval(&self, x: f64) -> f64 {
        use BaseKind::*;
        let r = self.r;
        let s = self.s;
        match self.kind {
            Sigmoid => 1.0 / (1.0 + (-r * x).exp()),
            Gaussian => {
                let mu = self.mu.expect("gaussian row carries mu");
                let sigma = self.sigma.expect("gaussian row carries sigma");
                let norm = 2.0 * r / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                let z = (x - mu) / sigma;
                norm * (-0.5 * z * z).exp()
            }
            SlopeDown => s - x,
            InverseCapped => (1.0 / (4.0 * x + BASE_EPSILON)).min(1000.0),
            Inverse => 1.0 / (4.0 * x + BASE_EPSILON),
            InverseLevel => {
                let alpha = self.alpha.expect("inverse-level row carries alpha");
                (alpha * r).min(1.0 / (50.0 * x + BASE_EPSILON))
            }
            FloorMax => {
                let alpha = self.alpha.expect("floor-max row carries alpha");
                (alpha * r * s).max(x)
            }
            LinearScaled => self.alpha.expect("scaled-linear row carries alpha") * r * x,
            LinearDamped => x / (4.0 * r.max(0.2)),
            ParabolaDown => s * s - x * x,
            ParabolaShifted => (s - x) * (s - x),
            PowerRandom => x.powf(self.alpha.expect("power row carries alpha") * r),
            PowerDrop => {
                let e = (self.alpha.expect("power-drop row carries alpha") * r).max(0.05);
                (s - x.powf(e)).max(0.0)
            }
            StepAbove => {
                if x > r.max(0.6) * s {
                    1.0
                } else {
                    0.0
                }
            }
            StepBelow => {
                if x < r.max(0.4) * s {
                    1.0
                } else {
                    0.0
                }
            }
            StepOutside => {
                if x < 0.25 * r * s || x > 0.75 * r * s {
                    1.0
                } else {
                    0.0
                }
            }
            StepInside => {
                if (0.25 * r).max(0.1) * s < x && x < (0.75 * r).max(0.4) * s {
                    1.0
                } else {
                    0.0
                }
            }
            LinearUp => x,
            Parabola => x * x,
            Root => x.sqrt(),
            SinShifted => x.sin() + 1.0,
            CosShifted => x.cos() + 1.0,
            SinAbs => x.sin().abs(),
            CosAbs => x.cos().abs(),
            SincAbs => (x.sin() / (x + BASE_EPSILON)).abs(),
        }
    }

    /// Maximum of the row over an inclusive grid on `[0, S]`.
    pub fn grid_max(&self, points: usize) -> f64 {
        let step = self.s / (points - 1) as f64;
        (0..points)
            .map(|i| self.eval(i as f64 * step))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Draw one parameterized base function.
///
/// The kind is uniform over the rows surviving `filter`; `R` and the discrete
/// variants are drawn fresh. With `min_base_max > 0` (the high-dimensional
/// regime) draws whose grid maximum falls below the bound are resampled.
pub fn sample_base_function<R: Rng + ?Sized>(
    rng: &mut R,
    domain_extent: f64,
    filter: &TagFilter,
    min_base_max: f64,
) -> Result<BaseFunctionSpec> {
    assert!(domain_extent > 0.0, "domain extent must be positive");
    let kinds: Vec<BaseKind> = ALL_KINDS
        .iter()
        .copied()
        .filter(|k| filter.admits(k.tags()))
        .collect();
    if kinds.is_empty() {
        return Err(Error::FilterEmpty);
    }
    for _ in 0..RESAMPLE_LIMIT {
        let kind = kinds[rng.gen_range(0..kinds.len())];
        let r: f64 = rng.gen();
        let mut spec = BaseFunctionSpec {
            kind,
            r,
            s: domain_extent,
            alpha: None,
            mu: None,
            sigma: None,
        };
        let alphas = kind.alpha_choices();
        if !alphas.is_empty() {
            spec.alpha = Some(alphas[rng.gen_range(0..alphas.len())]);
        }
        if kind == BaseKind::Gaussian {
            const MU_FACTORS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
            const SIGMA_FACTORS: [f64; 3] = [0.05, 0.1, 0.2];
            let mu = MU_FACTORS[rng.gen_range(0..MU_FACTORS.len())] * r * domain_extent;
            let sigma = SIGMA_FACTORS[rng.gen_range(0..SIGMA_FACTORS.len())] * domain_extent;
            spec.mu = Some(mu);
            spec.sigma = Some(sigma);
        }
        if min_base_max > 0.0 && spec.grid_max(MAX_SCAN_POINTS) < min_base_max {
            continue;
        }
        return Ok(spec);
    }
    Err(Error::RetryExhausted {
        attempts: RESAMPLE_LIMIT,
    })
}
