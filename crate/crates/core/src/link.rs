//! Link functions mapping probabilities to the linear predictor scale.
//!
//! `forward` is the link g itself (probability to linear predictor) and
//! `inverse` is g⁻¹. Both are evaluated with numerically stable formulations;
//! probabilities where a link is unbounded are rejected, never clamped.
//!
//! Near p = 1 the f64 grid is too coarse for tail work (spacing 2⁻⁵³), so the
//! complement channel [`LinkFunction::inverse_complement`] /
//! [`LinkFunction::forward_from_complement`] carries q = 1 − p directly at
//! full relative precision. Use it whenever a probability may sit within a
//! few hundred ulps of 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether averaging commutes with the link-scale contrast.
///
/// For collapsible links the conversion between effects at different baseline
/// probabilities is affine, so conditional and marginal effects agree whenever
/// interactions are absent; non-collapsible links bend the conversion and the
/// two estimands separate even in purely prognostic models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Collapsibility {
    Collapsible,
    NonCollapsible,
}

/// The link g in g(P(Y = 1 | x)) = η(x).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkFunction {
    Logit,
    Probit,
    Log,
    Identity,
    Cloglog,
}

impl LinkFunction {
    /// Stable lowercase name used in reports and error messages.
    pub fn name(self) -> &'static str {
        match self {
            LinkFunction::Logit => "logit",
            LinkFunction::Probit => "probit",
            LinkFunction::Log => "log",
            LinkFunction::Identity => "identity",
            LinkFunction::Cloglog => "cloglog",
        }
    }

    /// Classifies the link by whether its effect-conversion map is affine.
    pub fn collapsibility(self) -> Collapsibility {
        match self {
            LinkFunction::Identity | LinkFunction::Log => Collapsibility::Collapsible,
            LinkFunction::Logit | LinkFunction::Probit | LinkFunction::Cloglog => {
                Collapsibility::NonCollapsible
            }
        }
    }

    /// g(p): probability to linear predictor.
    ///
    /// Rejects p outside [0, 1] for every link, and p exactly 0 or 1 wherever
    /// the link is unbounded there (logit/probit/cloglog both ends, log at 0).
    pub fn forward(self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(self.domain_error(p));
        }
        match self {
            LinkFunction::Logit => {
                if p == 0.0 || p == 1.0 {
                    return Err(self.domain_error(p));
                }
                Ok((p / (1.0 - p)).ln())
            }
            LinkFunction::Probit => {
                if p == 0.0 || p == 1.0 {
                    return Err(self.domain_error(p));
                }
                Ok(normal::quantile(p))
            }
            LinkFunction::Log => {
                if p == 0.0 {
                    return Err(self.domain_error(p));
                }
                Ok(p.ln())
            }
            LinkFunction::Identity => Ok(p),
            LinkFunction::Cloglog => {
                if p == 0.0 || p == 1.0 {
                    return Err(self.domain_error(p));
                }
                Ok((-(-p).ln_1p()).ln())
            }
        }
    }

    /// g⁻¹(η): linear predictor to probability.
    ///
    /// Total on the real line for logit/probit/cloglog; for log the predictor
    /// must be ≤ 0 and for identity it must lie in [0, 1].
    pub fn inverse(self, eta: f64) -> Result<f64> {
        if eta.is_nan() {
            return Err(self.range_error(eta));
        }
        match self {
            LinkFunction::Logit => Ok(expit(eta)),
            LinkFunction::Probit => Ok(normal::cdf(eta)),
            LinkFunction::Log => {
                if eta > 0.0 {
                    return Err(self.range_error(eta));
                }
                Ok(eta.exp())
            }
            LinkFunction::Identity => {
                if !(0.0..=1.0).contains(&eta) {
                    return Err(self.range_error(eta));
                }
                Ok(eta)
            }
            LinkFunction::Cloglog => Ok(-(-eta.exp()).exp_m1()),
        }
    }

    /// 1 − g⁻¹(η) without cancellation, for tail-accurate survival-style work.
    pub fn inverse_complement(self, eta: f64) -> Result<f64> {
        if eta.is_nan() {
            return Err(self.range_error(eta));
        }
        match self {
            LinkFunction::Logit => Ok(expit(-eta)),
            LinkFunction::Probit => Ok(normal::cdf(-eta)),
            LinkFunction::Log => {
                if eta > 0.0 {
                    return Err(self.range_error(eta));
                }
                Ok(-eta.exp_m1())
            }
            LinkFunction::Identity => {
                if !(0.0..=1.0).contains(&eta) {
                    return Err(self.range_error(eta));
                }
                Ok(1.0 - eta)
            }
            LinkFunction::Cloglog => Ok((-eta.exp()).exp()),
        }
    }

    /// g(1 − q) with q the complement probability, again without
    /// cancellation. Inverse of [`LinkFunction::inverse_complement`].
    pub fn forward_from_complement(self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(self.domain_error(1.0 - q));
        }
        match self {
            LinkFunction::Logit => {
                if q == 0.0 || q == 1.0 {
                    return Err(self.domain_error(1.0 - q));
                }
                Ok((-q).ln_1p() - q.ln())
            }
            LinkFunction::Probit => {
                if q == 0.0 || q == 1.0 {
                    return Err(self.domain_error(1.0 - q));
                }
                Ok(-normal::quantile(q))
            }
            LinkFunction::Log => {
                if q == 1.0 {
                    return Err(self.domain_error(0.0));
                }
                Ok((-q).ln_1p())
            }
            LinkFunction::Identity => Ok(1.0 - q),
            LinkFunction::Cloglog => {
                if q == 0.0 || q == 1.0 {
                    return Err(self.domain_error(1.0 - q));
                }
                Ok((-q.ln()).ln())
            }
        }
    }

    fn domain_error(self, p: f64) -> Error {
        Error::LinkDomain {
            link: self.name(),
            probability: p,
        }
    }

    fn range_error(self, eta: f64) -> Error {
        Error::LinkRange {
            link: self.name(),
            eta,
        }
    }
}

/// Logistic sigmoid, evaluated on the non-overflowing branch.
pub(crate) fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Standard normal CDF and quantile at full double precision.
#[allow(clippy::excessive_precision)]
pub(crate) mod normal {
    use std::f64::consts::FRAC_1_SQRT_2;

    /// Φ(x) via the complementary error function, accurate to a few ulps
    /// including the far lower tail (Φ(-30) ≈ 4.9e-198).
    pub fn cdf(x: f64) -> f64 {
        0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
    }

    /// Φ⁻¹(p) by Wichura's rational approximations (algorithm AS 241,
    /// PPND16 variant), relative accuracy about 1e-15 over (0, 1).
    pub fn quantile(p: f64) -> f64 {
        debug_assert!(p > 0.0 && p < 1.0);
        let q = p - 0.5;
        if q.abs() <= 0.425 {
            let r = 0.180625 - q * q;
            return q * rational(r, &CENTRAL_NUM, &CENTRAL_DEN);
        }
        let r = if q < 0.0 { p } else { 1.0 - p };
        let r = (-r.ln()).sqrt();
        let x = if r <= 5.0 {
            rational(r - 1.6, &MIDDLE_NUM, &MIDDLE_DEN)
        } else {
            rational(r - 5.0, &TAIL_NUM, &TAIL_DEN)
        };
        if q < 0.0 {
            -x
        } else {
            x
        }
    }

    fn rational(r: f64, num: &[f64; 8], den: &[f64; 8]) -> f64 {
        horner(r, num) / horner(r, den)
    }

    fn horner(r: f64, c: &[f64; 8]) -> f64 {
        c.iter().rev().fold(0.0, |acc, &ci| acc * r + ci)
    }

    const CENTRAL_NUM: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const CENTRAL_DEN: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const MIDDLE_NUM: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const MIDDLE_DEN: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const TAIL_NUM: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const TAIL_DEN: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
}
