//! Isotropic variogram models.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VariogramKind {
    Exponential,
    Spherical,
    Gaussian,
    Linear,
    Power,
    HoleEffect,
}

impl VariogramKind {
    pub const ALL: [VariogramKind; 6] = [
        VariogramKind::HoleEffect,
        VariogramKind::Exponential,
        VariogramKind::Spherical,
        VariogramKind::Linear,
        VariogramKind::Power,
        VariogramKind::Gaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariogramKind::Exponential => "exponential",
            VariogramKind::Spherical => "spherical",
            VariogramKind::Gaussian => "gaussian",
            VariogramKind::Linear => "linear",
            VariogramKind::Power => "power",
            VariogramKind::HoleEffect => "hole-effect",
        }
    }

    /// Kinds whose semivariance never decreases with lag.
    pub fn is_monotone(self) -> bool {
        self != VariogramKind::HoleEffect
    }
}

impl fmt::Display for VariogramKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariogramKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "exponential" => VariogramKind::Exponential,
            "spherical" => VariogramKind::Spherical,
            "gaussian" => VariogramKind::Gaussian,
            "linear" => VariogramKind::Linear,
            "power" => VariogramKind::Power,
            "hole-effect" | "hole_effect" | "holeeffect" => VariogramKind::HoleEffect,
            other => return Err(Error::invalid(format!("unknown variogram kind {other:?}"))),
        })
    }
}

/// Variogram kind plus its parameters.
///
/// Parameters a kind does not use keep neutral values (`range = 1`,
/// `exponent = 1`, `slope = 0`). For the power kind `sill` is the scale
/// factor in front of `lag^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramModel {
    pub kind: VariogramKind,
    pub sill: f64,
    pub range: f64,
    pub nugget: f64,
    pub exponent: f64,
    pub slope: f64,
}

impl VariogramModel {
    fn base(kind: VariogramKind, sill: f64, range: f64, nugget: f64) -> Self {
        Self {
            kind,
            sill,
            range,
            nugget,
            exponent: 1.0,
            slope: 0.0,
        }
    }

    pub fn exponential(sill: f64, range: f64, nugget: f64) -> Result<Self> {
        Self::base(VariogramKind::Exponential, sill, range, nugget).validated()
    }

    pub fn spherical(sill: f64, range: f64, nugget: f64) -> Result<Self> {
        Self::base(VariogramKind::Spherical, sill, range, nugget).validated()
    }

    pub fn gaussian(sill: f64, range: f64, nugget: f64) -> Result<Self> {
        Self::base(VariogramKind::Gaussian, sill, range, nugget).validated()
    }

    pub fn hole_effect(sill: f64, range: f64, nugget: f64) -> Result<Self> {
        Self::base(VariogramKind::HoleEffect, sill, range, nugget).validated()
    }

    pub fn linear(slope: f64, nugget: f64) -> Result<Self> {
        Self {
            slope,
            ..Self::base(VariogramKind::Linear, 0.0, 1.0, nugget)
        }
        .validated()
    }

    pub fn power(scale: f64, exponent: f64, nugget: f64) -> Result<Self> {
        Self {
            exponent,
            ..Self::base(VariogramKind::Power, scale, 1.0, nugget)
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        let finite = [self.sill, self.range, self.nugget, self.exponent, self.slope]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("variogram parameters must be finite"));
        }
        if self.sill < 0.0 || self.nugget < 0.0 {
            return Err(Error::invalid("sill and nugget must be non-negative"));
        }
        if self.range <= 0.0 {
            return Err(Error::invalid("range must be positive"));
        }
        if self.kind == VariogramKind::Power && !(self.exponent > 0.0 && self.exponent < 2.0) {
            return Err(Error::invalid("power exponent must lie in (0, 2)"));
        }
        if self.slope < 0.0 {
            return Err(Error::invalid("linear slope must be non-negative"));
        }
        Ok(self)
    }

    /// Semivariance at `lag`; rejects negative lags.
    pub fn semivariance(&self, lag: f64) -> Result<f64> {
        if lag < 0.0 || lag.is_nan() {
            return Err(Error::invalid(format!("negative lag {lag}")));
        }
        Ok(self.gamma(lag))
    }

    /// Unchecked semivariance; `gamma(0) == 0` for every kind.
    #[inline]
    pub fn gamma(&self, lag: f64) -> f64 {
        if lag == 0.0 {
            return 0.0;
        }
        self.nugget + self.structure(lag)
    }

    /// The nugget-free part of the model, `gamma(lag) - nugget` for `lag > 0`.
    #[inline]
    pub(crate) fn structure(&self, lag: f64) -> f64 {
        match self.kind {
            VariogramKind::Linear => self.slope * lag,
            _ => self.sill * self.shape(lag),
        }
    }

    /// Unit-sill shape function; the linear kind has none (its slope carries it).
    #[inline]
    pub(crate) fn shape(&self, lag: f64) -> f64 {
        kind_shape(self.kind, lag, self.range, self.exponent)
    }

    /// Key-value text block, one `key = value` per line. Values use Rust's
    /// shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        format!(
            "kind = {}\nsill = {}\nrange = {}\nnugget = {}\nexponent = {}\nslope = {}\n",
            self.kind, self.sill, self.range, self.nugget, self.exponent, self.slope
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut m = Self::base(VariogramKind::Exponential, 0.0, 1.0, 0.0);
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("expected `key = value`, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = || {
                v.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number for {k}: {v:?}")))
            };
            match k {
                "kind" => kind = Some(v.parse()?),
                "sill" => m.sill = num()?,
                "range" => m.range = num()?,
                "nugget" => m.nugget = num()?,
                "exponent" => m.exponent = num()?,
                "slope" => m.slope = num()?,
                // Extra keys (fit diagnostics) are informational.
                _ => {}
            }
        }
        m.kind = kind.ok_or_else(|| Error::Format("missing `kind`".into()))?;
        m.validated()
    }
}

pub(crate) fn kind_shape(kind: VariogramKind, lag: f64, range: f64, exponent: f64) -> f64 {
    let h = lag / range;
    match kind {
        VariogramKind::Exponential => 1.0 - (-h).exp(),
        VariogramKind::Spherical => {
            if h >= 1.0 {
                1.0
            } else {
                1.5 * h - 0.5 * h * h * h
            }
        }
        VariogramKind::Gaussian => 1.0 - (-h * h).exp(),
        VariogramKind::Power => lag.powf(exponent),
        VariogramKind::HoleEffect => {
            let t = std::f64::consts::PI * h;
            if t == 0.0 {
                0.0
            } else {
                1.0 - t.sin() / t
            }
        }
        VariogramKind::Linear => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_forms() {
        let e = VariogramModel::exponential(1.0, 1.0, 0.0).unwrap();
        assert_eq!(e.semivariance(0.0).unwrap(), 0.0);
        assert!((e.semivariance(1.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((e.semivariance(1.0).unwrap() - 0.63212).abs() < 1e-5);

        let s = VariogramModel::spherical(1.0, 2.0, 0.0).unwrap();
        assert_eq!(s.semivariance(5.0).unwrap(), 1.0);
        assert_eq!(s.semivariance(2.0).unwrap(), 1.0);
        assert!((s.semivariance(1.0).unwrap() - (0.75 - 0.0625)).abs() < 1e-15);

        let g = VariogramModel::gaussian(2.0, 3.0, 0.5).unwrap();
        let want = 0.5 + 2.0 * (1.0 - (-(1.0f64 / 9.0)).exp());
        assert!((g.semivariance(1.0).unwrap() - want).abs() < 1e-15);

        let l = VariogramModel::linear(0.25, 0.1).unwrap();
        assert!((l.semivariance(4.0).unwrap() - 1.1).abs() < 1e-15);

        let p = VariogramModel::power(0.5, 1.5, 0.0).unwrap();
        assert!((p.semivariance(4.0).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn nugget_discontinuity() {
        let e = VariogramModel::exponential(1.0, 10.0, 0.3).unwrap();
        assert_eq!(e.gamma(0.0), 0.0);
        assert!((e.gamma(1e-12) - 0.3).abs() < 1e-9);
    }

    #[test]
    fn hole_effect_oscillates() {
        let h = VariogramModel::hole_effect(1.0, 1.0, 0.0).unwrap();
        // 1 - sinc peaks past the sill near lag 1.43 and dips back below it.
        let peak = h.gamma(1.43);
        let dip = h.gamma(2.46);
        assert!(peak > 1.0 && dip < 1.0 && dip < peak);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(VariogramModel::exponential(-1.0, 1.0, 0.0).is_err());
        assert!(VariogramModel::exponential(1.0, 0.0, 0.0).is_err());
        assert!(VariogramModel::exponential(1.0, 1.0, -0.1).is_err());
        assert!(VariogramModel::power(1.0, 2.0, 0.0).is_err());
        assert!(VariogramModel::power(1.0, 0.0, 0.0).is_err());
        assert!(VariogramModel::linear(-1.0, 0.0).is_err());
        let e = VariogramModel::exponential(1.0, 1.0, 0.0).unwrap();
        assert!(e.semivariance(-1.0).is_err());
    }

    #[test]
    fn text_round_trip() {
        for m in [
            VariogramModel::exponential(0.0123, 45.6789, 1e-5).unwrap(),
            VariogramModel::power(0.3, 1.2345, 0.0).unwrap(),
            VariogramModel::linear(1.0 / 3.0, 0.0).unwrap(),
        ] {
            assert_eq!(VariogramModel::from_text(&m.to_text()).unwrap(), m);
        }
        assert!(VariogramModel::from_text("sill = 1").is_err());
        assert_eq!(
            "hole-effect".parse::<VariogramKind>().unwrap(),
            VariogramKind::HoleEffect
        );
    }

    fn any_monotone_model() -> impl Strategy<Value = VariogramModel> {
        (0usize..5, 0.0..3.0f64, 0.1..50.0f64, 0.0..1.0f64, 0.05..1.95f64).prop_map(
            |(k, sill, range, nugget, exponent)| {
                let kind = [
                    VariogramKind::Exponential,
                    VariogramKind::Spherical,
                    VariogramKind::Gaussian,
                    VariogramKind::Linear,
                    VariogramKind::Power,
                ][k];
                VariogramModel {
                    kind,
                    sill,
                    range,
                    nugget,
                    exponent,
                    slope: sill,
                }
            },
        )
    }

    proptest! {
        #[test]
        fn monotone_kinds_never_decrease(m in any_monotone_model(), a in 0.0..200.0f64, b in 0.0..200.0f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.gamma(lo) <= m.gamma(hi) + 1e-12);
        }
    }
}
