//! Tissue thermal properties.
//!
//! Density, specific heat and conductivity are piecewise-linear curves in
//! temperature (a single point makes a constant). Evaluation outside the
//! tabulated range clamps to the nearest endpoint. Perfusion, blood heat
//! capacity, arterial temperature and metabolic rate are fixed scalars.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaterialError {
    #[error("property curve has no points")]
    EmptyCurve,
    #[error("non-finite value in property curve at point {index}")]
    NonFinite { index: usize },
    #[error("curve temperatures must be strictly increasing (point {index})")]
    NotIncreasing { index: usize },
    #[error("{property} must be strictly positive, found {value} at point {index}")]
    NonPositive {
        property: &'static str,
        index: usize,
        value: f64,
    },
    #[error("{name} = {value} is out of range ({rule})")]
    BadScalar {
        name: &'static str,
        value: f64,
        rule: &'static str,
    },
}

/// Piecewise-linear property table `(temperature [°C], value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct PropertyCurve {
    points: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for PropertyCurve {
    type Error = MaterialError;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        PropertyCurve::new(points)
    }
}

impl From<PropertyCurve> for Vec<(f64, f64)> {
    fn from(c: PropertyCurve) -> Self {
        c.points
    }
}

impl PropertyCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, MaterialError> {
        if points.is_empty() {
            return Err(MaterialError::EmptyCurve);
        }
        for (index, &(t, v)) in points.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(MaterialError::NonFinite { index });
            }
            if index > 0 && !(t > points[index - 1].0) {
                return Err(MaterialError::NotIncreasing { index });
            }
        }
        Ok(Self { points })
    }

    pub fn constant(value: f64) -> Result<Self, MaterialError> {
        Self::new(vec![(0.0, value)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn is_constant(&self) -> bool {
        self.points.len() == 1
    }

    pub fn temperature_range(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let pts = &self.points;
        let last = pts.len() - 1;
        if t <= pts[0].0 {
            return pts[0].1;
        }
        if t >= pts[last].0 {
            return pts[last].1;
        }
        // first knot strictly above t; 1..=last here
        let hi = pts.partition_point(|&(tk, _)| tk <= t);
        let (t0, v0) = pts[hi - 1];
        let (t1, v1) = pts[hi];
        if t == t0 {
            return v0;
        }
        v0 + (v1 - v0) * ((t - t0) / (t1 - t0))
    }

    fn check_positive(&self, property: &'static str) -> Result<(), MaterialError> {
        match self.points.iter().position(|&(_, v)| !(v > 0.0)) {
            Some(index) => Err(MaterialError::NonPositive {
                property,
                index,
                value: self.points[index].1,
            }),
            None => Ok(()),
        }
    }
}

/// `eval_property` as a free function.
pub fn eval_property(curve: &PropertyCurve, t: f64) -> f64 {
    curve.eval(t)
}

pub fn make_constant(value: f64) -> Result<PropertyCurve, MaterialError> {
    PropertyCurve::constant(value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TissueMaterial {
    /// kg/m³
    pub density: PropertyCurve,
    /// J/(kg·°C)
    pub specific_heat: PropertyCurve,
    /// W/(m·°C)
    pub conductivity: PropertyCurve,
    /// w_b, kg/(m³·s)
    pub perfusion_rate: f64,
    /// c_b, J/(kg·°C)
    pub blood_specific_heat: f64,
    /// T_a, °C
    pub arterial_temperature: f64,
    /// Q_m, W/m³
    pub metabolic_rate: f64,
}

impl TissueMaterial {
    /// Constant tissue properties with perfusion and metabolism switched off.
    pub fn constant(density: f64, specific_heat: f64, conductivity: f64) -> Result<Self, MaterialError> {
        Self {
            density: PropertyCurve::constant(density)?,
            specific_heat: PropertyCurve::constant(specific_heat)?,
            conductivity: PropertyCurve::constant(conductivity)?,
            perfusion_rate: 0.0,
            blood_specific_heat: 3617.0,
            arterial_temperature: 37.0,
            metabolic_rate: 0.0,
        }
        .validated()
    }

    pub fn with_perfusion(mut self, rate: f64, blood_specific_heat: f64, arterial: f64) -> Result<Self, MaterialError> {
        self.perfusion_rate = rate;
        self.blood_specific_heat = blood_specific_heat;
        self.arterial_temperature = arterial;
        self.validated()
    }

    pub fn with_metabolism(mut self, rate: f64) -> Result<Self, MaterialError> {
        self.metabolic_rate = rate;
        self.validated()
    }

    pub fn validated(self) -> Result<Self, MaterialError> {
        self.density.check_positive("density")?;
        self.specific_heat.check_positive("specific heat")?;
        self.conductivity.check_positive("conductivity")?;
        let scalar = |name, value: f64, ok: bool, rule| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(MaterialError::BadScalar { name, value, rule })
            }
        };
        scalar("perfusion_rate", self.perfusion_rate, self.perfusion_rate >= 0.0, ">= 0")?;
        scalar(
            "blood_specific_heat",
            self.blood_specific_heat,
            self.blood_specific_heat > 0.0,
            "> 0",
        )?;
        scalar("arterial_temperature", self.arterial_temperature, true, "finite")?;
        scalar("metabolic_rate", self.metabolic_rate, self.metabolic_rate >= 0.0, ">= 0")?;
        Ok(self)
    }

    /// True when any of ρ, c, k varies with temperature.
    pub fn is_temperature_dependent(&self) -> bool {
        !(self.density.is_constant() && self.specific_heat.is_constant() && self.conductivity.is_constant())
    }

    /// Volumetric heat capacity ρ(T)·c(T), J/(m³·°C).
    pub fn heat_capacity(&self, t: f64) -> f64 {
        self.density.eval(t) * self.specific_heat.eval(t)
    }

    /// Lowest and highest tabulated temperature over the three curves.
    pub fn tabulated_range(&self) -> Option<(f64, f64)> {
        let curves = [&self.density, &self.specific_heat, &self.conductivity];
        let varying: Vec<_> = curves.iter().filter(|c| !c.is_constant()).collect();
        if varying.is_empty() {
            return None;
        }
        let lo = varying.iter().map(|c| c.temperature_range().0).fold(f64::INFINITY, f64::min);
        let hi = varying.iter().map(|c| c.temperature_range().1).fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi))
    }

    /// Liver tissue with temperature-dependent ρ, c, k tabulated at 37 and 65 °C.
    pub fn liver_temperature_dependent() -> Self {
        Self {
            density: PropertyCurve::new(vec![(37.0, 1040.0), (65.0, 1000.0)]).expect("valid table"),
            specific_heat: PropertyCurve::new(vec![(37.0, 3600.0), (65.0, 3800.0)]).expect("valid table"),
            conductivity: PropertyCurve::new(vec![(37.0, 0.53), (65.0, 0.57)]).expect("valid table"),
            perfusion_rate: 0.0,
            blood_specific_heat: 3617.0,
            arterial_temperature: 37.0,
            metabolic_rate: 0.0,
        }
    }

    /// Constant liver properties: k = 0.518, ρ = 1060, c = 3700.
    pub fn liver_constant() -> Self {
        Self::constant(1060.0, 3700.0, 0.518).expect("valid constants")
    }
}
