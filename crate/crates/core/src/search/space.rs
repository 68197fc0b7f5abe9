use serde::{Deserialize, Serialize};

use crate::cnn::CnnConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dim {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub integer: bool,
    pub log: bool,
}

impl Dim {
    fn new(name: &str, min: f64, max: f64, integer: bool, log: bool) -> Self {
        Self {
            name: name.into(),
            min,
            max,
            integer,
            log,
        }
    }

    /// Map a unit coordinate to a value, uniform in log space when flagged.
    pub fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = if self.log {
            (self.min.ln() + u * (self.max.ln() - self.min.ln())).exp()
        } else {
            self.min + u * (self.max - self.min)
        };
        let v = if self.integer { v.round() } else { v };
        v.clamp(self.min, self.max)
    }

    pub fn to_unit(&self, v: f64) -> f64 {
        let u = if self.log {
            (v.ln() - self.min.ln()) / (self.max.ln() - self.min.ln())
        } else {
            (v - self.min) / (self.max - self.min)
        };
        u.clamp(0.0, 1.0)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max && (!self.integer || v.fract() == 0.0)
    }
}

/// The eleven searched hyperparameters, in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamSpace {
    pub dims: Vec<Dim>,
}

impl Default for HyperparamSpace {
    fn default() -> Self {
        Self {
            dims: vec![
                Dim::new("initial_lr", 1e-7, 1e-1, false, true),
                Dim::new("l2", 1e-7, 1e-1, false, true),
                // A real-valued range, searched on whole batches.
                Dim::new("batch_size", 100.0, 2000.0, true, false),
                Dim::new("momentum", 0.9, 0.96, false, false),
                Dim::new("dropout", 0.0, 0.3, false, false),
                Dim::new("filter_size_1", 2.0, 3.0, true, false),
                Dim::new("filter_size_2", 2.0, 4.0, true, false),
                Dim::new("filter_size_3", 2.0, 4.0, true, false),
                Dim::new("num_filters_1", 4.0, 8.0, true, false),
                Dim::new("num_filters_2", 4.0, 30.0, true, false),
                Dim::new("num_filters_3", 4.0, 30.0, true, false),
            ],
        }
    }
}

impl HyperparamSpace {
    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Values for a unit-cube point, integers rounded.
    pub fn values(&self, unit: &[f64]) -> Vec<f64> {
        self.dims
            .iter()
            .zip(unit)
            .map(|(d, &u)| d.from_unit(u))
            .collect()
    }

    /// Unit coordinates of the rounded point, so that the surrogate sees
    /// exactly what was evaluated.
    pub fn snap(&self, unit: &[f64]) -> Vec<f64> {
        self.dims
            .iter()
            .zip(self.values(unit))
            .map(|(d, v)| d.to_unit(v))
            .collect()
    }

    pub fn config(&self, depth: usize, unit: &[f64]) -> Result<CnnConfig> {
        if unit.len() != self.len() {
            return Err(Error::invalid(format!(
                "expected {} coordinates",
                self.len()
            )));
        }
        let v = self.values(unit);
        let c = CnnConfig {
            depth,
            initial_lr: v[0],
            l2: v[1],
            batch_size: v[2] as usize,
            momentum: v[3],
            dropout: v[4],
            filter_sizes: [v[5] as usize, v[6] as usize, v[7] as usize],
            num_filters: [v[8] as usize, v[9] as usize, v[10] as usize],
        };
        c.validate()?;
        Ok(c)
    }

    pub fn unit_of(&self, c: &CnnConfig) -> Vec<f64> {
        let v = searched_values(c);
        self.dims.iter().zip(v).map(|(d, x)| d.to_unit(x)).collect()
    }

    /// Whether every searched value of `c` lies within its bounds.
    pub fn contains(&self, c: &CnnConfig) -> bool {
        let v = searched_values(c);
        self.dims.iter().zip(v).all(|(d, x)| d.contains(x))
    }
}

/// The searched fields of `c`, in space order.
pub fn searched_values(c: &CnnConfig) -> [f64; 11] {
    [
        c.initial_lr,
        c.l2,
        c.batch_size as f64,
        c.momentum,
        c.dropout,
        c.filter_sizes[0] as f64,
        c.filter_sizes[1] as f64,
        c.filter_sizes[2] as f64,
        c.num_filters[0] as f64,
        c.num_filters[1] as f64,
        c.num_filters[2] as f64,
    ]
}
