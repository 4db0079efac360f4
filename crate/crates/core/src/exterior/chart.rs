use super::expr::{ScalarField, Symbols};
use crate::error::{Error, Result};
use serde::Serialize;
use std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coord {
    pub name: String,
    pub angular: bool,
}

/// Named coordinates and parameter values of one coordinate patch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chart {
    pub coords: Vec<Coord>,
    pub params: Vec<(String, f64)>,
}

impl Chart {
    pub fn new(coords: &[(&str, bool)], params: &[(&str, f64)]) -> Result<Self> {
        let c: Vec<Coord> = coords.iter().map(|(n, a)| Coord { name: n.to_string(), angular: *a }).collect();
        let p: Vec<(String, f64)> = params.iter().map(|(n, v)| (n.to_string(), *v)).collect();
        Self::from_parts(c, p)
    }

    pub fn from_parts(coords: Vec<Coord>, params: Vec<(String, f64)>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidChart("no coordinates".into()));
        }
        if coords.len() > crate::numeric::MAX_DIM {
            return Err(Error::InvalidChart(format!(
                "dimension {} exceeds the supported maximum {}",
                coords.len(),
                crate::numeric::MAX_DIM
            )));
        }
        for (i, c) in coords.iter().enumerate() {
            if coords[..i].iter().any(|d| d.name == c.name) {
                return Err(Error::InvalidChart(format!("duplicate coordinate `{}`", c.name)));
            }
            if params.iter().any(|(p, _)| *p == c.name) {
                return Err(Error::InvalidChart(format!("`{}` is both a coordinate and a parameter", c.name)));
            }
        }
        for (i, (p, v)) in params.iter().enumerate() {
            if params[..i].iter().any(|(q, _)| q == p) {
                return Err(Error::InvalidChart(format!("duplicate parameter `{p}`")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidChart(format!("parameter `{p}` is not finite")));
            }
        }
        Ok(Chart { coords, params })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c.name == name)
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn is_angular(&self, i: usize) -> bool {
        self.coords[i].angular
    }

    pub fn parse(&self, src: &str) -> Result<ScalarField> {
        let f = ScalarField::parse(src, self)?;
        Ok(f)
    }

    pub fn coord(&self, name: &str) -> ScalarField {
        ScalarField::coord(self.index(name).unwrap_or_else(|| panic!("no coordinate `{name}`")))
    }

    /// Representative of a point with angular coordinates reduced to [0, 2π).
    pub fn wrap(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .enumerate()
            .map(|(i, &x)| if self.coords[i].angular { x.rem_euclid(TAU) } else { x })
            .collect()
    }

    /// Displacement from `a` to `b`, taking the short way round on angles.
    pub fn delta(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(i, (x, y))| {
                let d = y - x;
                if self.coords[i].angular {
                    (d + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI
                } else {
                    d
                }
            })
            .collect()
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.delta(a, b).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn same_as(&self, other: &Chart) -> bool {
        self.coords == other.coords
    }
}

impl Symbols for Chart {
    fn coord_index(&self, name: &str) -> Option<usize> {
        self.index(name)
    }
    fn param_value(&self, name: &str) -> Option<f64> {
        self.param(name)
    }
}
