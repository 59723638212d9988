//! Load and generation profiles.
//!
//! CSV layout: header `k,d_er,d_ed,Q_d[,T_amb]`, one row per step. Networks
//! with several renewable units, loads or consumers use numbered columns
//! (`d_er1,d_er2,...`). All values are nonnegative magnitudes in MW
//! (MW_th for `Q_d`); the signs of the model are applied by
//! [`ProfileSet::to_forecast`].

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::mpc::Forecast;

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    /// Renewable infeed per unit, MW.
    pub d_er: Vec<Vec<f64>>,
    /// Electrical load per unit, MW.
    pub d_ed: Vec<Vec<f64>>,
    /// Heat demand per consumer edge, MW_th.
    pub q_d: Vec<Vec<f64>>,
    /// Ambient temperature, °C.
    pub t_amb: Option<Vec<f64>>,
}

impl ProfileSet {
    pub fn len(&self) -> usize {
        self.d_er.iter().chain(&self.d_ed).chain(&self.q_d).map(Vec::len).next().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn columns(&self) -> Vec<(String, &Vec<f64>)> {
        let mut cols = Vec::new();
        for (name, set) in [("d_er", &self.d_er), ("d_ed", &self.d_ed), ("Q_d", &self.q_d)] {
            for (i, s) in set.iter().enumerate() {
                let label = if set.len() == 1 { name.to_string() } else { format!("{name}{}", i + 1) };
                cols.push((label, s));
            }
        }
        if let Some(t) = &self.t_amb {
            cols.push(("T_amb".to_string(), t));
        }
        cols
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let n = self.len();
        for (name, col) in self.columns() {
            if col.len() != n {
                return Err(ScenarioError::Profiles(format!("column {name} has {} rows, expected {n}", col.len())));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(ScenarioError::Profiles(format!("column {name} contains non-finite values")));
            }
            if name != "T_amb" && col.iter().any(|v| *v < 0.0) {
                return Err(ScenarioError::Profiles(format!("column {name} must hold nonnegative magnitudes")));
            }
        }
        Ok(())
    }

    /// Model disturbances: `d_t = [-Q_d; T_amb]`, `d_e = [d_er; -d_ed]`.
    pub fn to_forecast(&self, ambient: f64) -> Forecast {
        let n = self.len();
        let mut d_t = Vec::with_capacity(n);
        let mut d_e = Vec::with_capacity(n);
        for k in 0..n {
            let t_amb = self.t_amb.as_ref().map_or(ambient, |t| t[k]);
            d_t.push(DVector::from_iterator(self.q_d.len() + 1, self.q_d.iter().map(|q| -q[k]).chain([t_amb])));
            d_e.push(DVector::from_iterator(
                self.d_er.len() + self.d_ed.len(),
                self.d_er.iter().map(|r| r[k]).chain(self.d_ed.iter().map(|l| -l[k])),
            ));
        }
        Forecast { d_t, d_e }
    }

    pub fn to_csv(&self) -> String {
        let cols = self.columns();
        let mut out = String::from("k");
        for (name, _) in &cols {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for k in 0..self.len() {
            let _ = write!(out, "{k}");
            for (_, c) in &cols {
                let _ = write!(out, ",{}", c[k]);
            }
            out.push('\n');
        }
        out
    }

    /// Parses profile CSV text. `counts` gives the expected number of
    /// renewable, load and consumer columns.
    pub fn from_csv(text: &str, counts: (usize, usize, usize)) -> Result<Self, ScenarioError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| ScenarioError::Profiles(format!("row 1: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let names = |base: &str, count: usize| -> Vec<String> {
            if count == 1 {
                vec![base.to_string()]
            } else {
                (1..=count).map(|i| format!("{base}{i}")).collect()
            }
        };
        let mut expected = vec!["k".to_string()];
        expected.extend(names("d_er", counts.0));
        expected.extend(names("d_ed", counts.1));
        expected.extend(names("Q_d", counts.2));
        let with_ambient = header.len() == expected.len() + 1;
        if with_ambient {
            expected.push("T_amb".to_string());
        }
        if header != expected {
            return Err(ScenarioError::Profiles(format!(
                "row 1: header `{}` does not match `{}`",
                header.join(","),
                expected.join(",")
            )));
        }
        let mut set = ProfileSet {
            d_er: vec![Vec::new(); counts.0],
            d_ed: vec![Vec::new(); counts.1],
            q_d: vec![Vec::new(); counts.2],
            t_amb: with_ambient.then(Vec::new),
        };
        for (i, rec) in reader.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| ScenarioError::Profiles(format!("row {row}: {e}")))?;
            if rec.len() != expected.len() {
                return Err(ScenarioError::Profiles(format!(
                    "row {row}: expected {} fields, found {}",
                    expected.len(),
                    rec.len()
                )));
            }
            let k: usize = rec[0]
                .parse()
                .map_err(|_| ScenarioError::Profiles(format!("row {row}: invalid step `{}`", &rec[0])))?;
            if k != i {
                return Err(ScenarioError::Profiles(format!("row {row}: step {k} out of sequence, expected {i}")));
            }
            let mut vals = Vec::with_capacity(rec.len() - 1);
            for (field, name) in rec.iter().zip(&expected).skip(1) {
                let v: f64 = field.parse().map_err(|_| {
                    ScenarioError::Profiles(format!("row {row}: invalid value `{field}` in column {name}"))
                })?;
                if !v.is_finite() || (name != "T_amb" && v < 0.0) {
                    return Err(ScenarioError::Profiles(format!("row {row}: value {v} not allowed in column {name}")));
                }
                vals.push(v);
            }
            let mut it = vals.into_iter();
            for s in set.d_er.iter_mut().chain(set.d_ed.iter_mut()).chain(set.q_d.iter_mut()) {
                s.push(it.next().unwrap_or_default());
            }
            if let Some(t) = set.t_amb.as_mut() {
                t.push(it.next().unwrap_or_default());
            }
        }
        Ok(set)
    }

    pub fn load(path: &Path, counts: (usize, usize, usize)) -> Result<Self, ScenarioError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ScenarioError::Profiles(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text, counts)
    }
}

/// A Gaussian bump on the daily clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Peak {
    /// Hour of day.
    pub hour: f64,
    /// Height above the base, MW.
    pub height: f64,
    /// Standard deviation, h.
    pub width: f64,
}

/// Household-type curve: base plus daily Gaussian peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HouseholdCurve {
    pub base: f64,
    pub peaks: Vec<Peak>,
}

/// Solar bell: truncated cosine between sunrise and sunset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolarCurve {
    pub peak: f64,
    pub sunrise: f64,
    pub sunset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub solar: SolarCurve,
    pub electrical_load: HouseholdCurve,
    pub heat_demand: HouseholdCurve,
    /// Constant ambient temperature written to the `T_amb` column, °C.
    pub ambient: Option<f64>,
}

impl SolarCurve {
    pub fn at(&self, hour: f64) -> f64 {
        let h = hour.rem_euclid(24.0);
        if h <= self.sunrise || h >= self.sunset {
            return 0.0;
        }
        let mid = 0.5 * (self.sunrise + self.sunset);
        let half = 0.5 * (self.sunset - self.sunrise);
        self.peak * (0.5 * PI * (h - mid) / half).cos()
    }
}

impl HouseholdCurve {
    pub fn at(&self, hour: f64) -> f64 {
        let h = hour.rem_euclid(24.0);
        let bumps: f64 = self
            .peaks
            .iter()
            .map(|p| {
                // distance on the 24 h circle
                let mut dh = (h - p.hour).rem_euclid(24.0);
                if dh > 12.0 {
                    dh -= 24.0;
                }
                p.height * (-0.5 * (dh / p.width).powi(2)).exp()
            })
            .sum();
        self.base + bumps
    }

    fn check(&self, name: &str) -> Result<(), ScenarioError> {
        if !(self.base >= 0.0) {
            return Err(ScenarioError::Profiles(format!("{name}: base must be nonnegative")));
        }
        for p in &self.peaks {
            if !(p.height >= 0.0) || !(p.width > 0.0) || !p.hour.is_finite() {
                return Err(ScenarioError::Profiles(format!(
                    "{name}: peaks need nonnegative height and positive width"
                )));
            }
        }
        Ok(())
    }
}

/// Deterministic daily profiles sampled every `dt_hours` for `steps` steps
/// (one renewable unit, one load, one consumer).
pub fn synthesize_profiles(params: &SynthParams, dt_hours: f64, steps: usize) -> Result<ProfileSet, ScenarioError> {
    let s = &params.solar;
    if !(s.peak >= 0.0) {
        return Err(ScenarioError::Profiles("solar: peak must be nonnegative".into()));
    }
    if !(s.sunrise >= 0.0 && s.sunrise < s.sunset && s.sunset <= 24.0) {
        return Err(ScenarioError::Profiles("solar: need 0 <= sunrise < sunset <= 24".into()));
    }
    params.electrical_load.check("electrical_load")?;
    params.heat_demand.check("heat_demand")?;
    if !(dt_hours > 0.0) {
        return Err(ScenarioError::Profiles("sample time must be positive".into()));
    }
    let hours: Vec<f64> = (0..steps).map(|k| k as f64 * dt_hours).collect();
    Ok(ProfileSet {
        d_er: vec![hours.iter().map(|&h| s.at(h)).collect()],
        d_ed: vec![hours.iter().map(|&h| params.electrical_load.at(h)).collect()],
        q_d: vec![hours.iter().map(|&h| params.heat_demand.at(h)).collect()],
        t_amb: params.ambient.map(|t| vec![t; steps]),
    })
}
