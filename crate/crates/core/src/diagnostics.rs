//! Time-series diagnostics, positivity monitoring and nodal field snapshots shared by the
//! time-dependent solvers.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::CsrMatrix;

/// What to do when a nodal value drops below `−pos_tol`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PositivityPolicy {
    /// Record the event and continue.
    #[default]
    Monitor,
    /// Abort with `PositivityViolation`.
    Reject,
    /// Set negative values to zero and record the event.
    Clamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorEvent {
    pub t: f64,
    pub field: String,
    pub value: f64,
    pub action: String,
}

/// Applies `policy` to `u`; returns the event if one occurred.
pub fn enforce_positivity(
    u: &mut [f64],
    field: &str,
    t: f64,
    policy: PositivityPolicy,
    tol: f64,
) -> Result<Option<MonitorEvent>> {
    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min < -tol) {
        return Ok(None);
    }
    let action = match policy {
        PositivityPolicy::Monitor => "recorded",
        PositivityPolicy::Reject => return Err(Error::PositivityViolation { t, value: min }),
        PositivityPolicy::Clamp => {
            u.iter_mut().for_each(|v| *v = v.max(0.0));
            "clamped"
        }
    };
    Ok(Some(MonitorEvent { t, field: field.into(), value: min, action: action.into() }))
}

/// L² norm, extrema and integral of one nodal field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub norm: f64,
    pub min: f64,
    pub max: f64,
    pub mass: f64,
}

impl FieldStats {
    pub fn of(mass: &CsrMatrix, u: &[f64]) -> Self {
        let mu = mass.mul_vec(u);
        let norm = u.iter().zip(&mu).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
        let total = mu.iter().sum();
        let (min, max) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        FieldStats { norm, min, max, mass: total }
    }
}

/// Per-step statistics of named fields.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub fields: Vec<String>,
    pub times: Vec<f64>,
    pub stats: Vec<Vec<FieldStats>>,
}

impl Trajectory {
    pub fn new(fields: &[&str]) -> Self {
        Trajectory { fields: fields.iter().map(|s| s.to_string()).collect(), ..Default::default() }
    }

    pub fn push(&mut self, t: f64, stats: Vec<FieldStats>) {
        assert_eq!(stats.len(), self.fields.len());
        self.times.push(t);
        self.stats.push(stats);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Smallest nodal value of field `k` over all recorded times.
    pub fn min_of(&self, k: usize) -> f64 {
        self.stats.iter().map(|s| s[k].min).fold(f64::INFINITY, f64::min)
    }

    pub fn max_of(&self, k: usize) -> f64 {
        self.stats.iter().map(|s| s[k].max).fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with columns `t`, then `norm_*`, `min_*`, `max_*`, `mass_*` per field.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for prefix in ["norm", "min", "max", "mass"] {
            for f in &self.fields {
                let _ = write!(s, ",{prefix}_{f}");
            }
        }
        s.push('\n');
        for (t, row) in self.times.iter().zip(&self.stats) {
            let _ = write!(s, "{t}");
            for pick in [|x: &FieldStats| x.norm, |x: &FieldStats| x.min, |x: &FieldStats| x.max, |x: &FieldStats| x.mass] {
                for st in row {
                    let _ = write!(s, ",{}", pick(st));
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Nodal field text: header `field v1 <name> <N>` followed by one value per line.
pub fn write_field(name: &str, values: &[f64]) -> String {
    let mut s = format!("field v1 {} {}\n", name, values.len());
    for v in values {
        let _ = writeln!(s, "{v:?}");
    }
    s
}

pub fn read_field(text: &str) -> Result<(String, Vec<f64>)> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    if header.len() != 4 || header[0] != "field" || header[1] != "v1" {
        return Err(Error::Parse("expected 'field v1 <name> <N>' header".into()));
    }
    let n: usize = header[3].parse().map_err(|_| Error::Parse(format!("bad count '{}'", header[3])))?;
    let values: Vec<f64> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad value '{l}'"))))
        .collect::<Result<_>>()?;
    if values.len() != n {
        return Err(Error::Parse(format!("expected {n} values, found {}", values.len())));
    }
    Ok((header[2].to_string(), values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_layout() {
        let mut tr = Trajectory::new(&["c", "c3"]);
        let st = FieldStats { norm: 1.0, min: 0.0, max: 2.0, mass: 0.5 };
        tr.push(0.0, vec![st, st]);
        let csv = tr.to_csv();
        assert!(csv.starts_with("t,norm_c,norm_c3,min_c,min_c3,max_c,max_c3,mass_c,mass_c3\n0,1,1,0,0,2,2,0.5,0.5\n"));
    }

    #[test]
    fn positivity_policies() {
        let mut u = vec![1.0, -1e-3];
        assert!(enforce_positivity(&mut u.clone(), "c", 0.1, PositivityPolicy::Monitor, 1e-10).unwrap().is_some());
        assert!(matches!(
            enforce_positivity(&mut u.clone(), "c", 0.1, PositivityPolicy::Reject, 1e-10),
            Err(Error::PositivityViolation { .. })
        ));
        let ev = enforce_positivity(&mut u, "c", 0.1, PositivityPolicy::Clamp, 1e-10).unwrap().unwrap();
        assert_eq!(ev.action, "clamped");
        assert_eq!(u, vec![1.0, 0.0]);
        assert!(enforce_positivity(&mut [-1e-12], "c", 0.0, PositivityPolicy::Reject, 1e-10).unwrap().is_none());
    }

    #[test]
    fn field_round_trip() {
        let v = vec![0.1, -2.5e-17, 3.0];
        let (name, back) = read_field(&write_field("c3", &v)).unwrap();
        assert_eq!(name, "c3");
        assert_eq!(back, v);
        assert!(read_field("field v1 c 3\n1\n2\n").is_err());
    }
}
