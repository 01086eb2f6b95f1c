use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};
use roughnet::TimeSeries;

pub const FORMAT: &str = "roughnet-weights/1";

/// Interchange format for weight sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightFile {
    pub format: String,
    #[serde(rename = "N")]
    pub n: usize,
    /// Node width, when the channels are flattened `m x m` matrices plus a time ramp.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub d: usize,
    pub series: Vec<Vec<f64>>,
    #[serde(default)]
    pub meta: BTreeMap<String, Value>,
}

impl WeightFile {
    pub fn from_series(series: &TimeSeries, m: Option<usize>, meta: BTreeMap<String, Value>) -> Self {
        Self {
            format: FORMAT.into(),
            n: series.horizon(),
            m,
            d: series.dim(),
            series: series.points().map(<[f64]>::to_vec).collect(),
            meta,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.format != FORMAT {
            return Err(CliError::input(format!("unsupported format `{}`, expected `{FORMAT}`", self.format)));
        }
        if self.d == 0 {
            return Err(CliError::input("d must be at least 1"));
        }
        if self.series.len() != self.n + 1 {
            return Err(CliError::input(format!("series has {} rows, expected N + 1 = {}", self.series.len(), self.n + 1)));
        }
        for (k, row) in self.series.iter().enumerate() {
            if row.len() != self.d {
                return Err(CliError::input(format!("row {k} has {} entries, expected d = {}", row.len(), self.d)));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(CliError::input(format!("row {k} entry {j} is not finite")));
            }
        }
        if let Some(m) = self.m {
            if m == 0 {
                return Err(CliError::input("m must be at least 1"));
            }
            if self.d != m * m + 1 {
                return Err(CliError::input(format!("m = {m} requires d = m^2 + 1 = {}, found {}", m * m + 1, self.d)));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        let file: WeightFile = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{} is not a valid weight file: {e}", path.display())))?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_series(&self) -> CliResult<TimeSeries> {
        Ok(TimeSeries::new(&self.series)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("weight files serialize");
        s.push('\n');
        s
    }
}
