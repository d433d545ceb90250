//! Dataset construction, noise injection, scaling, and CSV ingestion.
//!
//! Synthetic series are sampled from the closed forms on equispaced grids
//! that include both endpoints. Noise is multiplicative Gaussian per point
//! (a stated percentage of the local value) drawn from the seeded portable
//! stream, so every dataset is a pure function of its inputs and seed.

use std::path::Path;

use crate::error::{Error, Result};
use crate::kinetics::{EkenstamModel, HOURS_PER_YEAR};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    /// Hours and raw DP / k1 values.
    Physical,
    /// Time over the horizon in [0, 1], DP divided by 100.
    EkenstamScaled,
    /// Time in [0, 10], DP divided by 1000, k1 divided by 1e-7.
    EmsleyScaled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Exact,
    Noisy { pct: f64, seed: u64 },
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesWarning {
    /// Noise drove DP values below the floor; `count` points were clamped.
    NoiseClamped { count: usize },
    /// CSV rows were not time-sorted and were reordered on load.
    ResortedTimes,
}

/// Time-stamped DP (and optionally k1) samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    /// Strictly increasing; hours when `units` is physical.
    pub times: Vec<f64>,
    pub dp: Vec<f64>,
    pub k1: Option<Vec<f64>>,
    pub units: Units,
    pub provenance: Provenance,
    pub warnings: Vec<SeriesWarning>,
}

impl TimeSeries {
    pub fn new(
        times: Vec<f64>,
        dp: Vec<f64>,
        k1: Option<Vec<f64>>,
        units: Units,
        provenance: Provenance,
    ) -> Result<Self> {
        if times.len() != dp.len() {
            return Err(Error::contract(format!(
                "times/dp length mismatch: {} vs {}",
                times.len(),
                dp.len()
            )));
        }
        if let Some(k1) = &k1 {
            if k1.len() != times.len() {
                return Err(Error::contract("k1 column length mismatch"));
            }
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("times must be strictly increasing"));
        }
        if units == Units::Physical && dp.iter().any(|&v| v <= 0.0) {
            return Err(Error::contract("physical DP values must be positive"));
        }
        Ok(TimeSeries {
            times,
            dp,
            k1,
            units,
            provenance,
            warnings: Vec::new(),
        })
    }

    /// Series holding model output rather than observations: time ordering
    /// and shape are enforced, but values may be negative (an untrained
    /// network can predict anything).
    pub fn from_prediction(times: Vec<f64>, dp: Vec<f64>, k1: Option<Vec<f64>>) -> Result<Self> {
        if times.len() != dp.len() || k1.as_ref().is_some_and(|k| k.len() != times.len()) {
            return Err(Error::contract("prediction column length mismatch"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("times must be strictly increasing"));
        }
        Ok(TimeSeries {
            times,
            dp,
            k1,
            units: Units::Physical,
            provenance: Provenance::Exact,
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Division factors mapping physical units to the nondimensional ranges the
/// networks train on.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScalingSpec {
    /// Hours per scaled time unit.
    pub time_scale: f64,
    pub dp_scale: f64,
    pub k1_scale: Option<f64>,
}

impl ScalingSpec {
    /// Time over `horizon_hours` mapped to [0, 1], DP divided by 100.
    pub fn ekenstam(horizon_hours: f64) -> Self {
        ScalingSpec {
            time_scale: horizon_hours,
            dp_scale: 100.0,
            k1_scale: None,
        }
    }

    /// 3500 h mapped to [0, 10], DP divided by 1000, k1 by 1e-7.
    pub fn emsley() -> Self {
        ScalingSpec {
            time_scale: 350.0,
            dp_scale: 1000.0,
            k1_scale: Some(1e-7),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.time_scale > 0.0
            && self.dp_scale > 0.0
            && self.k1_scale.map_or(true, |s| s > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("scaling factors must be positive: {self:?}")))
        }
    }

    fn target_units(&self) -> Units {
        if self.k1_scale.is_some() {
            Units::EmsleyScaled
        } else {
            Units::EkenstamScaled
        }
    }
}

/// Equispaced samples of the constant-rate closed form over
/// `[0, horizon_years]`, endpoints included.
pub fn make_ekenstam_dataset(
    model: &EkenstamModel,
    n_points: usize,
    horizon_years: f64,
) -> Result<TimeSeries> {
    if n_points < 2 {
        return Err(Error::contract("need at least 2 points"));
    }
    let horizon_h = horizon_years * HOURS_PER_YEAR;
    let times: Vec<f64> = (0..n_points)
        .map(|i| horizon_h * i as f64 / (n_points - 1) as f64)
        .collect();
    let dp = times.iter().map(|&t| model.dp_at(t)).collect();
    TimeSeries::new(times, dp, None, Units::Physical, Provenance::Exact)
}

/// The floor noisy DP values are clamped to.
pub const NOISE_DP_FLOOR: f64 = 1.0;

/// Multiplicative Gaussian noise: dp' = dp * (1 + pct * eps) with eps drawn
/// point-by-point from the seeded stream. Times are untouched.
pub fn add_noise(series: &TimeSeries, pct: f64, seed: u64) -> Result<TimeSeries> {
    if series.provenance != Provenance::Exact {
        return Err(Error::contract("noise is only added to exact series"));
    }
    let mut out = series.clone();
    let mut stream = rng::from_seed(seed);
    let mut clamped = 0usize;
    for v in out.dp.iter_mut() {
        let eps = rng::standard_normal(&mut stream);
        let noisy = *v * (1.0 + pct * eps);
        if noisy < NOISE_DP_FLOOR {
            *v = NOISE_DP_FLOOR;
            clamped += 1;
        } else {
            *v = noisy;
        }
    }
    out.provenance = Provenance::Noisy { pct, seed };
    if clamped > 0 {
        out.warnings.push(SeriesWarning::NoiseClamped { count: clamped });
    }
    Ok(out)
}

/// Elementwise division by the scale factors; physical -> scaled.
pub fn scale(series: &TimeSeries, spec: &ScalingSpec) -> Result<TimeSeries> {
    spec.validate()?;
    if series.units != Units::Physical {
        return Err(Error::contract(format!(
            "cannot scale a series already in {:?}",
            series.units
        )));
    }
    let mut out = series.clone();
    out.times.iter_mut().for_each(|t| *t /= spec.time_scale);
    out.dp.iter_mut().for_each(|v| *v /= spec.dp_scale);
    if let (Some(col), Some(s)) = (out.k1.as_mut(), spec.k1_scale) {
        col.iter_mut().for_each(|v| *v /= s);
    }
    out.units = spec.target_units();
    Ok(out)
}

/// Inverse of [`scale`]; scaled -> physical.
pub fn unscale(series: &TimeSeries, spec: &ScalingSpec) -> Result<TimeSeries> {
    spec.validate()?;
    if series.units != spec.target_units() {
        return Err(Error::contract(format!(
            "unscale expects {:?}, got {:?}",
            spec.target_units(),
            series.units
        )));
    }
    let mut out = series.clone();
    out.times.iter_mut().for_each(|t| *t *= spec.time_scale);
    out.dp.iter_mut().for_each(|v| *v *= spec.dp_scale);
    if let (Some(col), Some(s)) = (out.k1.as_mut(), spec.k1_scale) {
        col.iter_mut().for_each(|v| *v *= s);
    }
    out.units = Units::Physical;
    Ok(out)
}

/// DP assigned at t = 0 when a measurement file starts later (new paper).
pub const CSV_ANCHOR_DP: f64 = 1100.0;

/// Load measured DP data. Expected header `time_years,dp`; times are
/// converted to hours, rows sorted if needed, and an anchor row
/// `(0, 1100)` is prepended when the file lacks t = 0.
pub fn load_csv(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            detail: e.to_string(),
        })?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 2 || cols[0] != "time_years" || cols[1] != "dp" {
        return Err(Error::Parse {
            line: 1,
            detail: format!("expected header `time_years,dp`, got `{}`", cols.join(",")),
        });
    }

    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::Parse {
            line,
            detail: e.to_string(),
        })?;
        let parse = |field: Option<&str>, name: &str| -> Result<f64> {
            field
                .ok_or_else(|| Error::Parse {
                    line,
                    detail: format!("missing {name} column"),
                })?
                .parse::<f64>()
                .map_err(|e| Error::Parse {
                    line,
                    detail: format!("bad {name}: {e}"),
                })
        };
        let t_years = parse(record.get(0), "time_years")?;
        let dp = parse(record.get(1), "dp")?;
        rows.push((t_years * HOURS_PER_YEAR, dp));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            detail: "no data rows".into(),
        });
    }

    let mut resorted = false;
    if rows.windows(2).any(|w| w[0].0 >= w[1].0) {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        resorted = true;
    }
    if rows[0].0 > 0.0 {
        rows.insert(0, (0.0, CSV_ANCHOR_DP));
    }

    let (times, dp): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let mut series = TimeSeries::new(times, dp, None, Units::Physical, Provenance::Measured)?;
    if resorted {
        series.warnings.push(SeriesWarning::ResortedTimes);
    }
    Ok(series)
}

/// Write a series as `time_years,dp[,k1]`.
pub fn save_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    if series.units != Units::Physical {
        return Err(Error::contract("CSV output expects physical units"));
    }
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    if series.k1.is_some() {
        writer.write_record(["time_years", "dp", "k1"])?;
    } else {
        writer.write_record(["time_years", "dp"])?;
    }
    for i in 0..series.len() {
        let t = series.times[i] / HOURS_PER_YEAR;
        let mut row = vec![format!("{}", t), format!("{}", series.dp[i])];
        if let Some(k1) = &series.k1 {
            row.push(format!("{}", k1[i]));
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
