use super::HeatKernelError;

/// Strictly increasing, nonnegative, finite sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid(Vec<f64>);

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self, HeatKernelError> {
        if let Some(&t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(HeatKernelError::BadTime { t });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HeatKernelError::BadGrid(
                "times must be strictly increasing".into(),
            ));
        }
        Ok(Self(times))
    }

    /// `points` geometrically spaced times from `start` to `stop`, optionally
    /// preceded by `t = 0`.
    pub fn geometric(
        start: f64,
        stop: f64,
        points: usize,
        include_zero: bool,
    ) -> Result<Self, HeatKernelError> {
        if !(start > 0.0 && stop > start && stop.is_finite()) || points < 2 {
            return Err(HeatKernelError::BadGrid(format!(
                "geometric grid needs 0 < start < stop and at least 2 points (got {start}, {stop}, {points})"
            )));
        }
        let ratio = (stop / start).ln();
        let mut times: Vec<f64> = Vec::with_capacity(points + 1);
        if include_zero {
            times.push(0.0);
        }
        times.extend((0..points).map(|i| start * (ratio * i as f64 / (points - 1) as f64).exp()));
        *times.last_mut().unwrap() = stop;
        Self::new(times)
    }

    pub fn linear(start: f64, stop: f64, points: usize) -> Result<Self, HeatKernelError> {
        if !(start >= 0.0 && stop > start && stop.is_finite()) || points < 2 {
            return Err(HeatKernelError::BadGrid(format!(
                "linear grid needs 0 <= start < stop and at least 2 points (got {start}, {stop}, {points})"
            )));
        }
        let step = (stop - start) / (points - 1) as f64;
        let mut times: Vec<f64> = (0..points).map(|i| start + step * i as f64).collect();
        *times.last_mut().unwrap() = stop;
        Self::new(times)
    }

    /// 60 geometric points over `[1e-3, 5]` plus `t = 0`.
    pub fn comparison_default() -> Self {
        Self::geometric(1e-3, 5.0, 60, true).expect("valid constants")
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMethod {
    Dense,
    Uniformized,
    MonteCarlo,
}

impl CurveMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveMethod::Dense => "dense",
            CurveMethod::Uniformized => "uniformized",
            CurveMethod::MonteCarlo => "monte_carlo",
        }
    }
}

/// Return probabilities on a time grid. `error_bounds` holds the
/// uniformization tail bound or the Monte Carlo standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnCurve {
    times: TimeGrid,
    values: Vec<f64>,
    error_bounds: Option<Vec<f64>>,
    method: CurveMethod,
}

// Rounding slack tolerated before a value counts as outside [0, 1].
const RANGE_SLACK: f64 = 1e-9;

impl ReturnCurve {
    /// Values within rounding of `[0, 1]` are clamped into it.
    pub fn new(
        times: TimeGrid,
        values: Vec<f64>,
        error_bounds: Option<Vec<f64>>,
        method: CurveMethod,
    ) -> Result<Self, HeatKernelError> {
        if values.len() != times.len() {
            return Err(HeatKernelError::BadGrid(format!(
                "{} values for {} times",
                values.len(),
                times.len()
            )));
        }
        if let Some(e) = &error_bounds {
            if e.len() != times.len() || e.iter().any(|x| !(*x >= 0.0)) {
                return Err(HeatKernelError::BadGrid(
                    "error bounds must be nonnegative, one per time".into(),
                ));
            }
        }
        let mut values = values;
        for (v, &t) in values.iter_mut().zip(times.times()) {
            if !(*v >= -RANGE_SLACK && *v <= 1.0 + RANGE_SLACK) {
                return Err(HeatKernelError::ValueOutOfRange { t, value: *v });
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            times,
            values,
            error_bounds,
            method,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.times
    }

    pub fn times(&self) -> &[f64] {
        self.times.times()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn error_bounds(&self) -> Option<&[f64]> {
        self.error_bounds.as_deref()
    }

    /// Error bound at index `i`, zero when the curve carries none.
    pub fn error_at(&self, i: usize) -> f64 {
        self.error_bounds.as_ref().map_or(0.0, |e| e[i])
    }

    pub fn method(&self) -> CurveMethod {
        self.method
    }
}
