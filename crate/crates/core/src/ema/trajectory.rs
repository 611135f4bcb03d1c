use crate::error::{Error, Result};
use crate::nn::Tensor2;

/// Ordered EMA sensors. Feature vectors hold every sensor's `(x, y)`
/// position first, then every sensor's `(vx, vy)` velocity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelLayout {
    pub sensors: Vec<String>,
}

impl Default for ChannelLayout {
    fn default() -> Self {
        ChannelLayout::new(["TT", "TB", "TD", "UL", "LL", "LI"])
    }
}

impl ChannelLayout {
    pub fn new<S: Into<String>>(sensors: impl IntoIterator<Item = S>) -> Self {
        ChannelLayout {
            sensors: sensors.into_iter().map(Into::into).collect(),
        }
    }

    pub fn position_channels(&self) -> usize {
        2 * self.sensors.len()
    }

    /// `s`: positions plus velocities.
    pub fn feature_channels(&self) -> usize {
        4 * self.sensors.len()
    }

    pub fn position_names(&self) -> Vec<String> {
        self.sensors
            .iter()
            .flat_map(|s| [format!("{s}_x"), format!("{s}_y")])
            .collect()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = self.position_names();
        names.extend(self.sensors.iter().flat_map(|s| [format!("{s}_vx"), format!("{s}_vy")]));
        names
    }

    /// Column of sensor `name`'s x position; y follows it.
    pub fn sensor_column(&self, name: &str) -> Result<usize> {
        self.sensors
            .iter()
            .position(|s| s == name)
            .map(|i| 2 * i)
            .ok_or_else(|| Error::Layout(format!("layout has no `{name}` sensor")))
    }
}

/// Where a trajectory sits in the preparation pipeline. Velocities may only
/// be appended to raw positions, so normalisation always sees them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Positions,
    Features,
    Normalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmaTrajectory {
    values: Tensor2,
    rate: f64,
    stage: Stage,
}

impl EmaTrajectory {
    pub fn new(values: Tensor2, rate: f64, stage: Stage) -> Result<Self> {
        if values.rows() == 0 {
            return Err(Error::TooShort {
                needed: 1,
                got: 0,
            });
        }
        if !values.is_finite() {
            return Err(Error::Numeric("trajectory values".into()));
        }
        if !(rate > 0.0) {
            return Err(Error::Param(format!("frame rate must be positive, got {rate}")));
        }
        if stage != Stage::Positions && values.cols() % 2 != 0 {
            return Err(Error::Layout("feature trajectories need an even channel count".into()));
        }
        Ok(EmaTrajectory {
            values,
            rate,
            stage,
        })
    }

    pub fn positions(values: Tensor2, rate: f64) -> Result<Self> {
        Self::new(values, rate, Stage::Positions)
    }

    pub fn values(&self) -> &Tensor2 {
        &self.values
    }

    pub fn into_values(self) -> Tensor2 {
        self.values
    }

    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn channels(&self) -> usize {
        self.values.cols()
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn position_channels(&self) -> usize {
        match self.stage {
            Stage::Positions => self.channels(),
            _ => self.channels() / 2,
        }
    }

    /// Position channels only, the view used for evaluation and analysis.
    pub fn position_view(&self) -> Tensor2 {
        let p = self.position_channels();
        let mut out = Tensor2::zeros(self.frames(), p);
        for r in 0..self.frames() {
            out.row_mut(r).copy_from_slice(&self.values.row(r)[..p]);
        }
        out
    }

    /// Appends velocity channels computed from the raw positions.
    pub fn with_velocities(self) -> Result<Self> {
        if self.stage != Stage::Positions {
            return Err(Error::Invariant(format!(
                "velocities must be computed from raw positions, trajectory is at stage {:?}",
                self.stage
            )));
        }
        let vel = compute_velocities(&self.values, self.rate)?;
        let p = self.channels();
        let mut out = Tensor2::zeros(self.frames(), 2 * p);
        for r in 0..self.frames() {
            out.row_mut(r)[..p].copy_from_slice(self.values.row(r));
            out.row_mut(r)[p..].copy_from_slice(vel.row(r));
        }
        EmaTrajectory::new(out, self.rate, Stage::Features)
    }

    pub(crate) fn with_stage(values: Tensor2, rate: f64, stage: Stage) -> Self {
        EmaTrajectory {
            values,
            rate,
            stage,
        }
    }
}

/// Per-frame time derivative: central differences inside, one-sided
/// differences at the first and last frame, scaled by the frame rate.
pub fn compute_velocities(positions: &Tensor2, rate: f64) -> Result<Tensor2> {
    let t = positions.rows();
    if t < 2 {
        return Err(Error::TooShort { needed: 2, got: t });
    }
    let c = positions.cols();
    let mut v = Tensor2::zeros(t, c);
    for j in 0..t {
        let (lo, hi, span) = match j {
            0 => (0, 1, 1.0),
            _ if j == t - 1 => (t - 2, t - 1, 1.0),
            _ => (j - 1, j + 1, 2.0),
        };
        for k in 0..c {
            v.set(j, k, (positions.get(hi, k) - positions.get(lo, k)) * rate / span);
        }
    }
    Ok(v)
}
