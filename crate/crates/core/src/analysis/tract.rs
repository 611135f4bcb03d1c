use crate::ema::{ChannelLayout, EmaTrajectory, STD_FLOOR};
use crate::error::{Error, Result};

/// Lip aperture, lip protrusion, and tongue tip and tongue body
/// constriction locations per frame. The x axis points anterior.
#[derive(Debug, Clone, PartialEq)]
pub struct TractVariables {
    pub la: Vec<f64>,
    pub lp: Vec<f64>,
    pub ttcl: Vec<f64>,
    pub tbcl: Vec<f64>,
}

impl TractVariables {
    pub fn len(&self) -> usize {
        self.la.len()
    }

    pub fn is_empty(&self) -> bool {
        self.la.is_empty()
    }
}

/// Tract variables in position units, before any normalisation.
pub fn raw_tract_variables(traj: &EmaTrajectory, layout: &ChannelLayout) -> Result<TractVariables> {
    if traj.position_channels() != layout.position_channels() {
        return Err(Error::Layout(format!(
            "trajectory has {} position channels, layout {}",
            traj.position_channels(),
            layout.position_channels()
        )));
    }
    let ul = layout.sensor_column("UL")?;
    let ll = layout.sensor_column("LL")?;
    let tt = layout.sensor_column("TT")?;
    let tb = layout.sensor_column("TB")?;
    let v = traj.values();
    let t = traj.frames();
    Ok(TractVariables {
        la: (0..t)
            .map(|j| (v.get(j, ul) - v.get(j, ll)).hypot(v.get(j, ul + 1) - v.get(j, ll + 1)))
            .collect(),
        lp: (0..t).map(|j| v.get(j, ul)).collect(),
        ttcl: (0..t).map(|j| v.get(j, tt)).collect(),
        tbcl: (0..t).map(|j| v.get(j, tb)).collect(),
    })
}

fn zscore(x: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let std = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt().max(STD_FLOOR);
    x.iter_mut().for_each(|v| *v = (*v - mean) / std);
}

/// Tract variables, each z-scored over the utterance.
pub fn tract_variables(traj: &EmaTrajectory, layout: &ChannelLayout) -> Result<TractVariables> {
    let mut tv = raw_tract_variables(traj, layout)?;
    for s in [&mut tv.la, &mut tv.lp, &mut tv.ttcl, &mut tv.tbcl] {
        zscore(s);
    }
    Ok(tv)
}
