//! CSV and JSON renderings of trajectories, sweeps and tables.
//!
//! CSV: comma separated, header row, LF line endings, reals with 17
//! significant digits.

use std::io::{self, Write};

use serde::Serialize;

use crate::analysis::{project_normalized, SweepCell};
use crate::error::Result;
use crate::propagator::TrajectoryRecord;

pub const TRAJECTORY_HEADER: &str = "t,re_c1,im_c1,re_c2,im_c2,norm_sq,log_scale,W1,W2";
pub const SWEEP_HEADER: &str = "i,j,T,amp_scale,rho,ratio,dominant,survival,pass_ratio,pass_survival";

pub fn real(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_trajectory_csv<W: Write>(traj: &TrajectoryRecord, mut w: W) -> Result<()> {
    let p = project_normalized(traj)?;
    let mut out = String::with_capacity(traj.len() * 200);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for k in 0..traj.len() {
        let s = &traj.states[k];
        let fields = [
            traj.times[k],
            s.c1.re,
            s.c1.im,
            s.c2.re,
            s.c2.im,
            traj.norms_sq[k],
            traj.log_scale[k],
            p.w1[k],
            p.w2[k],
        ];
        out.push_str(&fields.iter().map(|&x| real(x)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    w.write_all(out.as_bytes()).map_err(io_error)?;
    Ok(())
}

pub fn sweep_csv_line(c: &SweepCell) -> String {
    let (ratio, dominant, survival) = match (&c.report, &c.error) {
        (Some(r), _) => (real(r.ratio), r.dominant_label().to_string(), real(r.survival)),
        (None, Some((kind, _))) => (real(f64::NAN), format!("error:{kind}"), real(f64::NAN)),
        (None, None) => (real(f64::NAN), "error:Unknown".to_string(), real(f64::NAN)),
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        c.i,
        c.j,
        real(c.duration),
        real(c.amp_scale),
        real(c.rho),
        ratio,
        dominant,
        survival,
        c.pass_ratio,
        c.pass_survival
    )
}

/// Sweep CSV writer that flushes after every row so an interrupted run
/// leaves a well-formed prefix.
pub struct SweepCsvWriter<W: Write> {
    inner: W,
}

impl<W: Write> SweepCsvWriter<W> {
    pub fn new(mut inner: W) -> io::Result<Self> {
        writeln!(inner, "{SWEEP_HEADER}")?;
        inner.flush()?;
        Ok(SweepCsvWriter { inner })
    }

    pub fn write_row(&mut self, cells: &[SweepCell]) -> io::Result<()> {
        for c in cells {
            writeln!(self.inner, "{}", sweep_csv_line(c))?;
        }
        self.inner.flush()
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| crate::error::Error::Precondition(e.to_string()))?;
    w.write_all(b"\n").map_err(io_error)?;
    Ok(())
}

fn io_error(e: io::Error) -> crate::error::Error {
    crate::error::Error::Precondition(format!("write failed: {e}"))
}
