use std::io::Write;

use crate::error::Result;

use super::{ErrorTable, TimingTable};

fn opt(v: Option<f64>) -> String {
    v.map(|r| format!("{r:e}")).unwrap_or_default()
}

/// `resolution,error,stderr,rate`; the rate cell of the first row is empty.
pub fn write_errors_csv<W: Write>(t: &ErrorTable, mut w: W) -> Result<()> {
    writeln!(w, "resolution,error,stderr,rate")?;
    for r in &t.rows {
        writeln!(
            w,
            "{},{:e},{:e},{}",
            r.resolution,
            r.error,
            r.stderr,
            opt(r.rate)
        )?;
    }
    Ok(())
}

/// `observed_mean,theoretical`.
pub fn write_rates_csv<W: Write>(t: &ErrorTable, mut w: W) -> Result<()> {
    writeln!(w, "observed_mean,theoretical")?;
    writeln!(w, "{},{:e}", opt(t.observed_mean), t.theoretical)?;
    Ok(())
}

/// `M,classical_seconds,fast_seconds`.
pub fn write_timing_csv<W: Write>(t: &TimingTable, mut w: W) -> Result<()> {
    writeln!(w, "M,classical_seconds,fast_seconds")?;
    for r in &t.rows {
        writeln!(
            w,
            "{},{:e},{:e}",
            r.steps, r.classical_seconds, r.fast_seconds
        )?;
    }
    Ok(())
}

/// Whitespace-separated two-column series, one point per line.
pub fn write_plot_data<W: Write>(
    points: impl IntoIterator<Item = (f64, f64)>,
    mut w: W,
) -> Result<()> {
    for (x, y) in points {
        writeln!(w, "{x:e} {y:e}")?;
    }
    Ok(())
}
