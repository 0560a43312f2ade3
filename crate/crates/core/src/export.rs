//! CSV writers shared by trajectories and oracle marginals.

use std::io::{self, Write};

/// Full double precision (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Per-time node blocks written after the `t,loss` columns.
pub struct Block<'a> {
    pub prefix: &'a str,
    /// Row-major `times x n`.
    pub values: &'a [f64],
}

/// Writes `t,loss,<prefix>_0..<prefix>_{n-1},...` with one row per time.
pub fn write_state_csv<W: Write>(
    mut w: W,
    times: &[f64],
    loss: &[f64],
    n: usize,
    blocks: &[Block<'_>],
) -> io::Result<()> {
    let mut header = vec!["t".to_string(), "loss".to_string()];
    for block in blocks {
        header.extend((0..n).map(|i| format!("{}_{i}", block.prefix)));
    }
    writeln!(w, "{}", header.join(","))?;
    let mut row = Vec::with_capacity(2 + n * blocks.len());
    for (k, &t) in times.iter().enumerate() {
        row.clear();
        row.push(fmt_f64(t));
        row.push(fmt_f64(loss[k]));
        for block in blocks {
            row.extend(block.values[k * n..(k + 1) * n].iter().map(|&x| fmt_f64(x)));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
