//! Result files: the delimited time-series table, the JSON run report and a
//! gnuplot script.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::Representation;
use crate::observables::{Estimate, TimeSeries};

use super::{OutputPaths, RunReport};

/// Header row of the table, tab separated.
pub const TABLE_COLUMNS: [&str; 10] = [
    "t",
    "N1",
    "sigma_N1",
    "N2",
    "sigma_N2",
    "N3",
    "sigma_N3",
    "xi13",
    "sigma_xi13",
    "divergence_fraction",
];

/// Renders the table. Comment lines start with `#` and carry the
/// representation, the provenance string and a one-line config echo. The
/// echo omits the worker count and output paths, which do not affect the
/// data, so equal seeds give equal tables.
pub fn write_table(ts: &TimeSeries, report: &RunReport, provenance: &str) -> Result<String> {
    let mut echo = serde_json::to_value(&report.config)
        .map_err(|e| Error::Domain(format!("cannot serialize config: {e}")))?;
    if let Some(map) = echo.as_object_mut() {
        map.remove("workers");
        map.remove("output");
    }
    let config = echo.to_string();
    let mut out = String::new();
    let _ = writeln!(out, "# ctap time series");
    let _ = writeln!(out, "# provenance: {provenance}");
    let _ = writeln!(out, "# representation: {}", ts.representation);
    let _ = writeln!(out, "# config: {config}");
    out.push_str(&TABLE_COLUMNS.join("\t"));
    out.push('\n');
    for i in 0..ts.len() {
        let p = &ts.populations;
        let row = [
            ts.times[i],
            p[0][i].value,
            p[0][i].stderr,
            p[1][i].value,
            p[1][i].stderr,
            p[2][i].value,
            p[2][i].stderr,
            ts.xi13[i].value,
            ts.xi13[i].stderr,
            ts.divergence_fraction[i],
        ];
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    Ok(out)
}

fn gnuplot_script(table: &str) -> String {
    format!(
        r##"# gnuplot script for {table}
set datafile commentschars "#"
set key autotitle columnhead
set xlabel "t"
set terminal pngcairo size 900,600
set output "populations.png"
set ylabel "N_j"
plot "{table}" using 1:2:3 with yerrorlines title "N1", \
     "" using 1:4:5 with yerrorlines title "N2", \
     "" using 1:6:7 with yerrorlines title "N3"
set output "xi13.png"
set ylabel "xi_13"
plot "{table}" using 1:8:9 with yerrorlines title "xi13", 0 with lines notitle
"##
    )
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes the table, the report and (if requested) the gnuplot script.
/// Returns the paths written.
pub fn emit_outputs(
    ts: &TimeSeries,
    report: &RunReport,
    paths: &OutputPaths,
    provenance: &str,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&paths.dir).map_err(|e| Error::io(&paths.dir, e))?;
    let mut written = Vec::new();

    let table = paths.table_path();
    write(&table, &write_table(ts, report, provenance)?)?;
    written.push(table);

    let report_path = paths.report_path();
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Domain(format!("cannot serialize report: {e}")))?;
    write(&report_path, &(json + "\n"))?;
    written.push(report_path);

    if paths.plot {
        let script = paths.dir.join("plot.gp");
        write(&script, &gnuplot_script(&paths.table))?;
        written.push(script);
    }
    Ok(written)
}

/// Parses a table written by [`emit_outputs`].
pub fn read_table(path: &Path) -> Result<TimeSeries> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Table {
        path: path.to_path_buf(),
        message,
    };
    let mut representation = None;
    let mut header_seen = false;
    let mut ts = TimeSeries {
        representation: Representation::Gpe,
        times: Vec::new(),
        populations: Default::default(),
        xi13: Vec::new(),
        divergence_fraction: Vec::new(),
    };
    for (lineno, line) in text.lines().enumerate() {
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(rep) = comment.trim().strip_prefix("representation:") {
                representation = Some(match rep.trim() {
                    "gpe" => Representation::Gpe,
                    "wigner" => Representation::Wigner,
                    "positive-p" => Representation::PositiveP,
                    other => return Err(bad(format!("unknown representation {other:?}"))),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if !header_seen {
            if cells != TABLE_COLUMNS {
                return Err(bad(format!("unexpected header row {line:?}")));
            }
            header_seen = true;
            continue;
        }
        if cells.len() != TABLE_COLUMNS.len() {
            return Err(bad(format!(
                "line {}: expected {} columns, found {}",
                lineno + 1,
                TABLE_COLUMNS.len(),
                cells.len()
            )));
        }
        let v: Vec<f64> = cells
            .iter()
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?;
        ts.times.push(v[0]);
        for j in 0..3 {
            ts.populations[j].push(Estimate {
                value: v[1 + 2 * j],
                stderr: v[2 + 2 * j],
            });
        }
        ts.xi13.push(Estimate {
            value: v[7],
            stderr: v[8],
        });
        ts.divergence_fraction.push(v[9]);
    }
    if !header_seen {
        return Err(bad("missing header row".into()));
    }
    ts.representation =
        representation.ok_or_else(|| bad("missing '# representation:' line".into()))?;
    Ok(ts)
}
