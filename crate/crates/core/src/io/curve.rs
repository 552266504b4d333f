//! Learning-curve CSV files and the companion evolution log.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{CurvePoint, EvoLogEntry};

pub const CURVE_HEADER: [&str; 6] = [
    "step",
    "mean_reward",
    "std_reward",
    "buffer_size",
    "mean_priority",
    "distinct_near_optimal",
];

pub const EVO_HEADER: [&str; 11] = [
    "step",
    "size_before",
    "parents",
    "offspring",
    "pruned",
    "evicted",
    "size_after",
    "best_offspring_reward",
    "max_fitness_before",
    "max_fitness_after",
    "running_max_reward",
];

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

fn csv_error(err: csv::Error) -> Error {
    Error::Precondition(format!("csv encoding failed: {err}"))
}

/// Renders curve points with six fractional digits for real columns.
pub fn render_curve_csv(points: &[CurvePoint]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CURVE_HEADER).map_err(csv_error)?;
    for p in points {
        w.write_record([
            p.step.to_string(),
            fixed(p.mean_reward),
            fixed(p.std_reward),
            p.buffer_size.to_string(),
            fixed(p.mean_priority),
            p.distinct_near_optimal.to_string(),
        ])
        .map_err(csv_error)?;
    }
    finish(w)
}

pub fn render_evo_csv(log: &[EvoLogEntry]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(EVO_HEADER).map_err(csv_error)?;
    for e in log {
        let s = &e.stats;
        w.write_record([
            s.step.to_string(),
            s.size_before.to_string(),
            s.parents.to_string(),
            s.offspring.to_string(),
            s.pruned.to_string(),
            s.evicted.to_string(),
            s.size_after.to_string(),
            fixed(s.best_offspring_reward),
            fixed(s.max_fitness_before),
            fixed(s.max_fitness_after),
            fixed(e.running_max_reward),
        ])
        .map_err(csv_error)?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Precondition(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is ascii"))
}

/// Parses a curve CSV; `source` names the file in error messages.
pub fn parse_curve_csv(text: &str, source: &str) -> Result<Vec<CurvePoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::parse(source, Some(1), e.to_string()))?
        .clone();
    if header.iter().ne(CURVE_HEADER) {
        return Err(Error::parse(
            source,
            Some(1),
            format!("expected header `{}`", CURVE_HEADER.join(",")),
        ));
    }
    let mut points: Vec<CurvePoint> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line());
            Error::parse(source, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line());
        if record.len() != CURVE_HEADER.len() {
            return Err(Error::parse(
                source,
                line,
                format!(
                    "expected {} fields, found {}",
                    CURVE_HEADER.len(),
                    record.len()
                ),
            ));
        }
        let field = |i: usize| record.get(i).unwrap_or_default();
        let int = |i: usize| -> Result<u64> {
            field(i).parse().map_err(|_| {
                Error::parse(
                    source,
                    line,
                    format!("`{}` is not an integer ({})", field(i), CURVE_HEADER[i]),
                )
            })
        };
        let real = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| {
                    Error::parse(
                        source,
                        line,
                        format!(
                            "`{}` is not a finite number ({})",
                            field(i),
                            CURVE_HEADER[i]
                        ),
                    )
                })
        };
        let point = CurvePoint {
            step: int(0)?,
            mean_reward: real(1)?,
            std_reward: real(2)?,
            buffer_size: int(3)? as usize,
            mean_priority: real(4)?,
            distinct_near_optimal: int(5)? as usize,
        };
        if let Some(prev) = points.last() {
            if point.step <= prev.step {
                return Err(Error::parse(
                    source,
                    line,
                    "rows must be ordered by increasing step",
                ));
            }
        }
        points.push(point);
    }
    Ok(points)
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurvePoint>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_curve_csv(&text, &path.display().to_string())
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))
}
