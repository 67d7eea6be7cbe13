//! Artifact formats: time series and event CSVs, force tables, thermal
//! tables, JSON with 17-significant-digit floats, and the SVG trace.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use snapharvest_core::engine::{Event, Sample};
use snapharvest_core::harvester::Mode;
use snapharvest_core::magnetics::{ForceSource, ForceTable};

use crate::error::{Error, Result};

pub const TIMESERIES_HEADER: [&str; 7] = ["t_s", "temp_c", "x_m", "xdot_m_s", "v_volt", "mode", "p_harv_w"];
pub const EVENTS_HEADER: [&str; 4] = ["t_s", "event", "side", "temp_c"];
/// Corner cell of the force table header row.
pub const FORCE_TABLE_CORNER: &str = "temp_c";

pub const SVG_WIDTH: u32 = 1200;
pub const SVG_HEIGHT: u32 = 400;

/// 17 significant digits, enough to read back the identical `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// serde_json formatter that writes floats through [`fmt_f64`] and
/// otherwise behaves like the pretty printer.
struct Sig17<'a>(serde_json::ser::PrettyFormatter<'a>);

impl serde_json::ser::Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(v))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON, floats at 17 significant digits, non-finite floats as null.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(Default::default()));
    value
        .serialize(&mut ser)
        .expect("in-memory JSON serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            what: "CSV",
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn finish(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

pub fn write_timeseries(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TIMESERIES_HEADER).map_err(|e| csv_err(path, e))?;
    for s in samples {
        w.write_record([
            fmt_f64(s.t),
            fmt_f64(s.temp),
            fmt_f64(s.x),
            fmt_f64(s.x_dot),
            fmt_f64(s.v),
            s.mode.label().to_string(),
            fmt_f64(s.p_harv),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

fn format_error(what: &'static str, path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        what,
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_num(what: &'static str, path: &Path, line: u64, field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| format_error(what, path, format!("line {line}: `{field}` is not a number")))
}

pub fn read_timeseries(path: &Path) -> Result<Vec<Sample>> {
    const WHAT: &str = "time series";
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?;
    if header.iter().ne(TIMESERIES_HEADER) {
        return Err(format_error(WHAT, path, "unexpected header"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| parse_num(WHAT, path, line, &rec[i]);
        let mode = Mode::from_label(&rec[5])
            .ok_or_else(|| format_error(WHAT, path, format!("line {line}: unknown mode `{}`", &rec[5])))?;
        out.push(Sample {
            t: num(0)?,
            temp: num(1)?,
            x: num(2)?,
            x_dot: num(3)?,
            v: num(4)?,
            mode,
            p_harv: num(6)?,
        });
    }
    Ok(out)
}

pub fn write_events(path: &Path, events: &[Event]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(EVENTS_HEADER).map_err(|e| csv_err(path, e))?;
    for e in events {
        w.write_record([
            fmt_f64(e.t),
            e.kind.as_str().to_string(),
            e.side.as_str().to_string(),
            fmt_f64(e.temp),
        ])
        .map_err(|err| csv_err(path, err))?;
    }
    finish(path, w)
}

/// Header row: the corner label then the x nodes (m). Each further row: a
/// temperature node (°C) then the forces (N) along x.
pub fn write_force_table(path: &Path, table: &ForceTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec![FORCE_TABLE_CORNER.to_string()];
    header.extend(table.x_grid().iter().map(|&x| fmt_f64(x)));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (j, &t) in table.t_grid().iter().enumerate() {
        let mut row = vec![fmt_f64(t)];
        row.extend(table.row(j).iter().map(|&f| fmt_f64(f)));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_force_table(path: &Path, source: ForceSource) -> Result<ForceTable> {
    const WHAT: &str = "force table";
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut records = r.records();
    let header = records
        .next()
        .ok_or_else(|| format_error(WHAT, path, "file is empty"))?
        .map_err(|e| csv_err(path, e))?;
    let x_grid = header
        .iter()
        .skip(1)
        .map(|f| parse_num(WHAT, path, 1, f))
        .collect::<Result<Vec<_>>>()?;
    let mut t_grid = Vec::new();
    let mut values = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != x_grid.len() + 1 {
            return Err(format_error(WHAT, path, format!("line {line}: wrong number of fields")));
        }
        t_grid.push(parse_num(WHAT, path, line, &rec[0])?);
        for f in rec.iter().skip(1) {
            values.push(parse_num(WHAT, path, line, f)?);
        }
    }
    ForceTable::new(x_grid, t_grid, values, source).map_err(|e| format_error(WHAT, path, e.to_string()))
}

/// Two columns, time (s) and temperature (°C). A first row that does not
/// parse as numbers is taken as a header.
pub fn read_thermal_table(path: &Path) -> Result<Vec<(f64, f64)>> {
    const WHAT: &str = "thermal table";
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(format_error(WHAT, path, format!("line {line}: expected 2 fields")));
        }
        let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
        match parsed {
            (Ok(t), Ok(v)) => out.push((t, v)),
            _ if i == 0 => continue,
            _ => return Err(format_error(WHAT, path, format!("line {line}: fields are not numbers"))),
        }
    }
    Ok(out)
}

/// Displacement against time as one polyline in a 1200×400 viewport.
pub fn trace_svg(samples: &[Sample]) -> String {
    let (w, h) = (f64::from(SVG_WIDTH), f64::from(SVG_HEIGHT));
    let margin = 40.0;
    let (t0, t1) = match (samples.first(), samples.last()) {
        (Some(a), Some(b)) if b.t > a.t => (a.t, b.t),
        (Some(a), _) => (a.t, a.t + 1.0),
        _ => (0.0, 1.0),
    };
    let x_max = samples.iter().fold(0.0f64, |m, s| m.max(s.x.abs()));
    let x_max = if x_max > 0.0 { x_max } else { 1.0 };
    let px = |t: f64| margin + (t - t0) / (t1 - t0) * (w - 2.0 * margin);
    let py = |x: f64| h / 2.0 - x / x_max * (h / 2.0 - margin);
    let points: Vec<String> = samples
        .iter()
        .map(|s| format!("{:.2},{:.2}", px(s.t), py(s.x)))
        .collect();
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<line x1=\"{margin}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"#999\" stroke-width=\"1\"/>\n",
        y = h / 2.0,
        x2 = w - margin
    ));
    svg.push_str(&format!(
        "<text x=\"{margin}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">x (m) vs t (s), t in [{t0:.3}, {t1:.3}], |x| max {x_max:.4e}</text>\n"
    ));
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1\" points=\"{}\"/>\n",
        points.join(" ")
    ));
    svg.push_str("</svg>\n");
    svg
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 45.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{s}");
        }
    }

    #[test]
    fn json_floats_and_nulls() {
        #[derive(Serialize)]
        struct Probe {
            a: f64,
            b: Option<f64>,
            c: f64,
            n: usize,
        }
        let s = to_json_string(&Probe {
            a: 0.1,
            b: None,
            c: f64::NAN,
            n: 3,
        });
        assert!(s.contains("\"a\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"b\": null"));
        assert!(s.contains("\"c\": null"));
        assert!(s.contains("\"n\": 3"));
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["a"].as_f64(), Some(0.1));
    }
}
