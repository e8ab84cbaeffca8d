//! Deterministic CSV/JSON rendering and run manifests.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

/// 17 significant digits, lowercase scientific notation.
pub fn fmt_float(v: f64) -> String {
    // Adding 0.0 folds -0.0 into 0.0.
    format!("{:.16e}", v + 0.0)
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// Pretty JSON whose floats use [`fmt_float`].
struct SciFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for SciFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_float(value).as_bytes())
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

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, SciFormatter(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("in-memory JSON serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Builds a CSV document from a header and string rows.
pub fn to_csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory CSV write");
    for row in rows {
        let row: Vec<String> = row.into_iter().collect();
        w.write_record(&row).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

/// One verification check as reported by `verify` and stored in manifests.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub criterion: u8,
    pub measured: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Above,
}

impl Relation {
    pub fn holds(self, measured: f64, tolerance: f64) -> bool {
        match self {
            Relation::AtMost => measured <= tolerance,
            Relation::AtLeast => measured >= tolerance,
            Relation::Above => measured > tolerance,
        }
    }
}

/// What a command produced, before it is written anywhere.
#[derive(Debug, Clone, Default)]
pub struct CommandOutput {
    pub data: String,
    pub config: Value,
    pub derived: Value,
    pub summary: Option<Value>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

#[derive(Serialize)]
struct Timings {
    wall_seconds: f64,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    version: &'static str,
    command: &'a str,
    data_file: String,
    config: &'a Value,
    derived: &'a Value,
    timings: Timings,
    checks: &'a [Check],
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<&'a Value>,
    warnings: &'a [String],
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes the data to `out` (or stdout) and, for file output, its manifest.
pub fn emit(
    command: &str,
    out: Option<&Path>,
    output: &CommandOutput,
    wall_seconds: f64,
) -> io::Result<()> {
    let Some(out) = out else {
        let mut stdout = io::stdout().lock();
        stdout.write_all(output.data.as_bytes())?;
        return stdout.flush();
    };
    std::fs::write(out, output.data.as_bytes())?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        command,
        data_file: out
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        config: &output.config,
        derived: &output.derived,
        timings: Timings { wall_seconds },
        checks: &output.checks,
        summary: output.summary.as_ref(),
        warnings: &output.warnings,
    };
    std::fs::write(manifest_path(out), to_json(&manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn float_format_is_fixed_width_scientific() {
        assert_eq!(fmt_float(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_float(-1234.5), "-1.2345000000000000e3");
        let v = 0.1 + 0.2;
        assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn json_floats_use_the_same_format() {
        let s = to_json(&json!({"a": 0.25, "b": 3, "c": null}));
        assert!(s.contains("\"a\": 2.5000000000000000e-1"));
        assert!(s.contains("\"b\": 3"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"], json!(0.25));
    }

    #[test]
    fn csv_quotes_when_needed() {
        let s = to_csv(&["a", "b"], vec![vec!["1".to_string(), "x,y".to_string()]]);
        assert_eq!(s, "a,b\n1,\"x,y\"\n");
    }

    #[test]
    fn relations() {
        assert!(Relation::AtMost.holds(1.0, 1.0));
        assert!(!Relation::AtMost.holds(1.0, 0.0));
        assert!(Relation::AtLeast.holds(0.0, 0.0));
        assert!(!Relation::Above.holds(0.0, 0.0));
    }
}
