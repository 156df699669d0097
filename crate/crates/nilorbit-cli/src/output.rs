use std::io::{self, Write};

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope<P, R> {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub params: P,
    pub result: R,
}

/// Pretty JSON with every float written as 17 significant digits.
struct Fixed17(PrettyFormatter<'static>);

pub fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

impl Formatter for Fixed17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(sig17(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
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

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17(PrettyFormatter::new()));
    v.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) if n.is_f64() => sig17(n.as_f64().unwrap_or(f64::NAN)),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        _ => unreachable!(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&join(k), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&join(&i.to_string()), x, out);
            }
        }
        _ => out.push((prefix.to_string(), scalar_text(v))),
    }
}

/// One row per element of `result.<table>` when every element flattens to the
/// same columns, otherwise `path,value` pairs for the whole envelope.
pub fn to_csv(v: &Value, table: Option<&str>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let rows = table.and_then(|t| v.get("result")?.get(t)?.as_array());
    let mut done = false;
    if let Some(rows) = rows.filter(|r| !r.is_empty()) {
        let flat: Vec<Vec<(String, String)>> = rows
            .iter()
            .map(|r| {
                let mut o = Vec::new();
                flatten("", r, &mut o);
                o
            })
            .collect();
        let header: Vec<&String> = flat[0].iter().map(|(k, _)| k).collect();
        if flat.iter().all(|r| r.iter().map(|(k, _)| k).eq(header.iter().copied())) {
            w.write_record(&header)?;
            for r in &flat {
                w.write_record(r.iter().map(|(_, x)| x))?;
            }
            done = true;
        }
    }
    if !done {
        let mut o = Vec::new();
        flatten("", v, &mut o);
        w.write_record(["path", "value"])?;
        for (k, x) in o {
            w.write_record([k, x])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Typed re-parse with unknown fields rejected, then byte comparison of the
/// re-serialization.
pub fn roundtrip<P, R>(text: &str) -> Result<()>
where
    P: Serialize + for<'de> Deserialize<'de>,
    R: Serialize + for<'de> Deserialize<'de>,
{
    let env: Envelope<P, R> = serde_json::from_str(text)?;
    if env.schema_version != SCHEMA_VERSION {
        bail!("schema_version {} is not {SCHEMA_VERSION}", env.schema_version);
    }
    let again = to_json(&env)?;
    if again.trim_end() != text.trim_end() {
        bail!("document is not in canonical form");
    }
    Ok(())
}
