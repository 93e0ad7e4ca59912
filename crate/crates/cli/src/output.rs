//! CSV and JSON writers. All numbers are SI.

use std::io::Write;

use serde_json::{json, Map, Value};

use levcsl::experiments::TableRow;
use levcsl::{Discriminability, SweepAxis};

use crate::config::Format;

pub const SWEEP_HEADER: [&str; 9] = [
    "axis_value",
    "D_t",
    "D_c",
    "D_a",
    "lambda_sph",
    "Y2_on",
    "Y2_off",
    "rel_diff",
    "stable_flag",
];

fn sci(v: f64) -> String {
    format!("{v:.12e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

fn sweep_units(axis: SweepAxis) -> Value {
    json!({
        "axis_value": axis.unit(),
        "D_t": "s^-1",
        "D_c": "s^-1",
        "D_a": "s^-1",
        "lambda_sph": "s^-1",
        "Y2_on": "dimensionless",
        "Y2_off": "dimensionless",
        "rel_diff": "dimensionless",
    })
}

pub fn write_sweep_csv(out: impl Write, rows: &[TableRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            sci(r.axis_value),
            sci(r.d_t),
            sci(r.d_c),
            sci(r.d_a),
            sci(r.lambda_sph),
            opt(r.y2_on),
            opt(r.y2_off),
            opt(r.rel_diff),
            r.stable_flag.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_json(axis: SweepAxis, table: &Discriminability) -> Value {
    let finite = |v: f64| if v.is_finite() { json!(v) } else { Value::Null };
    json!({
        "axis": axis.name(),
        "units": sweep_units(axis),
        "max_rel_diff": finite(table.max_rel_diff),
        "argmax_axis_value": table.argmax_axis_value(),
        "rows": table.rows,
    })
}

/// One named scalar of a point report.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub quantity: String,
    pub value: Option<f64>,
    pub unit: &'static str,
}

/// Flat list of scalars with units, plus free-form string fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub records: Vec<Record>,
    pub notes: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, quantity: impl Into<String>, value: f64, unit: &'static str) {
        self.records.push(Record {
            quantity: quantity.into(),
            value: Some(value).filter(|v| v.is_finite()),
            unit,
        });
    }

    pub fn note(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.notes.push((key.into(), value.into()));
    }

    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        for (k, v) in &self.notes {
            root.insert(k.clone(), json!(v));
        }
        let mut values = Map::new();
        let mut units = Map::new();
        for r in &self.records {
            values.insert(r.quantity.clone(), json!(r.value));
            units.insert(r.quantity.clone(), json!(r.unit));
        }
        root.insert("values".into(), Value::Object(values));
        root.insert("units".into(), Value::Object(units));
        Value::Object(root)
    }

    /// `quantity,value,unit` rows; notes go in as rows with an empty unit.
    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["quantity", "value", "unit"])?;
        for (k, v) in &self.notes {
            w.write_record([k.as_str(), v.as_str(), ""])?;
        }
        for r in &self.records {
            w.write_record([r.quantity.as_str(), &opt(r.value), r.unit])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, out: impl Write, format: Format) -> std::io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out).map_err(std::io::Error::other),
            Format::Json => write_json(out, &self.to_json()),
        }
    }
}

pub fn write_json(mut out: impl Write, value: &Value) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)
}
