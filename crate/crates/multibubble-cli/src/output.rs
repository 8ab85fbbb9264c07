//! Artifact writers: CSV with a `#`-prefixed metadata header and JSON with
//! 17-significant-digit floats.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use multibubble::jsonio;

/// Common metadata attached to every artifact.
pub fn metadata(domain: Option<&Value>, regime: Option<&Value>, extra: Value) -> Value {
    let mut meta = json!({
        "generator": format!("multibubble {}", env!("CARGO_PKG_VERSION")),
        "timestamp": SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    });
    let map = meta.as_object_mut().unwrap();
    if let Some(d) = domain {
        map.insert("domain".into(), d.clone());
    }
    if let Some(r) = regime {
        map.insert("regime".into(), r.clone());
    }
    if let Value::Object(extra_map) = extra {
        for (k, v) in extra_map {
            map.insert(k, v);
        }
    }
    meta
}

/// Write a JSON artifact: `{"metadata": ..., <body fields>}`.
pub fn write_json<T: Serialize>(path: &str, meta: &Value, body_key: &str, body: &T) -> Result<()> {
    let doc = json!({
        "metadata": meta,
        body_key: serde_json::to_value(body)?,
    });
    let text = jsonio::to_string_f17(&doc)?;
    if let Some(parent) = Path::new(path).parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).ok();
        }
    }
    fs::write(path, text + "\n").with_context(|| format!("writing {path}"))?;
    Ok(())
}

/// Write a CSV artifact (RFC-4180 rows) preceded by `# key: value` metadata
/// comment lines.
pub fn write_csv(path: &str, meta: &Value, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut text = String::new();
    if let Value::Object(map) = meta {
        for (k, v) in map {
            let rendered = match v {
                Value::String(s) => s.clone(),
                other => serde_json::to_string(other)?,
            };
            text.push_str(&format!("# {k}: {rendered}\r\n"));
        }
    }
    text.push_str(&header.join(","));
    text.push_str("\r\n");
    for row in rows {
        let fields: Vec<String> = row.iter().map(|v| jsonio::format_float(*v)).collect();
        text.push_str(&fields.join(","));
        text.push_str("\r\n");
    }
    if let Some(parent) = Path::new(path).parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).ok();
        }
    }
    fs::write(path, text).with_context(|| format!("writing {path}"))?;
    Ok(())
}
