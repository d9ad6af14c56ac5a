//! `{{/json/pointer|filter}}` substitution against a request's context.
//!
//! Filters: `hms` formats seconds as `HH:MM:SS`, `time` pulls the first
//! timestamp or span out of a text, `lower` case-folds, `first_line` keeps
//! the first line, `json` embeds the raw JSON.

use serde_json::Value;

use crate::timecode::{first_time_ref, format_hms};

fn as_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn lookup<'a>(ctx: &'a Value, pointer: &str) -> Result<&'a Value, String> {
    ctx.pointer(pointer).ok_or_else(|| format!("template path {pointer:?} not found in context"))
}

fn apply(value: &Value, filters: &[&str]) -> Result<String, String> {
    let mut current = value.clone();
    for f in filters {
        current = match *f {
            "hms" => {
                let secs = current
                    .as_f64()
                    .or_else(|| current.as_str().and_then(|s| s.parse().ok()))
                    .ok_or_else(|| format!("hms filter needs a number, got {current}"))?;
                Value::String(format_hms(secs))
            }
            "time" => {
                let text = as_text(&current);
                let found = first_time_ref(&text).ok_or_else(|| format!("no timestamp in {text:?}"))?;
                Value::String(found.to_string())
            }
            "lower" => Value::String(as_text(&current).to_lowercase()),
            "first_line" => Value::String(as_text(&current).lines().next().unwrap_or("").to_string()),
            "json" => Value::String(current.to_string()),
            other => return Err(format!("unknown template filter {other:?}")),
        };
    }
    Ok(as_text(&current))
}

fn split_placeholder(inner: &str) -> (&str, Vec<&str>) {
    let mut parts = inner.split('|').map(str::trim);
    let pointer = parts.next().unwrap_or("");
    (pointer, parts.collect())
}

/// Replaces every placeholder in `template` with text.
pub fn render_str(template: &str, ctx: &Value) -> Result<String, String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| format!("unterminated placeholder in {template:?}"))?;
        let (pointer, filters) = split_placeholder(&after[..end]);
        out.push_str(&apply(lookup(ctx, pointer)?, &filters)?);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Renders every string inside `value`. A string that is exactly one
/// unfiltered placeholder is replaced by the raw JSON value it points at.
pub fn render_value(value: &Value, ctx: &Value) -> Result<Value, String> {
    Ok(match value {
        Value::String(s) => {
            let t = s.trim();
            let single = t.starts_with("{{") && t.ends_with("}}") && t[2..].find("{{").is_none();
            if single {
                let (pointer, filters) = split_placeholder(&t[2..t.len() - 2]);
                if filters.is_empty() {
                    return Ok(lookup(ctx, pointer)?.clone());
                }
            }
            Value::String(render_str(s, ctx)?)
        }
        Value::Array(items) => Value::Array(items.iter().map(|v| render_value(v, ctx)).collect::<Result<_, _>>()?),
        Value::Object(map) => Value::Object(
            map.iter().map(|(k, v)| Ok((k.clone(), render_value(v, ctx)?))).collect::<Result<_, String>>()?,
        ),
        other => other.clone(),
    })
}
