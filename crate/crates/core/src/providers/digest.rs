use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::ChatRequest;

/// Serializes `value` with object keys sorted at every level and no
/// insignificant whitespace. Numbers use serde_json's shortest round-trip
/// formatting, which is platform independent.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(v, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Canonical form of the role-tagged messages, image references, contract
/// name and structured context.
pub fn canonical_request(req: &ChatRequest) -> String {
    let messages: Vec<Value> =
        req.messages.iter().map(|m| json!({ "role": m.role.as_str(), "text": m.text })).collect();
    let doc = json!({
        "messages": messages,
        "images": req.images,
        "contract": req.contract.name(),
        "context": req.context.clone().unwrap_or(Value::Null),
    });
    canonical_json(&doc)
}

/// SHA-256 of [`canonical_request`], hex encoded.
pub fn request_digest(req: &ChatRequest) -> String {
    let digest = Sha256::digest(canonical_request(req).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
