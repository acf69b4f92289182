use serde_json::Value;

/// Key fragments that would reveal another rating, an automated verdict or
/// the anchor schedule.
pub const FORBIDDEN_KEYS: &[&str] = &[
    "grade",
    "verdict",
    "anchor",
    "rater",
    "reviewer",
    "label",
    "latent",
    "scenario",
    "sample",
    "severity",
    "majority",
    "reference",
    "presentation_index",
    "score",
    "trace",
    "fired",
];

/// Walks a serialized payload and reports every forbidden key and every
/// string value that contains one of `forbidden_values` (rater ids, other
/// reviewers' ids, sample ids). Empty when the payload is blind.
pub fn audit_payload(payload: &Value, forbidden_values: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    walk(payload, "$", forbidden_values, &mut out);
    out
}

fn walk(v: &Value, path: &str, values: &[String], out: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let lower = k.to_ascii_lowercase();
                if let Some(bad) = FORBIDDEN_KEYS.iter().find(|f| lower.contains(*f)) {
                    out.push(format!("{path}.{k}: key matches \"{bad}\""));
                }
                walk(child, &format!("{path}.{k}"), values, out);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                walk(child, &format!("{path}[{i}]"), values, out);
            }
        }
        Value::String(s) => {
            if let Some(bad) = values.iter().find(|f| !f.is_empty() && s.contains(f.as_str())) {
                out.push(format!("{path}: value mentions \"{bad}\""));
            }
        }
        _ => {}
    }
}
