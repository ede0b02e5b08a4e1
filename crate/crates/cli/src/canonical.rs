//! Byte-stable JSON: keys sorted, every float rounded to 12 significant
//! digits before printing.

use serde_json::{Number, Value};
use skorokhod::round_sig;

pub fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        // serde_json's map is ordered by key unless `preserve_order` is on.
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

pub fn to_string(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&canonicalize(v)).expect("values always serialize");
    s.push('\n');
    s
}
