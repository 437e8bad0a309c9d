//! Helpers for the hand-written JSON emitters and the serde_json readers.
//!
//! Files are emitted with stable field order and probabilities at 17
//! significant digits, which round-trips every f64 bit-exactly.

use serde_json::Value;

pub(crate) fn fmt_float(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Shortest decimal form with `sig` significant digits, for CSV cells and
/// graph labels; JSON files keep the full 17 digits.
pub(crate) fn fmt_sig(x: f64, sig: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let mut s = if exp < -4 || exp >= sig as i32 {
        format!("{:.*e}", sig - 1, x)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    };
    if let Some(epos) = s.find('e') {
        let (mant, tail) = s.split_at(epos);
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        s = format!("{mant}{tail}");
    } else if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    s
}

pub(crate) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

pub(crate) fn obj<'a>(v: &'a Value, ctx: &str) -> Result<&'a serde_json::Map<String, Value>, String> {
    v.as_object().ok_or_else(|| format!("{ctx}: expected object"))
}

pub(crate) fn field<'a>(m: &'a serde_json::Map<String, Value>, key: &str) -> Result<&'a Value, String> {
    m.get(key).ok_or_else(|| format!("missing field {key:?}"))
}

pub(crate) fn arr<'a>(v: &'a Value, ctx: &str) -> Result<&'a Vec<Value>, String> {
    v.as_array().ok_or_else(|| format!("{ctx}: expected array"))
}

pub(crate) fn str<'a>(v: &'a Value, ctx: &str) -> Result<&'a str, String> {
    v.as_str().ok_or_else(|| format!("{ctx}: expected string"))
}

pub(crate) fn f64(v: &Value, ctx: &str) -> Result<f64, String> {
    v.as_f64().ok_or_else(|| format!("{ctx}: expected number"))
}

pub(crate) fn u64(v: &Value, ctx: &str) -> Result<u64, String> {
    v.as_u64().ok_or_else(|| format!("{ctx}: expected non-negative integer"))
}

pub(crate) fn usize(v: &Value, ctx: &str) -> Result<usize, String> {
    u64(v, ctx).map(|x| x as usize)
}

pub(crate) fn bool(v: &Value, ctx: &str) -> Result<bool, String> {
    v.as_bool().ok_or_else(|| format!("{ctx}: expected bool"))
}
