use std::fmt::Write as _;
use std::path::Path;

use bellkit::formats::json_float;
use serde_json::Value;

use crate::CliError;

/// Human-readable text plus the JSON twin of one command run.
#[derive(Debug)]
pub struct Output {
    pub text: String,
    pub json: Value,
    /// Names of failed checks; non-empty turns into a nonzero exit.
    pub failures: Vec<String>,
}

/// Rounds every float in `v` to the report precision.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *v = serde_json::json!(json_float(x));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

pub fn render_json(v: &Value) -> String {
    let mut v = v.clone();
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("JSON value serializes");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn emit_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let text = render_json(v);
    if path == Path::new("-") {
        print!("{text}");
        Ok(())
    } else {
        write_file(path, &text)
    }
}

pub fn tuple_label(t: [usize; 3]) -> String {
    format!("({},{},{})", t[0], t[1], t[2])
}

/// Appends one formatted line.
pub fn line(buf: &mut String, args: std::fmt::Arguments<'_>) {
    buf.write_fmt(args).expect("writing to String");
    buf.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_rounded_integers_untouched() {
        let v =
            serde_json::json!({"a": 0.71 * 4.0, "b": [0.1 + 0.2, 3], "c": 18446744073709551615u64});
        let s = render_json(&v);
        assert!(s.contains("2.84"));
        assert!(s.contains("0.3"));
        assert!(s.contains("18446744073709551615"));
    }
}
