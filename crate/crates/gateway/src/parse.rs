use serde_json::{Deserializer, Value};

/// Why a response yielded no prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseFailure {
    /// No JSON object with a `sentence_months` field.
    Absent,
    /// The field exists but is not a finite non-negative number.
    NotANumber(String),
}

impl std::fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseFailure::Absent => write!(f, "no JSON object with sentence_months"),
            ParseFailure::NotANumber(v) => write!(f, "sentence_months is not a non-negative number: {v}"),
        }
    }
}

/// Extract `sentence_months` from the first JSON object in `raw` carrying
/// that field. Prose and code fences around the object are ignored.
pub fn parse_prediction(raw: &str) -> Result<f64, ParseFailure> {
    let mut first_bad = None;
    for (start, _) in raw.match_indices('{') {
        let mut stream = Deserializer::from_str(&raw[start..]).into_iter::<Value>();
        let Some(Ok(Value::Object(map))) = stream.next() else {
            continue;
        };
        match map.get("sentence_months") {
            Some(Value::Number(n)) => match n.as_f64() {
                Some(m) if m.is_finite() && m >= 0.0 => return Ok(m),
                _ => {
                    first_bad.get_or_insert_with(|| n.to_string());
                }
            },
            Some(other) => {
                first_bad.get_or_insert_with(|| other.to_string());
            }
            None => {}
        }
    }
    Err(first_bad.map_or(ParseFailure::Absent, ParseFailure::NotANumber))
}
