use crate::GatewayError;

pub const FACTS_PLACEHOLDER: &str = "{facts}";

/// Shipped template. Not a canonical prompt; projects are expected to supply
/// their own through configuration.
pub const DEFAULT_TEMPLATE: &str = "You are a criminal court judge. Read the case facts below and \
decide the prison sentence.\n\nCase facts:\n{facts}\n\nAnswer with a single JSON object of the \
form {\"sentence_months\": <integer>} giving the sentence length in months.";

/// Appended when the first answer could not be parsed.
pub const STRICT_SUFFIX: &str = "\n\nRespond with JSON only: exactly one object \
{\"sentence_months\": <integer>} and no other text.";

pub fn build_prompt(facts: &str, template: &str) -> Result<String, GatewayError> {
    match template.matches(FACTS_PLACEHOLDER).count() {
        1 => Ok(template.replacen(FACTS_PLACEHOLDER, facts, 1)),
        0 => Err(GatewayError::Template(format!(
            "template has no {FACTS_PLACEHOLDER} placeholder"
        ))),
        n => Err(GatewayError::Template(format!(
            "template has {n} {FACTS_PLACEHOLDER} placeholders, expected one"
        ))),
    }
}

pub fn strict_prompt(prompt: &str) -> String {
    format!("{prompt}{STRICT_SUFFIX}")
}
