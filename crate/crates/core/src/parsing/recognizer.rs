use super::LogCategory;
use crate::gateway::{ChatRequest, ModelGateway};
use crate::json_extract::first_object;
use crate::{prompts, Error, Result};

/// Lines shown to the model when naming the log type.
pub const SAMPLE_LINES: usize = 10;

enum Reply {
    Known(LogCategory),
    Unknown(String),
}

fn interpret(reply: &str) -> Reply {
    let named = first_object(reply)
        .and_then(|obj| obj.get("category").and_then(|v| v.as_str()).map(str::to_string));
    match named {
        Some(name) => match name.parse() {
            Ok(c) => Reply::Known(c),
            Err(_) => Reply::Unknown(name),
        },
        None => Reply::Unknown(reply.to_string()),
    }
}

/// Asks the model which registry category the sample belongs to. A reply
/// that is not JSON or names an unknown category is retried once.
pub fn identify_log_type<G: ModelGateway + ?Sized, S: AsRef<str>>(
    sample_lines: &[S],
    gateway: &G,
    temperature: f32,
) -> Result<LogCategory> {
    let sample: Vec<&str> = sample_lines
        .iter()
        .map(AsRef::as_ref)
        .filter(|l| !l.trim().is_empty())
        .take(SAMPLE_LINES)
        .collect();
    if sample.is_empty() {
        return Err(Error::EmptyInput);
    }
    let prompt = prompts::render_recognizer(&LogCategory::names(), &sample);
    let request = ChatRequest::analyst(prompt).with_temperature(temperature);
    let mut last = String::new();
    for attempt in 0..2 {
        let reply = gateway.chat_complete(&request)?;
        match interpret(&reply) {
            Reply::Known(c) => return Ok(c),
            Reply::Unknown(what) => {
                tracing::debug!(attempt, reply = %what, "log type not recognized");
                last = what;
            }
        }
    }
    Err(Error::UnknownCategory { reply: last })
}
