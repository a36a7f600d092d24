//! Record parsers for the supported log sources.

use cdmon_core::{Event, Timestamp};
use chrono::DateTime;
use serde_json::{Map, Value};

use crate::IngestError;

/// One kind of raw log record.
pub trait SourceParser: Send + Sync {
    fn name(&self) -> &'static str;
    /// `Ok(None)` marks a well-formed record that carries no event.
    fn parse(&self, record: &Value) -> Result<Option<Event>, IngestError>;
}

/// Unix seconds of an RFC 3339 instant, sub-second part floored.
pub fn parse_rfc3339(field: &'static str, value: &str) -> Result<Timestamp, IngestError> {
    DateTime::parse_from_rfc3339(value)
        .map(|t| t.timestamp())
        .map_err(|_| IngestError::BadTime {
            field,
            value: value.to_string(),
        })
}

fn object(record: &Value) -> Result<&Map<String, Value>, IngestError> {
    record.as_object().ok_or(IngestError::NotAnObject)
}

fn string_field<'a>(
    obj: &'a Map<String, Value>,
    field: &'static str,
) -> Result<&'a str, IngestError> {
    match obj.get(field) {
        None | Some(Value::Null) => Err(IngestError::MissingField(field)),
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(IngestError::NotAString { field }),
    }
}

/// Registry webhook payloads: `time`, `package_name`, `package_tag`.
pub struct WebhookSource;

impl SourceParser for WebhookSource {
    fn name(&self) -> &'static str {
        "webhook"
    }

    fn parse(&self, record: &Value) -> Result<Option<Event>, IngestError> {
        let obj = object(record)?;
        let time = string_field(obj, "time")?;
        let name = string_field(obj, "package_name")?;
        let tag = string_field(obj, "package_tag")?;
        let ts = parse_rfc3339("time", time)?;
        Ok(Some(Event::text("create", &[name, tag], ts)?))
    }
}

/// Image-poller logs: `ts` and `msg`; only tag-resolution messages count.
pub struct FluxcdSource;

const FETCH_PREFIX: &str = "Latest image tag for ";
const FETCH_INFIX: &str = " resolved to ";

/// Extracts `(image name, tag)` from a tag-resolution message.
fn resolved_tag(msg: &str) -> Option<(&str, &str)> {
    let (path, rest) = msg.strip_prefix(FETCH_PREFIX)?.split_once(FETCH_INFIX)?;
    let path = path.trim().trim_matches(|c| c == '\'' || c == '"');
    let name = path.rsplit('/').next().filter(|n| !n.is_empty())?;
    let tag = rest.split_whitespace().next()?;
    let tag = tag
        .trim_end_matches("...")
        .trim_matches(|c| c == '\'' || c == '"');
    (!tag.is_empty()).then_some((name, tag))
}

impl SourceParser for FluxcdSource {
    fn name(&self) -> &'static str {
        "fluxcd"
    }

    fn parse(&self, record: &Value) -> Result<Option<Event>, IngestError> {
        let obj = object(record)?;
        let msg = string_field(obj, "msg")?;
        let Some((name, tag)) = resolved_tag(msg) else {
            return Ok(None);
        };
        let ts = match obj.get("ts") {
            None | Some(Value::Null) => return Err(IngestError::MissingField("ts")),
            Some(Value::String(s)) => parse_rfc3339("ts", s)?,
            // Older controllers log epoch seconds as a float.
            Some(Value::Number(n)) => match n.as_f64() {
                Some(secs) if secs.is_finite() && secs >= 0.0 => secs.floor() as Timestamp,
                _ => {
                    return Err(IngestError::BadTime {
                        field: "ts",
                        value: n.to_string(),
                    })
                }
            },
            Some(_) => return Err(IngestError::NotAString { field: "ts" }),
        };
        Ok(Some(Event::text("fetch", &[name, tag], ts)?))
    }
}

/// Parses one webhook body into a `create` event.
pub fn parse_webhook(body: &str) -> Result<Event, IngestError> {
    let record: Value = serde_json::from_str(body)?;
    Ok(WebhookSource
        .parse(&record)?
        .expect("webhook records always carry an event"))
}

/// Parses one poller record; `None` for unrelated messages.
pub fn parse_fluxcd(body: &str) -> Result<Option<Event>, IngestError> {
    let record: Value = serde_json::from_str(body)?;
    FluxcdSource.parse(&record)
}

/// Source parsers by name. Registration order is the tie-break order when
/// sources are merged.
pub struct SourceRegistry {
    parsers: Vec<Box<dyn SourceParser>>,
}

impl SourceRegistry {
    pub fn empty() -> Self {
        SourceRegistry {
            parsers: Vec::new(),
        }
    }

    /// `webhook`, then `fluxcd`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(WebhookSource));
        r.register(Box::new(FluxcdSource));
        r
    }

    /// Replaces an existing parser of the same name in place.
    pub fn register(&mut self, parser: Box<dyn SourceParser>) {
        match self.parsers.iter().position(|p| p.name() == parser.name()) {
            Some(i) => self.parsers[i] = parser,
            None => self.parsers.push(parser),
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.parsers.iter().map(|p| p.name()).collect()
    }

    /// The parser and its merge rank.
    pub fn get(&self, name: &str) -> Result<(usize, &dyn SourceParser), IngestError> {
        self.parsers
            .iter()
            .position(|p| p.name() == name)
            .map(|i| (i, self.parsers[i].as_ref()))
            .ok_or_else(|| IngestError::UnknownSource {
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }
}

impl Default for SourceRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
