use chrono::{DateTime, TimeZone, Utc};

/// Environment variable that pins timestamps for reproducible output.
pub const SOURCE_DATE_EPOCH: &str = "SOURCE_DATE_EPOCH";

/// Current time, or the instant named by `SOURCE_DATE_EPOCH` (whole seconds
/// since the Unix epoch) when that variable is set and valid.
pub fn now() -> DateTime<Utc> {
    std::env::var(SOURCE_DATE_EPOCH)
        .ok()
        .and_then(|v| v.trim().parse::<i64>().ok())
        .and_then(|secs| Utc.timestamp_opt(secs, 0).single())
        .unwrap_or_else(Utc::now)
}

/// Fixed-width RFC 3339 in UTC with nanoseconds, so string order is time order.
pub fn format(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::Nanos, true)
}
