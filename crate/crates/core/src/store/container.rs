//! Binary framing shared by `.dir` and `.style` files:
//!
//! ```text
//! magic (8 bytes) | header_len: u32 LE | header JSON | payload | sha256 of all preceding bytes (32)
//! ```
//!
//! The trailing digest makes any single-byte change detectable before the
//! header is interpreted.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backends::LossTerms;
use crate::error::{Error, Result};
use crate::optimizer::{OptimizeConfig, OptimizeReport};
use crate::style_space::{
    build_layout, ChannelMask, Direction, LayoutConfig, LayoutRef, PromptSpec, StyleVector,
};

pub const DIRECTION_MAGIC: &[u8; 8] = b"STYLEDIR";
pub const STYLE_MAGIC: &[u8; 8] = b"STYLEVEC";
pub const STORE_FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

/// Report fields persisted with a direction. Wall-clock time is left out
/// so records are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub trace: Vec<LossTerms>,
    pub final_direction_norm: f64,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_channel: Option<usize>,
}

impl From<&OptimizeReport> for ReportSummary {
    fn from(r: &OptimizeReport) -> Self {
        ReportSummary {
            initial_loss: r.initial_loss(),
            final_loss: r.final_loss(),
            trace: r.trace.clone(),
            final_direction_norm: r.final_direction_norm,
            failed: r.failed,
            failure_reason: r.failure_reason.clone(),
            selected_channel: r.selected_channel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadInfo {
    pub dtype: String,
    pub len: usize,
}

/// Everything in a `.dir` header. Listing reads only this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionHeader {
    pub format_version: u32,
    pub id: String,
    /// sha256 over delta bytes, packed mask and canonical hyperparameters.
    pub checksum: String,
    pub created_at: String,
    pub prompt: PromptSpec,
    pub hyperparams: OptimizeConfig,
    pub backend_fingerprint: String,
    pub layout: LayoutConfig,
    pub layout_fingerprint: String,
    /// Packed include bits, least significant bit first, hex encoded.
    pub mask: String,
    pub direction_norm: f64,
    pub active_channels: usize,
    pub report: ReportSummary,
    /// Per-directory save order; breaks `created_at` ties when listing.
    #[serde(default)]
    pub sequence: u64,
    pub payload: PayloadInfo,
}

/// A stored direction with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionRecord {
    pub id: String,
    pub checksum: String,
    pub direction: Direction,
    pub report: ReportSummary,
    pub sequence: u64,
}

fn delta_bytes(delta: &StyleVector) -> Vec<u8> {
    // Direction deltas are f32-exact, so the cast is lossless.
    delta.values().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

/// Content checksum of a direction: delta bytes, mask and hyperparameters.
pub fn content_checksum(d: &Direction) -> String {
    let mut h = Sha256::new();
    h.update(delta_bytes(d.delta()));
    h.update(d.mask().to_packed());
    h.update(serde_json::to_vec(&d.hyperparams).expect("config serializes"));
    hex::encode(h.finalize())
}

pub(crate) fn format_time(t: &DateTime<Utc>) -> String {
    crate::clock::format(t)
}

fn parse_time(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::Integrity(format!("bad created_at {s:?}: {e}")))
}

fn frame(magic: &[u8; 8], header: &[u8], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + header.len() + payload.len() + DIGEST_LEN);
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header);
    out.extend_from_slice(payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

/// Splits a verified frame into header and payload bytes.
fn unframe<'a>(magic: &[u8; 8], bytes: &'a [u8]) -> Result<(&'a [u8], &'a [u8])> {
    if bytes.len() < 12 + DIGEST_LEN {
        return Err(Error::Integrity("file is truncated".into()));
    }
    if &bytes[..8] != magic {
        return Err(Error::Integrity("bad magic bytes".into()));
    }
    let body_end = bytes.len() - DIGEST_LEN;
    if Sha256::digest(&bytes[..body_end]).as_slice() != &bytes[body_end..] {
        return Err(Error::Integrity("checksum mismatch".into()));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    if 12 + header_len > body_end {
        return Err(Error::Integrity("header length exceeds file".into()));
    }
    Ok((&bytes[12..12 + header_len], &bytes[12 + header_len..body_end]))
}

fn check_version(header: &[u8]) -> Result<()> {
    #[derive(Deserialize)]
    struct Version {
        format_version: u32,
    }
    let v: Version = serde_json::from_slice(header)
        .map_err(|e| Error::Integrity(format!("unreadable header: {e}")))?;
    if v.format_version != STORE_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: v.format_version,
            supported: STORE_FORMAT_VERSION,
        });
    }
    Ok(())
}

pub fn encode_direction(
    id: &str,
    direction: &Direction,
    report: &ReportSummary,
    sequence: u64,
) -> Vec<u8> {
    let layout = direction.delta().layout();
    let payload = delta_bytes(direction.delta());
    let header = DirectionHeader {
        format_version: STORE_FORMAT_VERSION,
        id: id.to_string(),
        checksum: content_checksum(direction),
        created_at: format_time(&direction.created_at),
        prompt: direction.prompt.clone(),
        hyperparams: direction.hyperparams.clone(),
        backend_fingerprint: direction.backend_fingerprint.clone(),
        layout: layout.config().clone(),
        layout_fingerprint: layout.fingerprint().to_string(),
        mask: hex::encode(direction.mask().to_packed()),
        direction_norm: direction.norm(),
        active_channels: direction.active_channels(),
        report: report.clone(),
        sequence,
        payload: PayloadInfo {
            dtype: "f32le".into(),
            len: direction.delta().len(),
        },
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    frame(DIRECTION_MAGIC, &header, &payload)
}

/// Parses only the header, after verifying the whole frame.
pub fn decode_direction_header(bytes: &[u8]) -> Result<DirectionHeader> {
    let (header, _) = unframe(DIRECTION_MAGIC, bytes)?;
    check_version(header)?;
    serde_json::from_slice(header).map_err(|e| Error::Integrity(format!("bad header: {e}")))
}

pub fn decode_direction(bytes: &[u8]) -> Result<DirectionRecord> {
    let (header_bytes, payload) = unframe(DIRECTION_MAGIC, bytes)?;
    check_version(header_bytes)?;
    let header: DirectionHeader = serde_json::from_slice(header_bytes)
        .map_err(|e| Error::Integrity(format!("bad header: {e}")))?;
    let layout: LayoutRef = build_layout(&header.layout)?;
    if layout.fingerprint() != header.layout_fingerprint {
        return Err(Error::Integrity("layout fingerprint does not match layout".into()));
    }
    if header.payload.dtype != "f32le"
        || header.payload.len != layout.total_channels()
        || payload.len() != 4 * header.payload.len
    {
        return Err(Error::Integrity("payload does not match the layout".into()));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let delta = StyleVector::from_values(layout.clone(), values)
        .map_err(|e| Error::Integrity(format!("bad payload: {e}")))?;
    let mask_bytes =
        hex::decode(&header.mask).map_err(|e| Error::Integrity(format!("bad mask: {e}")))?;
    let mask = ChannelMask::from_packed(layout, &mask_bytes)?;
    let direction = Direction::new(
        delta,
        mask,
        header.prompt,
        header.hyperparams,
        header.backend_fingerprint,
        parse_time(&header.created_at)?,
    )
    .map_err(|e| Error::Integrity(format!("stored direction is invalid: {e}")))?;
    if content_checksum(&direction) != header.checksum {
        return Err(Error::Integrity("content checksum mismatch".into()));
    }
    Ok(DirectionRecord {
        id: header.id,
        checksum: header.checksum,
        direction,
        report: header.report,
        sequence: header.sequence,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StyleHeader {
    format_version: u32,
    layout: LayoutConfig,
    layout_fingerprint: String,
    payload: PayloadInfo,
}

/// `.style` file: a full-precision style vector.
pub fn encode_style(s: &StyleVector) -> Vec<u8> {
    let header = StyleHeader {
        format_version: STORE_FORMAT_VERSION,
        layout: s.layout().config().clone(),
        layout_fingerprint: s.layout().fingerprint().to_string(),
        payload: PayloadInfo {
            dtype: "f64le".into(),
            len: s.len(),
        },
    };
    let payload: Vec<u8> = s.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    frame(
        STYLE_MAGIC,
        &serde_json::to_vec(&header).expect("header serializes"),
        &payload,
    )
}

pub fn decode_style(bytes: &[u8]) -> Result<StyleVector> {
    let (header_bytes, payload) = unframe(STYLE_MAGIC, bytes)?;
    check_version(header_bytes)?;
    let header: StyleHeader = serde_json::from_slice(header_bytes)
        .map_err(|e| Error::Integrity(format!("bad header: {e}")))?;
    let layout = build_layout(&header.layout)?;
    if layout.fingerprint() != header.layout_fingerprint
        || header.payload.dtype != "f64le"
        || header.payload.len != layout.total_channels()
        || payload.len() != 8 * header.payload.len
    {
        return Err(Error::Integrity("style payload does not match its header".into()));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    StyleVector::from_values(layout, values).map_err(|e| Error::Integrity(format!("bad payload: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::style_space::default_mask;
    use crate::test_support::toy_two_block_layout;
    use chrono::TimeZone;

    pub(crate) fn sample_direction() -> Direction {
        let layout = toy_two_block_layout();
        let mask = default_mask(&layout, true, 1).unwrap();
        let values: Vec<f64> = (0..layout.total_channels())
            .map(|i| if mask.is_included(i) { 0.1 * i as f64 - 0.3 } else { 0.0 })
            .collect();
        Direction::new(
            StyleVector::from_values(layout, values).unwrap(),
            mask,
            PromptSpec::single("beard"),
            OptimizeConfig::default(),
            "toy-abc",
            Utc.timestamp_opt(1_700_000_000, 0).unwrap(),
        )
        .unwrap()
    }

    fn summary() -> ReportSummary {
        ReportSummary {
            initial_loss: 1.0,
            final_loss: 0.5,
            trace: vec![LossTerms { total: 0.5, clip: 0.4, identity: 0.2 }],
            final_direction_norm: 0.7,
            failed: false,
            failure_reason: None,
            selected_channel: None,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let d = sample_direction();
        let bytes = encode_direction("abc", &d, &summary(), 3);
        let rec = decode_direction(&bytes).unwrap();
        assert_eq!(rec.id, "abc");
        assert_eq!(rec.sequence, 3);
        assert_eq!(rec.report, summary());
        assert_eq!(rec.direction, d);
        for (a, b) in rec.direction.delta().values().iter().zip(d.delta().values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(encode_direction("abc", &rec.direction, &rec.report, 3), bytes);
    }

    #[test]
    fn every_single_byte_flip_is_detected() {
        let bytes = encode_direction("abc", &sample_direction(), &summary(), 0);
        for i in 0..bytes.len() {
            let mut corrupt = bytes.clone();
            corrupt[i] ^= 0x01;
            assert!(
                matches!(decode_direction(&corrupt), Err(Error::Integrity(_))),
                "flip at {i} not detected"
            );
        }
        assert!(matches!(
            decode_direction(&bytes[..bytes.len() - 1]),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn future_versions_are_rejected() {
        let d = sample_direction();
        let bytes = encode_direction("abc", &d, &summary(), 0);
        let (header, payload) = unframe(DIRECTION_MAGIC, &bytes).unwrap();
        let text = String::from_utf8(header.to_vec()).unwrap();
        let bumped = text.replacen("\"format_version\":1", "\"format_version\":2", 1);
        let reframed = frame(DIRECTION_MAGIC, bumped.as_bytes(), payload);
        assert!(matches!(
            decode_direction(&reframed),
            Err(Error::UnsupportedVersion { found: 2, supported: 1 })
        ));
    }

    #[test]
    fn style_round_trip() {
        let layout = toy_two_block_layout();
        let values: Vec<f64> = (0..layout.total_channels()).map(|i| (i as f64).sin() / 3.0).collect();
        let s = StyleVector::from_values(layout, values).unwrap();
        let bytes = encode_style(&s);
        assert_eq!(decode_style(&bytes).unwrap(), s);
        let mut bad = bytes.clone();
        bad[20] ^= 0xff;
        assert!(matches!(decode_style(&bad), Err(Error::Integrity(_))));
        assert!(decode_direction(&bytes).is_err());
    }
}
