//! Printable escape codec for token byte-strings.
//!
//! Tokens are arbitrary byte sequences. For serialization and reports they
//! are rendered as ASCII: printable bytes stay literal, backslash doubles,
//! and everything else becomes a `\xNN` hex escape. The mapping is a
//! bijection, so escaped forms round-trip exactly.

use crate::error::{Error, Result};

/// Escape a byte-string into printable ASCII.
pub fn escape_bytes(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for &b in bytes {
        match b {
            b'\\' => out.push_str("\\\\"),
            0x20..=0x7e => out.push(b as char),
            _ => out.push_str(&format!("\\x{b:02x}")),
        }
    }
    out
}

/// Invert [`escape_bytes`]. Fails on dangling or malformed escapes.
pub fn unescape_bytes(text: &str) -> Result<Vec<u8>> {
    let raw = text.as_bytes();
    let mut out = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        let b = raw[i];
        if b != b'\\' {
            if !(0x20..=0x7e).contains(&b) {
                return Err(Error::Format(format!(
                    "unescaped non-printable byte 0x{b:02x} in token string"
                )));
            }
            out.push(b);
            i += 1;
            continue;
        }
        match raw.get(i + 1) {
            Some(b'\\') => {
                out.push(b'\\');
                i += 2;
            }
            Some(b'x') => {
                let hex = raw
                    .get(i + 2..i + 4)
                    .ok_or_else(|| Error::Format("truncated \\x escape".into()))?;
                let hex = std::str::from_utf8(hex)
                    .map_err(|_| Error::Format("non-ascii \\x escape".into()))?;
                let value = u8::from_str_radix(hex, 16)
                    .map_err(|_| Error::Format(format!("invalid hex escape \\x{hex}")))?;
                out.push(value);
                i += 4;
            }
            other => {
                return Err(Error::Format(format!(
                    "invalid escape sequence \\{}",
                    other.map(|&c| c as char).unwrap_or('∅')
                )))
            }
        }
    }
    Ok(out)
}
