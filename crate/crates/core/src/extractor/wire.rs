//! Line protocol for out-of-process backends.
//!
//! Extractor backends read one utterance per line and answer with one line:
//!
//! ```text
//! > How much is 58 plus 12?
//! < (58+12)
//! > What color is the sky?
//! < NOPARSE unknown-vocabulary
//! ```
//!
//! A reply is either a calculator call (see [`crate::arithmetic`]) or
//! `NOPARSE` followed by an optional reason code. Completion backends (used
//! by the fallback expert) reply with the completion text on one line.

use alloc::format;
use alloc::string::String;

use super::{ExtractError, Extraction, NoParseReason};
use crate::arithmetic::parse_calculator_call;

pub const NOPARSE: &str = "NOPARSE";

/// Request line for `text`: line breaks become spaces.
pub fn encode_request(text: &str) -> String {
    text.chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c }).collect()
}

pub fn encode_reply(reply: &Result<Extraction, NoParseReason>) -> String {
    match reply {
        Ok(x) => x.expr.to_calculator_call(),
        Err(reason) => format!("{NOPARSE} {}", reason.code()),
    }
}

/// Decode a reply line. A line that is neither a calculator call nor a
/// `NOPARSE` reply is a transport error.
pub fn decode_reply(line: &str) -> Result<Extraction, ExtractError> {
    let line = line.trim();
    if let Some(rest) = line.strip_prefix(NOPARSE) {
        let code = rest.trim();
        let reason = if code.is_empty() {
            NoParseReason::Other(String::from("unspecified"))
        } else {
            NoParseReason::from_code(code)
        };
        return Err(ExtractError::NoParse(reason));
    }
    parse_calculator_call(line)
        .map(|expr| Extraction { expr, confidence: 1.0, matched_template: None })
        .map_err(|e| ExtractError::Transport(format!("malformed reply `{line}`: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::ReferenceExtractor;

    #[test]
    fn replies() {
        let x = ReferenceExtractor::new();
        let ok = x.parse("How much is 58 plus 12?");
        assert_eq!(encode_reply(&ok), "(58+12)");
        assert_eq!(decode_reply("(58+12)\n").unwrap().expr, ok.unwrap().expr);

        let no = x.parse("What color is the sky?");
        assert_eq!(encode_reply(&no), "NOPARSE unknown-vocabulary");
        assert_eq!(decode_reply("NOPARSE ambiguous"), Err(ExtractError::NoParse(NoParseReason::Ambiguous(0))));
        assert!(matches!(decode_reply("NOPARSE"), Err(ExtractError::NoParse(NoParseReason::Other(_)))));
        assert!(matches!(decode_reply("seventy"), Err(ExtractError::Transport(_))));
    }

    #[test]
    fn requests_are_single_lines() {
        assert_eq!(encode_request("a\nb\r\nc"), "a b  c");
    }
}
