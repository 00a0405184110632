//! Line-oriented text dialect shared by trajectory, scenario and controller
//! configuration files.
//!
//! A file starts with a `<MAGIC> <version>` header. Every following non-empty
//! line is a keyword followed by whitespace-separated tokens; `#` starts a
//! comment. Floats are written with 17 significant digits so that a
//! save/load cycle is bit-exact.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

/// One meaningful line: its 1-based number, keyword and argument tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Line<'a> {
    pub number: usize,
    pub keyword: &'a str,
    pub args: Vec<&'a str>,
}

impl<'a> Line<'a> {
    pub fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.number, message)
    }

    pub fn expect_args(&self, n: usize) -> Result<(), ParseError> {
        if self.args.len() != n {
            return Err(self.error(format!(
                "`{}` expects {n} argument(s), found {}",
                self.keyword,
                self.args.len()
            )));
        }
        Ok(())
    }

    pub fn float(&self, index: usize) -> Result<f64, ParseError> {
        let token = self
            .args
            .get(index)
            .ok_or_else(|| self.error(format!("missing argument {}", index + 1)))?;
        parse_float(token).ok_or_else(|| self.error(format!("`{token}` is not a finite number")))
    }

    pub fn floats_from(&self, start: usize) -> Result<Vec<f64>, ParseError> {
        (start..self.args.len()).map(|i| self.float(i)).collect()
    }
}

pub fn parse_float(token: &str) -> Option<f64> {
    token.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Splits `text` into meaningful lines after checking the header.
pub fn parse<'a>(text: &'a str, magic: &str, version: u32) -> Result<Vec<Line<'a>>, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, raw)| (i + 1, raw.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (number, header) = lines.next().ok_or_else(|| ParseError::new(1, "empty file"))?;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some(magic) {
        return Err(ParseError::new(number, format!("expected `{magic}` header")));
    }
    match tokens.next().and_then(|v| v.parse::<u32>().ok()) {
        Some(v) if v == version => {}
        _ => return Err(ParseError::new(number, format!("unsupported version, expected {version}"))),
    }

    Ok(lines
        .map(|(number, l)| {
            let mut tokens = l.split_whitespace();
            let keyword = tokens.next().unwrap_or("");
            Line { number, keyword, args: tokens.collect() }
        })
        .collect())
}

/// 17 significant digits, the shortest width that round-trips every `f64`.
pub fn format_float(value: f64) -> String {
    format!("{value:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_comments() {
        let text = "# leading comment\nALIPX 1\n\nparam a 1.5 # trailing\n  curve b 1 0 1\n";
        let lines = parse(text, "ALIPX", 1).unwrap();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].number, 4);
        assert_eq!(lines[0].keyword, "param");
        assert_eq!(lines[0].float(1).unwrap(), 1.5);
        assert_eq!(lines[1].floats_from(1).unwrap(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn wrong_header_or_version() {
        assert_eq!(parse("NOPE 1\n", "ALIPX", 1).unwrap_err().line, 1);
        assert!(parse("ALIPX 2\n", "ALIPX", 1).is_err());
        assert!(parse("", "ALIPX", 1).is_err());
    }

    #[test]
    fn bad_number_reports_line() {
        let lines = parse("ALIPX 1\nparam a\nparam b x\n", "ALIPX", 1).unwrap();
        assert_eq!(lines[0].float(1).unwrap_err().line, 2);
        assert_eq!(lines[1].float(1).unwrap_err().line, 3);
        assert!(lines[1].float(1).unwrap_err().message.contains("`x`"));
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -16.659_700_000_000_1, 1e-300, 123_456_789.123_456_79, 0.0, -0.0] {
            let s = format_float(v);
            assert_eq!(parse_float(&s).unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }
}
