//! Exact money parsing into integer pence.

use super::profile::RawFileProfile;
use super::FieldError;

/// Parses a published amount into signed minor units (pence).
///
/// Accepts currency symbols, thousands separators, a leading minus or
/// accounting-style parentheses for negatives, and at most two decimals.
pub fn parse_amount(text: &str, profile: &RawFileProfile) -> Result<i64, FieldError> {
    parse_amount_with(text, profile.decimal_separator)
}

pub(crate) fn parse_amount_with(text: &str, decimal_sep: char) -> Result<i64, FieldError> {
    let bad = || FieldError::MalformedAmount(text.trim().to_string());
    let mut s = text.trim();
    if s.is_empty() {
        return Err(bad());
    }

    let mut negative = false;
    if s.starts_with('(') && s.ends_with(')') {
        negative = true;
        s = s[1..s.len() - 1].trim();
    }
    // "-£5", "£-5" and "- 5" all occur in the wild.
    let mut body = String::with_capacity(s.len());
    let mut seen_digit = false;
    for ch in s.chars() {
        match ch {
            '-' | '\u{2212}' if !seen_digit && !negative => negative = true,
            '-' | '\u{2212}' => return Err(bad()),
            '£' | '$' | '€' => {
                if seen_digit {
                    return Err(bad());
                }
            }
            c if c.is_whitespace() || c == '\u{a0}' => {}
            c => {
                if c.is_ascii_digit() {
                    seen_digit = true;
                }
                body.push(c);
            }
        }
    }
    let body = body
        .strip_prefix("GBP")
        .or_else(|| body.strip_suffix("GBP"))
        .unwrap_or(&body)
        .to_string();
    if body.is_empty() || !seen_digit {
        return Err(bad());
    }

    let thousands = if decimal_sep == '.' { ',' } else { '.' };
    let (int_part, frac_part) = match body.rfind(decimal_sep) {
        Some(i) => (&body[..i], &body[i + decimal_sep.len_utf8()..]),
        None => (body.as_str(), ""),
    };
    if frac_part.len() > 2 || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    if int_part.contains(decimal_sep) {
        return Err(bad());
    }
    let groups: Vec<&str> = int_part.split(thousands).collect();
    if groups.len() > 1 {
        // Grouped digits must look like 1,234,567.
        let first_ok = (1..=3).contains(&groups[0].len());
        let rest_ok = groups[1..].iter().all(|g| g.len() == 3);
        if !first_ok || !rest_ok {
            return Err(bad());
        }
    }
    let digits: String = groups.concat();
    if !digits.chars().all(|c| c.is_ascii_digit()) || (digits.is_empty() && frac_part.is_empty()) {
        return Err(bad());
    }

    let pounds: i64 = if digits.is_empty() {
        0
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let pence: i64 = match frac_part.len() {
        0 => 0,
        1 => frac_part.parse::<i64>().map_err(|_| bad())? * 10,
        _ => frac_part.parse().map_err(|_| bad())?,
    };
    let magnitude = pounds
        .checked_mul(100)
        .and_then(|v| v.checked_add(pence))
        .ok_or_else(bad)?;
    Ok(if negative { -magnitude } else { magnitude })
}

/// Parses only the canonical rendering produced by [`format_amount`].
pub(crate) fn parse_amount_strict(text: &str) -> Option<i64> {
    let (neg, body) = match text.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, text),
    };
    let (int_part, frac) = body.split_once('.')?;
    if int_part.is_empty()
        || frac.len() != 2
        || !int_part
            .bytes()
            .chain(frac.bytes())
            .all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let magnitude = int_part
        .parse::<i64>()
        .ok()?
        .checked_mul(100)?
        .checked_add(frac.parse::<i64>().ok()?)?;
    Some(if neg { -magnitude } else { magnitude })
}

/// Canonical decimal rendering: optional minus, whole pounds, two decimals.
pub fn format_amount(minor: i64) -> String {
    let sign = if minor < 0 { "-" } else { "" };
    let abs = minor.unsigned_abs();
    format!("{sign}{}.{:02}", abs / 100, abs % 100)
}
