use chrono::NaiveDate;

use super::profile::{DateOrder, RawFileProfile};
use super::FieldError;

const MONTHS: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

/// Parses a calendar date.
///
/// Tried in order: ISO `YYYY-MM-DD` (a trailing time is ignored), the
/// profile's numeric order, then `DD-Mon-YY[YY]` with month names.
pub fn parse_date(text: &str, profile: &RawFileProfile) -> Result<NaiveDate, FieldError> {
    let bad = || FieldError::MalformedDate(text.trim().to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(bad());
    }
    // Drop a time component: "2023-01-31T00:00:00", "31/01/2023 00:00".
    let s = match s.find(':') {
        Some(colon) => s[..colon]
            .rfind(['T', ' '])
            .map_or(s, |cut| s[..cut].trim_end()),
        None => s,
    };

    if let Some(d) = parse_iso(s) {
        return Ok(d);
    }
    if let Some(d) = parse_numeric(s, profile.date_order) {
        return Ok(d);
    }
    parse_month_name(s).ok_or_else(bad)
}

fn split_fields(s: &str) -> Vec<&str> {
    s.split(['-', '/', '.', ' '])
        .filter(|p| !p.is_empty())
        .collect()
}

fn parse_iso(s: &str) -> Option<NaiveDate> {
    let parts: Vec<&str> = s.split('-').collect();
    if parts.len() != 3 || parts[0].len() != 4 {
        return None;
    }
    ymd(num(parts[0])?, num(parts[1])?, num(parts[2])?)
}

fn parse_numeric(s: &str, order: DateOrder) -> Option<NaiveDate> {
    let parts = split_fields(s);
    if parts.len() != 3 || !parts.iter().all(|p| p.chars().all(|c| c.is_ascii_digit())) {
        return None;
    }
    match order {
        DateOrder::DayFirst => {
            let year = year_of(parts[2])?;
            ymd(year, num(parts[1])?, num(parts[0])?)
        }
        DateOrder::YearFirst => {
            if parts[0].len() != 4 {
                return None;
            }
            ymd(num(parts[0])?, num(parts[1])?, num(parts[2])?)
        }
    }
}

fn parse_month_name(s: &str) -> Option<NaiveDate> {
    let parts = split_fields(s);
    if parts.len() != 3 {
        return None;
    }
    let name = parts[1].to_ascii_lowercase();
    if name.len() < 3 {
        return None;
    }
    let month = MONTHS.iter().position(|m| name.starts_with(m))? as u32 + 1;
    let full = chrono::Month::try_from(month as u8)
        .ok()?
        .name()
        .to_ascii_lowercase();
    if name.len() > 3 && !full.starts_with(&name) {
        return None;
    }
    ymd(year_of(parts[2])?, month as i32, num(parts[0])?)
}

fn num(s: &str) -> Option<i32> {
    if s.is_empty() || s.len() > 4 || !s.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Two-digit years pivot: 00-68 are 2000s, 69-99 are 1900s.
fn year_of(s: &str) -> Option<i32> {
    let y = num(s)?;
    match s.len() {
        2 if y <= 68 => Some(2000 + y),
        2 => Some(1900 + y),
        4 => Some(y),
        _ => None,
    }
}

fn ymd(y: i32, m: i32, d: i32) -> Option<NaiveDate> {
    NaiveDate::from_ymd_opt(y, u32::try_from(m).ok()?, u32::try_from(d).ok()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn p(s: &str) -> Result<NaiveDate, FieldError> {
        parse_date(s, &RawFileProfile::default())
    }

    #[test]
    fn documented_examples() {
        assert_eq!(p("2023-01-31").unwrap(), d(2023, 1, 31));
        assert_eq!(p("31/01/2023").unwrap(), d(2023, 1, 31));
        assert_eq!(p("31-Jan-23").unwrap(), d(2023, 1, 31));
    }

    #[test]
    fn variants() {
        assert_eq!(p("2023-01-31T00:00:00").unwrap(), d(2023, 1, 31));
        assert_eq!(p("31/01/2023 00:00").unwrap(), d(2023, 1, 31));
        assert_eq!(p("05.04.22").unwrap(), d(2022, 4, 5));
        assert_eq!(p("1 September 2022").unwrap(), d(2022, 9, 1));
        assert_eq!(p("01-Sept-2022").unwrap(), d(2022, 9, 1));
        assert_eq!(p("15-dec-69").unwrap(), d(1969, 12, 15));
        assert_eq!(p("15/12/68").unwrap(), d(2068, 12, 15));
    }

    #[test]
    fn year_first_profile() {
        let prof = RawFileProfile {
            date_order: DateOrder::YearFirst,
            ..RawFileProfile::default()
        };
        assert_eq!(parse_date("2023/01/31", &prof).unwrap(), d(2023, 1, 31));
        assert!(parse_date("31/01/2023", &prof).is_err());
    }

    #[test]
    fn malformed_dates() {
        for s in [
            "",
            "31/02/2023",
            "2023-13-01",
            "yesterday",
            "31-Foo-23",
            "31/01/123",
            "1/2",
        ] {
            assert!(p(s).is_err(), "{s:?} should be rejected");
        }
    }
}
