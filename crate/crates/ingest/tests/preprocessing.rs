use cdmon_core::Event;
use cdmon_ingest::{format_event, parse_fluxcd, parse_line, parse_rfc3339, parse_webhook};
use proptest::prelude::*;

const WEBHOOK: &str = include_str!("fixtures/webhook_push.json");
const POLL: &str = include_str!("fixtures/fluxcd_poll.json");

/// Days since 1970-01-01 of a proleptic Gregorian date, by era arithmetic.
fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// Unix seconds of `YYYY-MM-DDTHH:MM:SS[.fff]Z`, read by fixed offsets.
fn calendar_oracle(s: &str) -> i64 {
    let n = |a: usize, b: usize| s[a..b].parse::<i64>().unwrap();
    assert!(s.ends_with('Z'));
    days_from_civil(n(0, 4), n(5, 7), n(8, 10)) * 86_400
        + n(11, 13) * 3600
        + n(14, 16) * 60
        + n(17, 19)
}

#[test]
fn webhook_fixture_becomes_create_line() {
    let e = parse_webhook(WEBHOOK).unwrap();
    assert_eq!(
        format_event(&e).unwrap(),
        "create auth-frontend stg-9c8f5e28c2c7d78da2648f5eaa62216038cbd1fd-1458 1751424646"
    );
    assert_eq!(
        e.timestamp,
        calendar_oracle("2025-07-02T02:50:46.42462649Z")
    );
}

#[test]
fn poll_fixture_becomes_fetch_line() {
    let e = parse_fluxcd(POLL).unwrap().unwrap();
    assert_eq!(
        format_event(&e).unwrap(),
        "fetch auth-frontend stg-9c8f5e28c2c7d78da2648f5eaa62216038cbd1fd-1458 1751526419"
    );
    assert_eq!(e.timestamp, calendar_oracle("2025-07-03T07:06:59.990Z"));
}

#[test]
fn oracle_known_points() {
    assert_eq!(days_from_civil(1970, 1, 1), 0);
    assert_eq!(days_from_civil(2000, 3, 1), 11_017);
    assert_eq!(calendar_oracle("2025-07-02T00:00:00Z"), 1_751_414_400);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn conversion_matches_calendar_oracle(
        y in 2020i64..2030, m in 1i64..=12, d in 1i64..=31,
        h in 0i64..24, mi in 0i64..60, s in 0i64..60, frac in prop::option::of(0u32..1_000_000_000),
    ) {
        let leap = y % 4 == 0 && (y % 100 != 0 || y % 400 == 0);
        let month_len = [31, if leap { 29 } else { 28 }, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
        let d = d.min(month_len[(m - 1) as usize]);
        let text = match frac {
            Some(f) => format!("{y:04}-{m:02}-{d:02}T{h:02}:{mi:02}:{s:02}.{f:09}Z"),
            None => format!("{y:04}-{m:02}-{d:02}T{h:02}:{mi:02}:{s:02}Z"),
        };
        prop_assert_eq!(parse_rfc3339("time", &text).unwrap(), calendar_oracle(&text));
    }

    #[test]
    fn line_format_round_trips(
        label in "[a-z_]{1,8}", name in "[!-~]{1,20}", tag in "[!-~]{1,40}", ts in 0i64..4_000_000_000,
    ) {
        let e = Event::text(&label, &[&name, &tag], ts).unwrap();
        let line = format_event(&e).unwrap();
        prop_assert_eq!(parse_line(&line, 1).unwrap(), e);
    }
}
