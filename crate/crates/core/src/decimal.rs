//! Exact fixed-point rendering of count ratios.
//!
//! Every ratio shown to a user (CSV exports, service payloads, reports) is
//! rendered from integer counts with round-half-up, so the bytes never depend
//! on platform float formatting.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;

/// Number of fractional digits used by every exported ratio.
pub const PLACES: usize = 6;

/// Token used for ratios whose denominator is zero.
pub const UNDEFINED: &str = "n/a";

fn pow10(places: usize) -> u128 {
    10u128.pow(places as u32)
}

fn format_fixed(scaled: u128, places: usize) -> String {
    if places == 0 {
        return scaled.to_string();
    }
    let unit = pow10(places);
    format!("{}.{:0width$}", scaled / unit, scaled % unit, width = places)
}

/// `num / den` rounded half-up to `places` digits. `None` when `den == 0`.
pub fn ratio(num: u64, den: u64, places: usize) -> Option<String> {
    if den == 0 {
        return None;
    }
    let unit = pow10(places);
    let (num, den) = (num as u128, den as u128);
    let scaled = (2 * num * unit + den) / (2 * den);
    Some(format_fixed(scaled, places))
}

/// `sqrt(num / den)` rounded half-up to `places` digits.
pub fn sqrt_ratio(num: u128, den: u128, places: usize) -> Option<String> {
    if den == 0 {
        return None;
    }
    // floor(sqrt(y) * 10^p + 1/2) = floor((isqrt(floor(4 y 10^2p)) + 1) / 2)
    let unit = BigInt::from(pow10(places));
    let y4 = BigInt::from(4u8) * BigInt::from(num) * &unit * &unit / BigInt::from(den);
    let root: BigInt = y4.sqrt();
    let scaled: BigInt = (root + 1u8) / 2u8;
    let scaled: u128 = scaled.try_into().expect("rendered ratio fits u128");
    Some(format_fixed(scaled, places))
}

/// Option-aware wrapper rendering `None` as [`UNDEFINED`].
pub fn or_undefined(value: Option<String>) -> String {
    value.unwrap_or_else(|| UNDEFINED.to_string())
}

pub(crate) fn render_big_ratio(numer: &BigInt, denom: &BigInt, places: usize) -> String {
    let negative = (numer.sign() == Sign::Minus) != (denom.sign() == Sign::Minus)
        && numer.sign() != Sign::NoSign;
    let (n, d) = (numer.magnitude().clone(), denom.magnitude().clone());
    let unit = num_bigint::BigUint::from(10u8).pow(places as u32);
    let scaled = (num_bigint::BigUint::from(2u8) * n * &unit + &d) / (num_bigint::BigUint::from(2u8) * d);
    let (int_part, frac_part) = scaled.div_rem(&unit);
    let body = if places == 0 {
        int_part.to_string()
    } else {
        format!("{}.{:0>width$}", int_part, frac_part.to_string(), width = places)
    };
    if negative && body.chars().any(|c| c.is_ascii_digit() && c != '0') {
        format!("-{body}")
    } else {
        body
    }
}
