//! Scalar abstraction shared by every matrix type in the crate.
//!
//! The algorithms only need ring arithmetic, an absolute value and a fixed
//! little-endian wire encoding, so they run unchanged on `f64`, `f32` and
//! exact rationals.

use std::fmt::{Debug, Display};

use num_rational::Rational64;
use num_traits::{FromPrimitive, NumAssign, Signed, ToPrimitive};

/// Numeric element type of sparse matrices.
pub trait Scalar:
    Copy
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + NumAssign
    + Signed
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    /// Size of one encoded value on the wire.
    const WIRE_BYTES: usize;

    fn write_le(self, out: &mut Vec<u8>);

    /// Decodes one value from the first `WIRE_BYTES` bytes of `bytes`.
    fn read_le(bytes: &[u8]) -> Self;

    /// Matrix Market text form. Floating types use 17 significant digits.
    fn format_mm(self) -> String;

    fn parse_mm(text: &str) -> Option<Self>;

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Bit-level identity, so `-0.0` and `0.0` differ and `NaN == NaN`.
    fn bit_eq(self, other: Self) -> bool;
}

impl Scalar for f64 {
    const WIRE_BYTES: usize = 8;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let mut raw = [0u8; 8];
        raw.copy_from_slice(&bytes[..8]);
        f64::from_le_bytes(raw)
    }

    fn format_mm(self) -> String {
        format!("{self:.16e}")
    }

    fn parse_mm(text: &str) -> Option<Self> {
        text.parse().ok()
    }

    fn bit_eq(self, other: Self) -> bool {
        self.to_bits() == other.to_bits()
    }
}

impl Scalar for f32 {
    const WIRE_BYTES: usize = 4;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let mut raw = [0u8; 4];
        raw.copy_from_slice(&bytes[..4]);
        f32::from_le_bytes(raw)
    }

    fn format_mm(self) -> String {
        format!("{self:.8e}")
    }

    fn parse_mm(text: &str) -> Option<Self> {
        text.parse().ok()
    }

    fn bit_eq(self, other: Self) -> bool {
        self.to_bits() == other.to_bits()
    }
}

impl Scalar for Rational64 {
    const WIRE_BYTES: usize = 16;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.numer().to_le_bytes());
        out.extend_from_slice(&self.denom().to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let mut numer = [0u8; 8];
        let mut denom = [0u8; 8];
        numer.copy_from_slice(&bytes[..8]);
        denom.copy_from_slice(&bytes[8..16]);
        Rational64::new_raw(i64::from_le_bytes(numer), i64::from_le_bytes(denom))
    }

    // Matrix Market has no rational field; values are written as `p/q`
    // and read back exactly by this crate only.
    fn format_mm(self) -> String {
        self.to_string()
    }

    fn parse_mm(text: &str) -> Option<Self> {
        text.parse().ok()
    }

    fn bit_eq(self, other: Self) -> bool {
        self.numer() == other.numer() && self.denom() == other.denom()
    }
}

/// `1 / 2^k` built from ring operations, exact for every scalar type here.
pub(crate) fn inverse_power_of_two<T: Scalar>(k: u32) -> T {
    let two = T::one() + T::one();
    let mut denom = T::one();
    for _ in 0..k {
        denom *= two;
    }
    T::one() / denom
}
