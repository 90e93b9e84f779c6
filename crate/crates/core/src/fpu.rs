//! Single-precision arithmetic on raw IEEE-754 bit patterns.
//!
//! Rust's `f32` add and multiply are correctly rounded with
//! round-to-nearest-even, which is the only mode the datapath supports.
//! NaN results are canonicalized to RISC-V's `0x7fc00000`.

pub const CANONICAL_NAN: u32 = 0x7FC0_0000;
pub const POS_ZERO: u32 = 0;

fn canon(x: f32) -> u32 {
    if x.is_nan() {
        CANONICAL_NAN
    } else {
        x.to_bits()
    }
}

pub fn add(a: u32, b: u32) -> u32 {
    canon(f32::from_bits(a) + f32::from_bits(b))
}

pub fn mul(a: u32, b: u32) -> u32 {
    canon(f32::from_bits(a) * f32::from_bits(b))
}

/// `acc + a * b` with two roundings: the product is rounded first, then the
/// sum. Never fused.
pub fn mac(acc: u32, a: u32, b: u32) -> u32 {
    add(acc, mul(a, b))
}
