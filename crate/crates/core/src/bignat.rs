use num_bigint::BigUint;
use num_traits::One;

use crate::error::{Error, Result};

pub type BigNat = BigUint;

/// Largest `n` accepted by [`pow2_tower`]; the result has `2^(n-1) + 1` bits.
pub const MAX_TOWER_LEVEL: u32 = 26;

/// `2^(2^(n-1))`.
pub fn pow2_tower(n: u32) -> Result<BigNat> {
    if n == 0 || n > MAX_TOWER_LEVEL {
        return Err(Error::Bound(format!(
            "tower level must be in 1..={MAX_TOWER_LEVEL}, got {n}"
        )));
    }
    Ok(BigNat::one() << (1u64 << (n - 1)))
}
