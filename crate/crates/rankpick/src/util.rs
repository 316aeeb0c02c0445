//! Crate-internal helpers.

/// 64-bit finalizer with full avalanche (the splitmix64 mixing step).
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixing_separates_nearby_inputs() {
        assert_ne!(mix64(0), mix64(1));
        assert_eq!(mix64(7), mix64(7));
    }
}
