//! Stable seeds derived from text and numbers, independent of platform and
//! process (unlike `std::hash`).

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Seed for a sequence of labelled parts; parts are separated so that
/// ("ab", "c") and ("a", "bc") differ.
pub fn seed_from_parts(parts: &[&str]) -> u64 {
    let mut h = FNV_OFFSET;
    for p in parts {
        for &b in p.as_bytes().iter().chain(std::iter::once(&0x1f)) {
            h = (h ^ b as u64).wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
